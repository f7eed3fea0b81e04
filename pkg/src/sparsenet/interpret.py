"""Post-hoc identification of inferred hidden variables.

When some normally-hidden factor has been measured in a few configurations,
it can be assigned to an inferred column by Pearson correlation (with a
least-squares scale estimate); multiple measured factors are assigned
jointly by exact matching. Prior knowledge about target sets is scored
against inferred supports with the hypergeometric tail, computed in log
space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import gammaln, logsumexp


class DegenerateColumnError(ValueError):
    """A column is constant on the measured configurations."""


@dataclass(frozen=True)
class FactorMeasurement:
    """States of one physical factor observed in a subset of configurations."""

    values: np.ndarray
    config_indices: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        idx = np.asarray(self.config_indices, dtype=int)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "config_indices", idx)
        if values.ndim != 1 or idx.ndim != 1 or len(values) != len(idx):
            raise ValueError("values and config_indices must be equal-length vectors")
        if len(values) < 2:
            raise ValueError("need at least two measured configurations")
        if len(set(idx.tolist())) != len(idx) or (idx < 0).any():
            raise ValueError("config_indices must be distinct and non-negative")


@dataclass(frozen=True)
class OverlapTest:
    """Hypergeometric overlap record between two index sets."""

    population: int
    set_a_size: int
    set_b_size: int
    overlap: int
    log_pval: float


@dataclass(frozen=True)
class FactorMatch:
    label: str
    column: int
    rho: float
    scale: float


def _abs_pearson_columns(sub: np.ndarray, u: np.ndarray) -> np.ndarray:
    """|Pearson| between ``u`` and every column of ``sub``."""
    du = u - u.mean()
    nu = np.linalg.norm(du)
    if nu == 0.0:
        raise DegenerateColumnError("measured values are constant")
    dc = sub - sub.mean(axis=0, keepdims=True)
    nc = np.linalg.norm(dc, axis=0)
    dead = np.flatnonzero(nc == 0.0)
    if dead.size:
        raise DegenerateColumnError(
            f"columns {dead.tolist()} are constant on the measured configurations"
        )
    return np.abs(dc.T @ du) / (nc * nu)


def match_factor(
    r_hat: np.ndarray, meas: FactorMeasurement
) -> tuple[int, float, float]:
    """Column of ``r_hat`` best matching one measured factor.

    Returns (column index, |Pearson|, least-squares scale); the scale may
    be negative.
    """
    r_hat = np.asarray(r_hat, dtype=float)
    if len(meas.values) < 3:
        raise ValueError("need at least three measured configurations to correlate")
    if meas.config_indices.max() >= r_hat.shape[0]:
        raise ValueError("config index beyond the number of observations")
    sub = r_hat[meas.config_indices]
    rho_vec = _abs_pearson_columns(sub, meas.values)
    s = int(np.argmax(rho_vec))
    x = sub[:, s]
    scale = float(x @ meas.values) / float(x @ x)
    return s, float(rho_vec[s]), scale


def match_factors(
    r_hat: np.ndarray, measurements: list[FactorMeasurement]
) -> list[FactorMatch]:
    """Jointly assign measured factors to columns, maximizing total |rho|."""
    if not measurements:
        raise ValueError("measurements must be non-empty")
    r_hat = np.asarray(r_hat, dtype=float)
    p = r_hat.shape[1]
    rho = np.zeros((len(measurements), p))
    for k, meas in enumerate(measurements):
        if len(meas.values) < 3:
            raise ValueError("need at least three measured configurations to correlate")
        if meas.config_indices.max() >= r_hat.shape[0]:
            raise ValueError("config index beyond the number of observations")
        rho[k] = _abs_pearson_columns(r_hat[meas.config_indices], meas.values)
    rows, cols = linear_sum_assignment(-rho)
    out = []
    for k, s in sorted(zip(rows.tolist(), cols.tolist())):
        meas = measurements[k]
        x = r_hat[meas.config_indices][:, s]
        scale = float(x @ meas.values) / float(x @ x)
        out.append(FactorMatch(label=meas.label, column=int(s),
                               rho=float(rho[k, s]), scale=scale))
    return out


def hypergeom_log_tail(
    population: int, set_a: int, set_b: int, overlap: int
) -> float:
    """log Pr(X >= overlap) for X hypergeometric(population, set_a, set_b).

    Exact summation of the tail in log space via log-gamma; never positive.
    """
    if min(population, set_a, set_b, overlap) < 0:
        raise ValueError("all arguments must be non-negative")
    if max(set_a, set_b) > population:
        raise ValueError("set sizes cannot exceed the population")
    if overlap > min(set_a, set_b):
        raise ValueError("overlap cannot exceed the smaller set")

    lower = max(0, set_a + set_b - population)
    if overlap <= lower:
        return 0.0

    def log_comb(nn: int, kk: np.ndarray) -> np.ndarray:
        return gammaln(nn + 1) - gammaln(kk + 1) - gammaln(nn - kk + 1)

    k = np.arange(overlap, min(set_a, set_b) + 1)
    log_pmf = (
        log_comb(set_a, k)
        + log_comb(population - set_a, set_b - k)
        - log_comb(population, np.array([set_b]))
    )
    return float(min(logsumexp(log_pmf), 0.0))


@dataclass(frozen=True)
class OverlapRecord:
    regulator: int
    set_name: str
    test: OverlapTest


def set_overlap_report(
    supports: tuple[np.ndarray, ...] | list[np.ndarray],
    prior_sets: dict[str, set[int]],
    population: int,
) -> tuple[list[OverlapRecord], list[tuple[int, str]]]:
    """Score every (inferred support, prior set) pair by hypergeometric
    tail. Returns records sorted by ascending log p-value plus the
    one-to-one assignment minimizing total log p-value."""
    members = [set(int(x) for x in s) for s in supports]
    for i, s in enumerate(members):
        if s and max(s) >= population:
            raise ValueError(f"support {i} has indices beyond the population")
    for name, s in prior_sets.items():
        if s and max(s) >= population:
            raise ValueError(f"prior set {name!r} has indices beyond the population")

    names = sorted(prior_sets)
    records = []
    logp = np.zeros((len(members), len(names)))
    for i, supp in enumerate(members):
        for j, name in enumerate(names):
            prior = prior_sets[name]
            ov = len(supp & prior)
            lp = hypergeom_log_tail(population, len(supp), len(prior), ov)
            logp[i, j] = lp
            records.append(
                OverlapRecord(
                    regulator=i,
                    set_name=name,
                    test=OverlapTest(
                        population=population,
                        set_a_size=len(supp),
                        set_b_size=len(prior),
                        overlap=ov,
                        log_pval=lp,
                    ),
                )
            )
    records.sort(key=lambda r: (r.test.log_pval, r.regulator, r.set_name))
    assignment: list[tuple[int, str]] = []
    if members and names:
        rows, cols = linear_sum_assignment(logp)
        assignment = [
            (int(i), names[int(j)]) for i, j in sorted(zip(rows.tolist(), cols.tolist()))
        ]
    return records, assignment
