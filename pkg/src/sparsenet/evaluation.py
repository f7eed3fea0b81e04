"""Scoring of inferred networks against gold standards.

Inference can only recover the adjacency up to row permutation and row
scaling, so accuracy is measured on absolute Pearson correlations between
optimally matched rows: rows are normalized, the full correlation matrix
is formed, and an exact assignment maximizes the total |correlation|. The
mean over matched rows is the headline accuracy. A benchmark harness
sweeps one generation parameter and scores every (value, seed) cell.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .decomposition import infer_network
from .netsim import NetworkModel, gen_poisson_network, gen_powerlaw_network, simulate_data
from .pursuit import PursuitConfig

SWEEP_AXES = ("P", "M", "N", "noise", "degree")


class DegenerateRowError(ValueError):
    """A row with zero variance cannot be normalized."""

    def __init__(self, row: int):
        super().__init__(f"row {row} is constant (zero variance)")
        self.row = row


@dataclass(frozen=True)
class MatchResult:
    """One-to-one correspondence between inferred and gold rows.

    pairs       (inferred row, gold row) index pairs
    rho         |Pearson| per pair
    rho_bar     mean accuracy; constant inferred rows are excluded from the
                matching but still count against the mean with rho = 0
    scale       per-pair least-squares factor taking the inferred row to
                the gold row (may be negative)
    p_inferred  number of inferred rows scored
    """

    pairs: tuple[tuple[int, int], ...]
    rho: np.ndarray
    rho_bar: float
    scale: np.ndarray | None
    p_inferred: int


@dataclass(frozen=True)
class EdgeMetrics:
    """Support-level precision/recall over matched rows."""

    precision: float
    recall: float
    f1: float


def row_normalize(c: np.ndarray) -> np.ndarray:
    """Rows scaled to mean zero, unit population variance."""
    c = np.asarray(c, dtype=float)
    mu = c.mean(axis=1, keepdims=True)
    sd = c.std(axis=1, keepdims=True)
    for i in np.flatnonzero(sd.ravel() == 0.0):
        raise DegenerateRowError(int(i))
    return (c - mu) / sd


def correlation_matrix(c_inf_nor: np.ndarray, c_gold_nor: np.ndarray) -> np.ndarray:
    """Pearson correlations between every inferred and gold row pair."""
    a = np.asarray(c_inf_nor, dtype=float)
    b = np.asarray(c_gold_nor, dtype=float)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"column mismatch: {a.shape[1]} vs {b.shape[1]}")
    return a @ b.T / a.shape[1]


def match_rows(sigma: np.ndarray) -> MatchResult:
    """Optimal one-to-one matching maximizing total |correlation|."""
    sigma = np.asarray(sigma, dtype=float)
    if not np.all(np.isfinite(sigma)):
        raise ValueError("correlation matrix contains non-finite entries")
    cost = -np.abs(sigma)
    rows, cols = linear_sum_assignment(cost)
    order = np.argsort(rows, kind="stable")
    pairs = tuple((int(rows[k]), int(cols[k])) for k in order)
    rho = np.array([abs(sigma[i, j]) for i, j in pairs])
    rho_bar = float(rho.mean()) if len(pairs) else 0.0
    return MatchResult(
        pairs=pairs,
        rho=rho,
        rho_bar=rho_bar,
        scale=None,
        p_inferred=sigma.shape[0],
    )


def evaluate_rows(c_inf: np.ndarray, c_gold: np.ndarray) -> MatchResult:
    """Full scoring pipeline on raw (unnormalized) adjacency matrices.

    Constant inferred rows are excluded from the matching and score zero;
    per-pair scales are fit by least squares on the raw rows.
    """
    c_inf = np.asarray(c_inf, dtype=float)
    c_gold = np.asarray(c_gold, dtype=float)
    if c_inf.shape[1] != c_gold.shape[1]:
        raise ValueError(f"column mismatch: {c_inf.shape[1]} vs {c_gold.shape[1]}")
    live = np.flatnonzero(c_inf.std(axis=1) > 0.0)
    n_degenerate = c_inf.shape[0] - len(live)
    if len(live) == 0:
        return MatchResult(
            pairs=(),
            rho=np.zeros(0),
            rho_bar=0.0,
            scale=np.zeros(0),
            p_inferred=c_inf.shape[0],
        )
    sigma = correlation_matrix(row_normalize(c_inf[live]), row_normalize(c_gold))
    matched = match_rows(sigma)
    pairs = tuple((int(live[i]), j) for i, j in matched.pairs)
    scale = np.empty(len(pairs))
    for k, (i, j) in enumerate(pairs):
        x = c_inf[i]
        scale[k] = float(x @ c_gold[j]) / float(x @ x)
    rho_bar = float(matched.rho.sum() / (len(pairs) + n_degenerate))
    return MatchResult(
        pairs=pairs,
        rho=matched.rho,
        rho_bar=rho_bar,
        scale=scale,
        p_inferred=c_inf.shape[0],
    )


def edge_metrics(
    match: MatchResult,
    support_inf: tuple[np.ndarray, ...] | list[np.ndarray],
    support_gold: tuple[frozenset[int], ...] | list[frozenset[int]],
) -> EdgeMetrics:
    """Pooled precision/recall of inferred edge sets over matched rows."""
    tp = 0
    n_inf = 0
    n_gold = 0
    for i, j in match.pairs:
        inf_set = set(int(x) for x in support_inf[i])
        gold_set = set(support_gold[j])
        tp += len(inf_set & gold_set)
        n_inf += len(inf_set)
        n_gold += len(gold_set)
    precision = tp / n_inf if n_inf else 0.0
    recall = tp / n_gold if n_gold else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return EdgeMetrics(precision=float(precision), recall=float(recall), f1=float(f1))


@dataclass(frozen=True)
class SweepSettings:
    """Fixed generation/inference parameters for a benchmark sweep."""

    n: int = 200
    p: int = 10
    m: int = 150
    topology: str = "poisson"
    mean_out_degree: float = 20.0
    noise: float = 0.1
    gamma: float = 2.5
    p_star: int | None = None  # defaults to p
    cfg: PursuitConfig = field(default_factory=PursuitConfig)


@dataclass(frozen=True)
class SweepRow:
    axis: str
    value: float
    seed: int
    rho_bar: float
    f1: float
    p_inferred: int
    seconds: float


@dataclass(frozen=True)
class SweepAggregate:
    axis: str
    value: float
    mean_rho: float
    std_rho: float
    n_seeds: int


def _apply_axis(base: SweepSettings, axis: str, value: float) -> SweepSettings:
    if axis == "P":
        return replace(base, p=int(value))
    if axis == "M":
        return replace(base, m=int(value))
    if axis == "N":
        return replace(base, n=int(value))
    if axis == "noise":
        return replace(base, noise=float(value))
    if axis == "degree":
        return replace(base, mean_out_degree=float(value))
    raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")


def run_cell(settings: SweepSettings, seed: int) -> tuple[float, float, int]:
    """Generate, infer and score one (settings, seed) cell."""
    if settings.topology == "poisson":
        net = gen_poisson_network(
            settings.n, settings.p, settings.mean_out_degree, seed
        )
    elif settings.topology.startswith("powerlaw"):
        net = gen_powerlaw_network(
            settings.n, settings.p, settings.mean_out_degree, settings.gamma, seed
        )
    else:
        raise ValueError(f"unknown topology {settings.topology!r}")
    data = simulate_data(net, settings.m, settings.noise, seed)
    p_star = settings.p_star if settings.p_star is not None else settings.p
    fact = infer_network(data.g, p_star, settings.cfg)
    match = evaluate_rows(fact.c_hat, net.to_dense())
    metrics = edge_metrics(match, fact.support, net.supports())
    return match.rho_bar, metrics.f1, fact.p_inferred


def _sweep_cell(args: tuple[SweepSettings, str, float, int]) -> SweepRow:
    base, axis, value, seed = args
    settings = _apply_axis(base, axis, value)
    start = time.perf_counter()
    try:
        rho_bar, f1, p_inf = run_cell(settings, seed)
    except Exception:
        return SweepRow(axis, float(value), seed, float("nan"), float("nan"), 0,
                        time.perf_counter() - start)
    return SweepRow(axis, float(value), seed, rho_bar, f1, p_inf,
                    time.perf_counter() - start)


def benchmark_sweep(
    axis: str,
    grid: list[float],
    base: SweepSettings,
    seeds: list[int],
    jobs: int = 1,
) -> tuple[list[SweepRow], list[SweepAggregate]]:
    """Score every (grid value, seed) cell; failures become NaN rows and the
    sweep continues. Rows come back in deterministic grid-then-seed order
    regardless of worker scheduling."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    if not grid or not seeds:
        raise ValueError("grid and seeds must be non-empty")
    cells = [(base, axis, float(value), int(seed)) for value in grid for seed in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(cell) for cell in cells]
    aggregates = []
    for value in grid:
        scores = np.array(
            [r.rho_bar for r in rows if r.value == float(value)], dtype=float
        )
        good = scores[np.isfinite(scores)]
        aggregates.append(
            SweepAggregate(
                axis=axis,
                value=float(value),
                mean_rho=float(good.mean()) if good.size else float("nan"),
                std_rho=float(good.std()) if good.size else float("nan"),
                n_seeds=int(good.size),
            )
        )
    return rows, aggregates
