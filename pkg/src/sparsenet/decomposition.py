"""End-to-end inference: data matrix -> (activities, sparse adjacency).

Runs the truncated SVD, solves for the sparsifying basis, assembles the
factor pair, discards regulators that carry no data mass, and thresholds
the adjacency. The assembled pair reproduces the truncated reconstruction:
``r_hat @ c_hat ~ u diag(s) v^T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import TruncatedSvd, truncated_svd
from .pursuit import BasisMatrix, PursuitConfig, solve_basis

PRUNE_TOL = 1e-10


class InferenceError(RuntimeError):
    """The decomposition could not produce a usable factor pair."""


@dataclass(frozen=True)
class ObjectiveParams:
    """Sparsity weight for the penalized reconstruction objective."""

    lam: float = 0.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError("lam must be finite and non-negative")


@dataclass(frozen=True)
class Factorization:
    """Inferred activities and weighted adjacency with diagnostics.

    r_hat         (m, p) hidden-variable configurations
    c_hat         (p, n) weighted adjacency, small entries zeroed
    support       per-row nonzero index arrays of c_hat
    residual_fro  Frobenius norm of g - r_hat @ c_hat
    pruned        regulators discarded (zero singular directions, near-zero
                  basis columns, empty adjacency rows)
    dropped       duplicate pursuit candidates dropped before assembly
    basis         accepted basis columns
    svd           the truncated SVD the basis was solved on
    """

    r_hat: np.ndarray
    c_hat: np.ndarray
    support: tuple[np.ndarray, ...]
    residual_fro: float
    pruned: int
    dropped: int
    basis: BasisMatrix
    svd: TruncatedSvd

    @property
    def p_inferred(self) -> int:
        return self.c_hat.shape[0]

    @property
    def nnz(self) -> int:
        return int(sum(len(s) for s in self.support))


def prune_regulators(
    b_mat: np.ndarray,
    r_hat: np.ndarray,
    c_hat: np.ndarray,
    zero_tol: float = 1e-8,
    prune_tol: float = PRUNE_TOL,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Drop regulators that carry nothing: basis columns with every entry
    at or below ``prune_tol``, and adjacency rows that vanish entirely
    under the zero threshold.

    Returns (kept indices, pruned r_hat, pruned c_hat).
    """
    p = b_mat.shape[1]
    keep = []
    for j in range(p):
        if np.abs(b_mat[:, j]).max() <= prune_tol:
            continue
        row = c_hat[j]
        amax = np.abs(row).max()
        if amax == 0.0 or not (np.abs(row) > zero_tol * amax).any():
            continue
        keep.append(j)
    if not keep:
        raise InferenceError("pruning removed every regulator")
    kept = np.array(keep, dtype=int)
    return kept, r_hat[:, kept], c_hat[kept]


def infer_network(
    g: np.ndarray, p_star: int, cfg: PursuitConfig = PursuitConfig()
) -> Factorization:
    """Infer a sparse factor pair from a data matrix.

    Singular directions whose values vanish relative to the largest (below
    ``cfg.tau_sing``) are cut before the pursuit: they carry no data mass
    and correspond to the excess regulators that an overshot ``p_star``
    introduces. Remaining regulators are pruned after assembly, and
    adjacency entries below the per-row zero threshold are set to exact
    zero.
    """
    g = np.asarray(g, dtype=float)
    if g.ndim != 2:
        raise ValueError("g must be a 2-d matrix")
    m, n = g.shape
    if m < 2:
        raise ValueError("need at least two observation rows")
    if not 1 <= p_star < n:
        raise ValueError(f"p_star must be in [1, {n - 1}], got {p_star}")

    svd = truncated_svd(g, p_star)
    if svd.s[0] <= 0.0:
        raise InferenceError("data matrix is zero")
    mass = svd.s > cfg.tau_sing * svd.s[0]
    rank_culled = int(p_star - mass.sum())
    u = svd.u[:, mass]
    s = svd.s[mass]
    v = svd.v[:, mass]
    p_eff = int(mass.sum())
    if n <= p_eff:
        raise ValueError(f"p_star={p_star} leaves no rows to sparsify against")

    basis = solve_basis(v, p_eff, cfg)
    if not basis.columns:
        raise InferenceError("no basis columns were accepted")
    b_mat = basis.matrix

    c_raw = (v @ b_mat).T
    r_hat = (u * s) @ np.linalg.pinv(b_mat.T)

    kept, r_hat, c_hat = prune_regulators(b_mat, r_hat, c_raw, zero_tol=cfg.zero_tol)
    pruned = rank_culled + (b_mat.shape[1] - len(kept))

    c_hat = c_hat.copy()
    support: list[np.ndarray] = []
    for i in range(c_hat.shape[0]):
        row = c_hat[i]
        thresh = cfg.zero_tol * np.abs(row).max()
        row[np.abs(row) <= thresh] = 0.0
        support.append(np.flatnonzero(row))

    residual = float(np.linalg.norm(g - r_hat @ c_hat))
    return Factorization(
        r_hat=r_hat,
        c_hat=c_hat,
        support=tuple(support),
        residual_fro=residual,
        pruned=pruned,
        dropped=basis.dropped,
        basis=basis,
        svd=svd,
    )


def objective_value(
    g: np.ndarray,
    r: np.ndarray,
    c: np.ndarray,
    params: ObjectiveParams = ObjectiveParams(),
    zero_tol: float = 1e-8,
) -> float:
    """Penalized reconstruction objective: squared Frobenius error plus
    ``lam`` times the nonzero count of ``c`` (relative to its largest
    entry)."""
    g = np.asarray(g, dtype=float)
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    if r.shape[0] != g.shape[0] or c.shape[1] != g.shape[1] or r.shape[1] != c.shape[0]:
        raise ValueError(
            f"shape mismatch: g {g.shape}, r {r.shape}, c {c.shape}"
        )
    err = float(np.linalg.norm(g - r @ c) ** 2)
    amax = np.abs(c).max(initial=0.0)
    nnz = 0 if amax == 0.0 else int((np.abs(c) > zero_tol * amax).sum())
    return err + params.lam * nnz
