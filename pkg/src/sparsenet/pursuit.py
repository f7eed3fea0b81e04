"""Greedy null-space pursuit for a sparsifying basis rotation.

Given a matrix ``v`` with orthonormal columns, each pursuit finds a unit
vector ``b`` such that ``v @ b`` has few nonzero entries: rows of ``v`` are
removed one at a time (the retained submatrix is tracked through its inverse
Gram, maintained by rank-one downdates) until the retained rows lose column
rank, at which point ``b`` is their null direction.

Two removal guides run per column and the sparser result wins:

* an eigen-tracked peel, where the direction is re-derived every cycle as
  the dominant eigenvector of the inverse Gram (warm-started, with the row
  of largest projection removed each cycle), and
* a held-direction peel along the best candidate direction found by
  sampling null vectors of row subsets and refining them with reweighted
  least squares; this guide is what survives dense loadings, where the
  eigen feedback blurs into a mixture of several planted directions.

Columns found earlier are kept out of the search by inflating the working
matrix with their outer products for the first cycles of each subsequent
pursuit, and by a correlation filter on candidate directions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import combinations
from math import comb

import numpy as np

from .linalg import (
    SingularGramError,
    fix_sign,
    gram_inverse,
    gram_remove_row,
    largest_eigvec,
)

_CANDIDATE_SEED = 0x5EEDBA5E
_NULL_SAMPLE_DRAWS = 12000
_IRLS_ITERS = 30
_IRLS_EPS_FLOOR = 1e-10
_POLISH_TOP = 8
_ROW_STARTS_CAP = 32
# candidates this correlated with an accepted column are rediscoveries, not
# new directions; far looser than epsilon_dup, which must tolerate noisy
# twins of the same planted direction
_FRESH_MAX_CORR = 0.8


class RankDeficientBasisError(RuntimeError):
    """The accepted basis columns are numerically linearly dependent."""


class GramDriftError(AssertionError):
    """The maintained inverse Gram drifted away from direct recomputation."""


@dataclass(frozen=True)
class PursuitConfig:
    """Tolerances and switches controlling the pursuit.

    tau_sing      singularity threshold for the retained Gram (detects the
                  convergence event)
    tau_conv      cross-cycle stability threshold: stop when consecutive
                  directions satisfy |<v_J, v_{J-1}>| >= 1 - tau_conv
    k_switch      cycles run on the inflated matrix before the pursuit
                  switches back to the plain one
    epsilon_dup   two columns are duplicates when their images under v have
                  |Pearson| >= 1 - epsilon_dup
    zero_tol      entries of v @ b below zero_tol * max|v @ b| count as zero
    max_restarts  duplicate candidates are re-pursued this many times with a
                  doubled k_switch before being dropped
    switch_mode   "fixed_k" switches after k_switch cycles; "correlation"
                  switches once the candidate direction decorrelates from
                  all previous columns
    check_gram    every 10th cycle, verify the maintained inverse Gram
                  against direct recomputation (1e-8 relative)
    """

    tau_sing: float = 1e-10
    tau_conv: float = 1e-12
    k_switch: int = 10
    epsilon_dup: float = 0.01
    zero_tol: float = 1e-8
    max_restarts: int = 3
    switch_mode: str = "fixed_k"
    check_gram: bool = False

    def __post_init__(self) -> None:
        if min(self.tau_sing, self.tau_conv, self.zero_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.k_switch < 1:
            raise ValueError("k_switch must be at least 1")
        if not 0 < self.epsilon_dup < 1:
            raise ValueError("epsilon_dup must be in (0, 1)")
        if self.max_restarts < 0:
            raise ValueError("max_restarts must be non-negative")
        if self.switch_mode not in ("fixed_k", "correlation"):
            raise ValueError(f"unknown switch_mode {self.switch_mode!r}")


@dataclass(frozen=True)
class ColumnSolution:
    """One inferred basis column with its pursuit diagnostics.

    vector             unit column b
    support            indices where |v @ b| exceeds the zero threshold
    smallest_singular  smallest singular value of the final retained rows
    cycles             number of row removals performed
    removed            removal order (the allowed-nonzero index set)
    """

    vector: np.ndarray
    support: np.ndarray
    smallest_singular: float
    cycles: int
    removed: tuple[int, ...]


@dataclass(frozen=True)
class BasisMatrix:
    """Accepted basis columns plus the count of dropped duplicates."""

    columns: tuple[ColumnSolution, ...]
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.columns)

    @property
    def matrix(self) -> np.ndarray:
        if not self.columns:
            raise ValueError("basis has no columns")
        return np.column_stack([c.vector for c in self.columns])


def _abs_pearson(a: np.ndarray, b: np.ndarray) -> float:
    """|Pearson correlation|; constant vectors correlate only with constant
    vectors."""
    da = a - a.mean()
    db = b - b.mean()
    na = np.linalg.norm(da)
    nb = np.linalg.norm(db)
    if na == 0.0 or nb == 0.0:
        return 1.0 if na == nb else 0.0
    return abs(float(da @ db)) / (na * nb)


def _l1_ratio(image: np.ndarray) -> float:
    """l1/l2 of a column image; lower means more concentrated (sparser)."""
    nrm = np.linalg.norm(image)
    if nrm == 0.0:
        return np.inf
    return float(np.abs(image).sum() / nrm)


def _sparsity_key(
    image: np.ndarray, zero_tol: float, trivial_count: int
) -> tuple[int, float]:
    """Lexicographic sparsity score: thresholded nonzero count, then l1/l2.

    The count is the actual objective and separates exact solutions. Any
    count at or above ``trivial_count`` (the n - p + 1 nonzeros every null
    vector of p - 1 rows achieves) carries no sparse structure, so those
    are collapsed into a tie and the ratio decides; the ratio also breaks
    ties when noise makes every entry technically nonzero.
    """
    amax = np.abs(image).max(initial=0.0)
    if amax == 0.0:
        return (trivial_count, np.inf)
    count = int((np.abs(image) > zero_tol * amax).sum())
    return (min(count, trivial_count), _l1_ratio(image))


def _irls_direction(v: np.ndarray, b0: np.ndarray, iters: int = _IRLS_ITERS) -> np.ndarray:
    """Descend ||v @ b||_1 over unit b by reweighted smallest eigenvectors."""
    b = b0 / np.linalg.norm(b0)
    eps = 1.0
    for _ in range(iters):
        image = v @ b
        eps = max(0.5 * eps, _IRLS_EPS_FLOOR)
        w = 1.0 / np.sqrt(np.abs(image) + eps)
        vw = v * w[:, None]
        _, vecs = np.linalg.eigh(vw.T @ vw)
        b_new = np.ascontiguousarray(vecs[:, 0])
        if float(b_new @ b) < 0:
            b_new = -b_new
        if abs(float(b_new @ b)) >= 1.0 - 1e-14:
            return b_new
        b = b_new
    return b


def _sampled_null_directions(v: np.ndarray, rng: np.random.Generator) -> list[np.ndarray]:
    """Null vectors of (p-1)-row subsets; exact dual directions whenever the
    drawn rows all lie outside one planted support."""
    n, p = v.shape
    if p == 1:
        return [np.ones(1)]
    out: list[np.ndarray] = []
    if comb(n, p - 1) <= _NULL_SAMPLE_DRAWS:
        subsets = combinations(range(n), p - 1)
        picks = [np.array(rows, dtype=int) for rows in subsets]
    else:
        picks = [rng.choice(n, size=p - 1, replace=False) for _ in range(_NULL_SAMPLE_DRAWS)]
    for rows in picks:
        sub = v[rows]
        _, vecs = np.linalg.eigh(sub.T @ sub)
        out.append(np.ascontiguousarray(vecs[:, 0]))
    return out


def _candidate_pool(v: np.ndarray, salt: int = 0) -> list[np.ndarray]:
    """Direction candidates: sampled null vectors of row subsets plus
    reweighted refinements of the most loaded rows. Pure function of
    ``(v, salt)``; restarts vary the salt to redraw the samples."""
    n, p = v.shape
    rng = np.random.default_rng(_CANDIDATE_SEED + salt)
    pool = _sampled_null_directions(v, rng)
    row_order = np.argsort(-np.abs(v).sum(axis=1), kind="stable")
    for row in row_order[: min(max(2 * p, 8), _ROW_STARTS_CAP, n)]:
        pool.append(_irls_direction(v, v[row]))
    return pool


def _candidate_shortlist(
    v: np.ndarray,
    previous: tuple[np.ndarray, ...],
    previous_images: list[np.ndarray],
    pool: list[np.ndarray],
    zero_tol: float,
) -> list[np.ndarray]:
    """Fresh directions worth a guided peel, best pool candidate first.

    When only one or two directions are missing from the basis, the
    orthocomplement of the found columns points almost straight at them and
    is appended to the shortlist.
    """
    n, p = v.shape
    trivial = n - p + 1
    span_q: np.ndarray | None = None
    if previous:
        span_q, _ = np.linalg.qr(np.column_stack(previous))

    def is_fresh(b: np.ndarray) -> bool:
        # mixtures of already-found columns can look sparse (union supports
        # with exact zeros on the common complement) while carrying nothing
        # new; reject anything nearly inside their span
        if span_q is not None:
            resid = b - span_q @ (span_q.T @ b)
            if np.linalg.norm(resid) <= 1e-6:
                return False
        image = v @ b
        return all(
            _abs_pearson(image, old) < _FRESH_MAX_CORR for old in previous_images
        )

    scored = sorted(
        ((_sparsity_key(v @ b, zero_tol, trivial), i, b) for i, b in enumerate(pool)),
        key=lambda t: (t[0], t[1]),
    )
    best: tuple[tuple[int, float], np.ndarray] | None = None
    inspected = 0
    for key, _, b in scored:
        if not is_fresh(b):
            continue
        if best is None or key < best[0]:
            best = (key, b)
        # refinement is kept only when it improves the objective and stays
        # fresh; it widens the reach of near-hits in the pool
        polished = _irls_direction(v, b)
        pkey = _sparsity_key(v @ polished, zero_tol, trivial)
        if pkey < best[0] and is_fresh(polished):
            best = (pkey, polished)
        inspected += 1
        if inspected >= _POLISH_TOP:
            break

    shortlist: list[np.ndarray] = []
    if best is not None:
        shortlist.append(best[1])
    free_dims = p - len(previous)
    if previous and 1 <= free_dims <= 2:
        gaps = np.eye(p) - span_q @ span_q.T
        w, q = np.linalg.eigh(gaps)
        for j in range(p - free_dims, p):
            completion = fix_sign(np.ascontiguousarray(q[:, j]))
            if is_fresh(completion):
                shortlist.append(completion)
    return shortlist


def _finalize(
    v: np.ndarray,
    retained: np.ndarray,
    removed: list[int],
    cycles: int,
    cfg: PursuitConfig,
) -> ColumnSolution:
    """Extract the null direction of the retained rows of the plain matrix.

    The final column is always taken from ``v`` (not the inflated working
    copy) so that it is optimal for the matrix actually being decomposed.
    """
    v0 = v[retained]
    gram = v0.T @ v0
    w, q = np.linalg.eigh(gram)
    b = fix_sign(np.ascontiguousarray(q[:, 0]))
    smallest = float(np.sqrt(max(w[0], 0.0)))
    image = v @ b
    thresh = cfg.zero_tol * np.abs(image).max()
    support = np.flatnonzero(np.abs(image) > thresh)
    return ColumnSolution(
        vector=b,
        support=support,
        smallest_singular=smallest,
        cycles=cycles,
        removed=tuple(removed),
    )


def _check_gram_drift(k_inv: np.ndarray, rows: np.ndarray, tau_sing: float) -> None:
    direct = gram_inverse(rows, tau_sing=tau_sing)
    rel = np.linalg.norm(k_inv - direct) / np.linalg.norm(direct)
    if rel > 1e-8:
        raise GramDriftError(f"inverse Gram drift {rel:.3e} exceeds 1e-8")


def _peel(
    v: np.ndarray,
    working: np.ndarray,
    cfg: PursuitConfig,
    previous: tuple[np.ndarray, ...],
    held: np.ndarray | None,
) -> ColumnSolution:
    """Shared removal loop.

    With ``held=None`` the direction is the dominant eigenvector of the
    maintained inverse Gram, recomputed (warm-started) every cycle;
    otherwise the supplied direction guides every removal unchanged. Stops
    on the singularity event, on a numerically zero smallest singular
    value, on cross-cycle direction stability, or after n - p + 1 removals,
    whichever comes first.
    """
    n, p = v.shape
    budget = n - p + 1
    plain = working is v or np.array_equal(working, v)
    w_mat = working
    # the eigenvalue test scales with the working Gram so a rescaled working
    # copy follows the identical removal sequence
    gram_scale = max(float(np.einsum("ij,ij->", w_mat, w_mat)) / p, np.finfo(float).tiny)
    kinv_tau = cfg.tau_sing * gram_scale

    first = int(np.argmax(np.abs(w_mat).sum(axis=1)))
    retained = np.ones(n, dtype=bool)
    retained[first] = False
    removed = [first]
    cycles = 1

    full_inv = gram_inverse(w_mat, tau_sing=kinv_tau)
    k_inv = gram_remove_row(full_inv, w_mat[first], tau_sing=cfg.tau_sing)
    if k_inv is None:
        return _finalize(v, retained, removed, cycles, cfg)

    switched = plain
    if held is None:
        lam, vec = largest_eigvec(k_inv)
        settled = True
    else:
        vec = held / np.linalg.norm(held)
        lam, settled = _rayleigh(k_inv, vec)
    prev_vec: np.ndarray | None = None
    prev_rho: float | None = None

    while True:
        if cycles >= budget:
            # counting bound: fewer retained rows than columns, necessarily
            # rank-deficient
            return _finalize(v, retained, removed, cycles, cfg)

        if cfg.check_gram and cycles % 10 == 0:
            _check_gram_drift(k_inv, w_mat[retained], cfg.tau_sing)

        if lam > 0.0 and 1.0 / lam <= kinv_tau:
            # smallest singular value of the retained rows is numerically zero
            return _finalize(v, retained, removed, cycles, cfg)
        if (
            settled
            and prev_vec is not None
            and abs(float(vec @ prev_vec)) >= 1.0 - cfg.tau_conv
        ):
            return _finalize(v, retained, removed, cycles, cfg)

        do_switch = False
        if not switched:
            if cfg.switch_mode == "fixed_k":
                do_switch = cycles >= cfg.k_switch
            elif previous:
                rho = max(_abs_pearson(vec, b_old) for b_old in previous)
                do_switch = (
                    rho < 1.0 - cfg.epsilon_dup
                    and prev_rho is not None
                    and rho < prev_rho
                )
                prev_rho = rho
        if do_switch:
            switched = True
            w_mat = v
            gram_scale = 1.0
            kinv_tau = cfg.tau_sing
            try:
                k_inv = gram_inverse(v[retained], tau_sing=cfg.tau_sing)
            except SingularGramError:
                return _finalize(v, retained, removed, cycles, cfg)
            if held is None:
                lam, vec = largest_eigvec(k_inv, warm_start=vec)
            else:
                lam, settled = _rayleigh(k_inv, vec)

        # left singular vector of the retained rows for the current
        # direction; its largest component marks the row that most
        # obstructs the null space
        u = w_mat[retained] @ vec
        local = int(np.argmax(np.abs(u)))
        pick = int(np.flatnonzero(retained)[local])

        retained[pick] = False
        removed.append(pick)
        cycles += 1

        k_next = gram_remove_row(k_inv, w_mat[pick], tau_sing=cfg.tau_sing)
        if k_next is None:
            # the reduced Gram is singular: convergence event
            return _finalize(v, retained, removed, cycles, cfg)
        k_inv = k_next
        prev_vec = vec
        if held is None:
            lam, vec = largest_eigvec(k_inv, warm_start=vec)
            settled = True
        else:
            lam, settled = _rayleigh(k_inv, vec)


def _rayleigh(k_inv: np.ndarray, vec: np.ndarray) -> tuple[float, bool]:
    """Rayleigh quotient and whether ``vec`` is already an eigenvector.

    The quotient never exceeds the dominant eigenvalue, so a singularity
    verdict based on it is conservative."""
    y = k_inv @ vec
    lam = float(vec @ y)
    settled = bool(
        np.linalg.norm(y - lam * vec) <= 1e-9 * max(abs(lam), np.finfo(float).tiny)
    )
    return lam, settled


def pursue_column(
    v: np.ndarray,
    working: np.ndarray,
    cfg: PursuitConfig = PursuitConfig(),
    previous: tuple[np.ndarray, ...] = (),
    pool: list[np.ndarray] | None = None,
) -> ColumnSolution:
    """Run one pursuit and return the sparsest converged column.

    ``working`` is the matrix removal decisions are made on (equal to ``v``
    for the first column, inflated otherwise); ``previous`` supplies the
    already-found columns for candidate filtering and the "correlation"
    switch monitor; ``pool`` lets callers reuse the candidate directions
    across columns (it is a pure function of ``v``). Both removal guides
    are run; the result whose image has the smaller l1/l2 wins, the
    eigen-tracked one on ties. Terminates after at most ``n - p + 1``
    removals.
    """
    v = np.asarray(v, dtype=float)
    working = np.asarray(working, dtype=float)
    if v.ndim != 2:
        raise ValueError("v must be a 2-d matrix")
    n, p = v.shape
    if working.shape != v.shape:
        raise ValueError(f"working shape {working.shape} != v shape {v.shape}")
    if n <= p:
        raise ValueError(f"need more rows than columns, got {n} x {p}")

    tracked = _peel(v, working, cfg, previous, held=None)
    if pool is None:
        pool = _candidate_pool(v)
    previous_images = [v @ b for b in previous]
    shortlist = _candidate_shortlist(v, previous, previous_images, pool, cfg.zero_tol)
    if not shortlist:
        return tracked
    trivial = n - p + 1

    def key_of(sol: ColumnSolution) -> tuple[int, float]:
        return _sparsity_key(v @ sol.vector, cfg.zero_tol, trivial)

    guided: ColumnSolution | None = None
    for direction in shortlist:
        peeled = _peel(v, working, cfg, previous, held=direction)
        if guided is None or key_of(peeled) < key_of(guided):
            guided = peeled

    def rediscovers(sol: ColumnSolution) -> bool:
        image = v @ sol.vector
        return any(
            _abs_pearson(image, old) >= 1.0 - cfg.epsilon_dup
            for old in previous_images
        )

    # a fresh direction beats a rediscovered one outright; otherwise the
    # guided result wins only on a strictly smaller nonzero count, since at
    # count ties (noise leaves no exact zeros) the eigen-tracked dynamics
    # are the better-behaved guide
    if rediscovers(tracked) and not rediscovers(guided):
        return guided
    if key_of(guided)[0] < key_of(tracked)[0]:
        return guided
    return tracked


def inflate(v: np.ndarray, previous: BasisMatrix) -> np.ndarray:
    """Working copy of ``v`` with previously found columns amplified.

    Adds ``(v @ b) b^T`` for every previous column ``b``; rows outside a
    column's support are untouched by its term.
    """
    if not previous.columns:
        raise ValueError("previous basis must be non-empty")
    v = np.asarray(v, dtype=float)
    out = v.copy()
    for col in previous.columns:
        b = col.vector
        if b.shape != (v.shape[1],):
            raise ValueError(
                f"column length {b.shape[0]} does not match {v.shape[1]} basis dims"
            )
        out += np.outer(v @ b, b)
    return out


def solve_basis(
    v: np.ndarray, p_star: int, cfg: PursuitConfig = PursuitConfig()
) -> BasisMatrix:
    """Pursue up to ``p_star`` basis columns, rejecting duplicates.

    Column 1 is pursued on ``v`` directly; later columns start on the
    inflated matrix. A candidate whose image correlates with an accepted
    column at |Pearson| >= 1 - epsilon_dup is re-pursued with a doubled
    k_switch, up to max_restarts times, then dropped.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 2:
        raise ValueError("v must be a 2-d matrix")
    n, p = v.shape
    if p != p_star:
        raise ValueError(f"v has {p} columns but p_star={p_star}")
    if n <= p_star:
        raise ValueError(f"need more rows than columns, got {n} x {p}")
    ortho_dev = np.abs(v.T @ v - np.eye(p)).max()
    if ortho_dev > 1e-8:
        raise ValueError(f"v columns are not orthonormal (deviation {ortho_dev:.3e})")

    pool = _candidate_pool(v)
    accepted: list[ColumnSolution] = []
    images: list[np.ndarray] = []
    dropped = 0
    for i in range(p_star):
        working = v if i == 0 else inflate(v, BasisMatrix(tuple(accepted)))
        prev_vecs = tuple(c.vector for c in accepted)
        k_switch = cfg.k_switch
        solution: ColumnSolution | None = None
        for attempt in range(cfg.max_restarts + 1):
            trial_cfg = replace(cfg, k_switch=k_switch)
            # a restart both doubles k_switch and redraws the candidate pool
            trial_pool = pool if attempt == 0 else _candidate_pool(v, salt=attempt)
            candidate = pursue_column(
                v, working, trial_cfg, previous=prev_vecs, pool=trial_pool
            )
            image = v @ candidate.vector
            fresh = all(
                _abs_pearson(image, old) < 1.0 - cfg.epsilon_dup for old in images
            )
            if fresh and accepted:
                # pairwise decorrelated columns can still be linear
                # combinations of earlier ones; keep the basis invertible
                stacked = np.column_stack(
                    [c.vector for c in accepted] + [candidate.vector]
                )
                fresh = np.linalg.svd(stacked, compute_uv=False)[-1] > cfg.tau_sing
            if fresh:
                solution = candidate
                break
            k_switch *= 2
        if solution is None:
            dropped += 1
            continue
        accepted.append(solution)
        images.append(v @ solution.vector)

    basis = BasisMatrix(columns=tuple(accepted), dropped=dropped)
    if accepted:
        smin = np.linalg.svd(basis.matrix, compute_uv=False)[-1]
        if smin <= cfg.tau_sing:
            raise RankDeficientBasisError(
                f"basis smallest singular value {smin:.3e} below {cfg.tau_sing:.1e}"
            )
    return basis
