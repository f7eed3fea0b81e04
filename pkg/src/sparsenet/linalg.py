"""Dense linear-algebra kernels for the inference loop.

Truncated SVD, dominant-eigenpair iteration and rank-one downdates of an
inverse Gram matrix. All routines operate on float64 numpy arrays, are pure
functions of their inputs, and fix sign ambiguities deterministically (the
largest-magnitude component of a vector is made positive, ties broken by
lowest index).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SINGULAR_TOL = 1e-10
POWER_ITER_CAP = 10_000
_POWER_START_SEED = 142857


class ConvergenceError(RuntimeError):
    """An iterative kernel failed to reach tolerance within its cap."""


class SingularGramError(RuntimeError):
    """A Gram matrix that must be invertible is numerically singular."""


def fix_sign(vec: np.ndarray) -> np.ndarray:
    """Flip ``vec`` so its largest-magnitude component is positive."""
    if vec.size == 0:
        return vec
    i = int(np.argmax(np.abs(vec)))  # first maximum: lowest index wins ties
    return -vec if vec[i] < 0 else vec


@dataclass(frozen=True)
class TruncatedSvd:
    """Leading singular triplets u, s, v with ``u @ diag(s) @ v.T ~ g``."""

    u: np.ndarray  # (m, p), orthonormal columns
    s: np.ndarray  # (p,), non-negative, descending
    v: np.ndarray  # (n, p), orthonormal columns

    @property
    def rank(self) -> int:
        return self.s.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T


def truncated_svd(g: np.ndarray, p_star: int) -> TruncatedSvd:
    """Best rank-``p_star`` factors of ``g`` in the Frobenius sense.

    The sign of each singular pair is fixed so that the largest-magnitude
    entry of the right vector is positive, which makes the output a pure
    function of the input.
    """
    g = np.asarray(g, dtype=float)
    if g.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got ndim={g.ndim}")
    m, n = g.shape
    if not 1 <= p_star <= min(m, n):
        raise ValueError(f"p_star must be in [1, {min(m, n)}], got {p_star}")
    if not np.all(np.isfinite(g)):
        raise ValueError("matrix contains non-finite entries")

    u_full, s_full, vt_full = np.linalg.svd(g, full_matrices=False)
    u = np.ascontiguousarray(u_full[:, :p_star])
    s = np.ascontiguousarray(s_full[:p_star])
    v = np.ascontiguousarray(vt_full[:p_star].T)
    for j in range(p_star):
        i = int(np.argmax(np.abs(v[:, j])))
        if v[i, j] < 0:
            v[:, j] = -v[:, j]
            u[:, j] = -u[:, j]
    return TruncatedSvd(u=u, s=s, v=v)


def largest_eigvec(
    k: np.ndarray,
    warm_start: np.ndarray | None = None,
    tol: float = 1e-9,
    max_iter: int = POWER_ITER_CAP,
    fallback: bool = True,
) -> tuple[float, np.ndarray]:
    """Dominant eigenpair of a symmetric matrix by warm-started power iteration.

    Returns ``(eigenvalue, unit eigenvector)`` with the residual
    ``|k v - lam v|`` below ``tol * |lam|``. If the iteration cap is hit, the
    pair is recomputed by a full symmetric eigendecomposition unless
    ``fallback`` is off, in which case ConvergenceError is raised.
    """
    k = np.asarray(k, dtype=float)
    p = k.shape[0]
    if k.ndim != 2 or k.shape != (p, p):
        raise ValueError(f"expected a square matrix, got shape {k.shape}")
    if np.abs(k - k.T).max(initial=0.0) > 1e-8 * (1.0 + np.abs(k).max(initial=0.0)):
        raise ValueError("matrix is not symmetric")

    if warm_start is not None and np.linalg.norm(warm_start) > 0:
        x = warm_start / np.linalg.norm(warm_start)
    else:
        x = np.random.default_rng(_POWER_START_SEED).standard_normal(p)
        x /= np.linalg.norm(x)

    for _ in range(max_iter):
        y = k @ x
        lam = float(x @ y)
        if np.linalg.norm(y - lam * x) <= tol * max(abs(lam), np.finfo(float).tiny):
            return lam, fix_sign(x)
        ny = np.linalg.norm(y)
        if ny == 0.0:  # k annihilates x: x is an exact eigenvector for 0
            return 0.0, fix_sign(x)
        x = y / ny

    if not fallback:
        raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")
    w, q = np.linalg.eigh(k)
    i = int(np.argmax(np.abs(w)))
    return float(w[i]), fix_sign(q[:, i])


def gram_remove_row(
    k_inv: np.ndarray, row: np.ndarray, tau_sing: float = SINGULAR_TOL
) -> np.ndarray | None:
    """Inverse Gram after deleting ``row`` from the underlying matrix.

    Sherman-Morrison downdate: with ``A = k_inv^-1`` the result is
    ``(A - row row^T)^-1``. Returns None when the downdate denominator
    ``1 - row^T k_inv row`` falls to ``tau_sing`` or below, meaning the
    reduced Gram is singular; for the pursuit this is the convergence
    event, not a failure.
    """
    c = k_inv @ row
    denom = 1.0 - float(row @ c)
    if denom <= tau_sing:
        return None
    out = k_inv + np.outer(c, c) / denom
    return 0.5 * (out + out.T)  # re-symmetrize against roundoff drift


def gram_inverse(v_sub: np.ndarray, tau_sing: float = SINGULAR_TOL) -> np.ndarray:
    """Inverse of ``v_sub.T @ v_sub`` via symmetric eigendecomposition.

    Raises SingularGramError when the smallest Gram eigenvalue is at or
    below ``tau_sing``.
    """
    v_sub = np.asarray(v_sub, dtype=float)
    gram = v_sub.T @ v_sub
    w, q = np.linalg.eigh(gram)
    if w[0] <= tau_sing:
        raise SingularGramError(
            f"Gram matrix is singular (smallest eigenvalue {w[0]:.3e})"
        )
    out = (q / w) @ q.T
    return 0.5 * (out + out.T)
