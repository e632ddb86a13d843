"""Dense symmetric linear algebra kernel.

Positive-definite inversion, top-k symmetric eigendecomposition, and a dense
SVD oracle used by the verification suites.  All arithmetic is 64-bit; every
routine is a pure function over immutable inputs and safe to call from
multiple threads.

Eigensolver strategy: instances with ``n <= DENSE_EIG_LIMIT`` go through the
dense LAPACK decomposition and are exact; larger instances use a Lanczos
iteration with full reorthogonalization and a fixed-seed start vector, whose
cost scales as O(k n^2) for small k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NoConvergence, NotPositiveDefinite, OracleCapExceeded

# Instances at or below this order are decomposed densely; above it the
# iterative path is used.
DENSE_EIG_LIMIT = 512

# dense_svd is a verification oracle, not a production path; refuse instances
# whose smaller dimension exceeds this cap.  Module-level so callers can
# raise it deliberately.
SVD_ORACLE_CAP = 512

_LANCZOS_SEED = 20260808
_SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class SymEigResult:
    """Top-k eigenpairs of a symmetric matrix.

    ``eigenvalues`` is sorted descending; ``eigenvectors`` has orthonormal
    columns, each with its first largest-magnitude component non-negative.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``M = left @ diag(singular) @ right.T``, singular descending."""

    left: np.ndarray
    singular: np.ndarray
    right: np.ndarray


def _as_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-d, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite values")
    return a


def _require_symmetric(a, name="matrix"):
    a = _as_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if a.shape[0] and float(np.abs(a - a.T).max()) > _SYMMETRY_TOL * scale:
        raise ValueError(f"{name} is not symmetric within {_SYMMETRY_TOL:g}")
    return a


def _fix_column_signs(q):
    """Flip columns so the first largest-magnitude component is non-negative."""
    if q.shape[1] == 0:
        return q
    lead = np.argmax(np.abs(q), axis=0)
    flip = q[lead, np.arange(q.shape[1])] < 0.0
    q[:, flip] *= -1.0
    return q


def sym_inverse(a: np.ndarray) -> np.ndarray:
    """Invert a symmetric positive-definite matrix via Cholesky.

    Raises NotPositiveDefinite when the factorization fails, which for
    regularized Gram matrices signals that the ridge term is too small.
    The result is exactly symmetric.
    """
    a = _require_symmetric(a)
    n = a.shape[0]
    if n == 0:
        raise DimensionMismatch("cannot invert an empty matrix")
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(
            "symmetric factorization failed: matrix is not positive definite; "
            "if this is a regularized Gram matrix, increase lambda"
        ) from exc
    inv = scipy.linalg.cho_solve(factor, np.eye(n), check_finite=False)
    return 0.5 * (inv + inv.T)


def top_k_eig(a: np.ndarray, k: int, tol: float = 1e-9, method: str = "auto") -> SymEigResult:
    """Return the k largest-eigenvalue pairs of a symmetric matrix.

    ``method`` is "auto" (dense at or below DENSE_EIG_LIMIT, Lanczos above),
    "dense", or "lanczos".  The Lanczos path verifies the per-pair residual
    ``||A v - lambda v||_2 <= tol * ||A||_F`` and raises NoConvergence if the
    bound cannot be met; the dense path relies on the backward stability of
    the LAPACK decomposition.
    """
    a = _require_symmetric(a)
    n = a.shape[0]
    if not 1 <= k <= n:
        raise DimensionMismatch(f"k must be in [1, {n}], got {k}")
    if method == "auto":
        method = "dense" if n <= DENSE_EIG_LIMIT else "lanczos"
    if method == "dense":
        vals, vecs = np.linalg.eigh(a)
        vals = vals[::-1][:k].copy()
        vecs = vecs[:, ::-1][:, :k].copy()
        return SymEigResult(vals, _fix_column_signs(vecs))
    if method == "lanczos":
        return _lanczos_top_k(a, k, tol)
    raise ValueError(f"unknown eigensolver method {method!r}")


def _lanczos_top_k(a, k, tol, seed=_LANCZOS_SEED):
    """Lanczos iteration with full reorthogonalization and subspace growth.

    The Krylov basis is expanded until every requested Ritz pair meets the
    residual bound; a basis of size n reproduces the dense decomposition, so
    failure to converge at that point raises NoConvergence.
    """
    n = a.shape[0]
    fro = float(np.linalg.norm(a))
    rng = np.random.default_rng(seed)

    if fro == 0.0:
        vecs = np.eye(n, k)
        return SymEigResult(np.zeros(k), vecs)

    basis = np.empty((n, n))
    alphas = np.empty(n)
    betas = np.zeros(n)  # betas[j] couples vector j to j+1; 0 marks a restart
    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    basis[:, 0] = q
    j = 0
    matvecs = 0
    target = min(n, max(2 * k + 10, 32))

    while True:
        while j < target:
            u = a @ basis[:, j]
            matvecs += 1
            alphas[j] = basis[:, j] @ u
            r = u - alphas[j] * basis[:, j]
            if j > 0 and betas[j - 1] != 0.0:
                r -= betas[j - 1] * basis[:, j - 1]
            # Full reorthogonalization, applied twice to restore orthogonality
            # lost to rounding.
            for _ in range(2):
                r -= basis[:, : j + 1] @ (basis[:, : j + 1].T @ r)
            beta = np.linalg.norm(r)
            if j + 1 == n:
                j += 1
                break
            if beta <= 1e-13 * fro:
                # Invariant subspace found: restart with a fresh direction.
                r = rng.standard_normal(n)
                for _ in range(2):
                    r -= basis[:, : j + 1] @ (basis[:, : j + 1].T @ r)
                betas[j] = 0.0
                r /= np.linalg.norm(r)
            else:
                betas[j] = beta
                r /= beta
            basis[:, j + 1] = r
            j += 1

        t_vals, t_vecs = scipy.linalg.eigh_tridiagonal(alphas[:j], betas[: j - 1])
        order = np.argsort(t_vals)[::-1][:k]
        vals = t_vals[order]
        vecs = basis[:, :j] @ t_vecs[:, order]
        residuals = np.linalg.norm(a @ vecs - vecs * vals, axis=0)
        matvecs += k
        if np.all(residuals <= tol * fro):
            return SymEigResult(vals.copy(), _fix_column_signs(np.ascontiguousarray(vecs)))
        if j >= n:
            raise NoConvergence(
                f"Lanczos residual {residuals.max():.3e} above {tol * fro:.3e}",
                iterations=matvecs,
            )
        target = min(n, max(target + 16, int(1.6 * target)))


def dense_svd(m: np.ndarray, cap: int | None = None) -> SvdResult:
    """Thin SVD of a dense matrix; verification oracle for small instances.

    Raises OracleCapExceeded when min(m, n) is above the cap (default
    SVD_ORACLE_CAP).
    """
    m = _as_matrix(m)
    cap = SVD_ORACLE_CAP if cap is None else cap
    if min(m.shape) > cap:
        raise OracleCapExceeded(
            f"dense_svd called on {m.shape[0]}x{m.shape[1]} instance, cap is {cap}"
        )
    left, singular, right_t = np.linalg.svd(m, full_matrices=False)
    right = right_t.T.copy()
    # Deterministic sign choice keyed on the right vectors; flip pairs so the
    # reconstruction is unchanged.
    lead = np.argmax(np.abs(right), axis=0)
    flip = right[lead, np.arange(right.shape[1])] < 0.0
    right[:, flip] *= -1.0
    left = left.copy()
    left[:, flip] *= -1.0
    return SvdResult(left, singular, right)


def truncate_svd(s: SvdResult, k: int) -> np.ndarray:
    """Best rank-k Frobenius approximation assembled from a thin SVD."""
    r = s.singular.shape[0]
    if not 0 <= k <= r:
        raise DimensionMismatch(f"k must be in [0, {r}], got {k}")
    return (s.left[:, :k] * s.singular[:k]) @ s.right[:, :k].T
