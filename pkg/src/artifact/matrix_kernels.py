"""Small dense linear-algebra kernels.

Every matrix handled by this package is tiny (at most 64x64), so these are
plain numpy routines over dense ``float64`` arrays. Singular inputs raise
:class:`SingularMatrixError` instead of producing NaNs.
"""

from __future__ import annotations

import numpy as np

SINGULAR_TOL = 1e-12
POWER_ITERATIONS = 100


class SingularMatrixError(ValueError):
    """Raised when a solve or rank-one update would divide by ~zero."""


def as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def as_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("vector has non-finite entries")
    return x


def frobenius_norm_sq(A) -> float:
    """Return trace(A^T A), the sum of squared entries."""
    A = as_matrix(A)
    return float(np.sum(A * A))


def weighted_norm_sq(x, A) -> float:
    """Return the quadratic form x^T A x."""
    x = as_vector(x)
    A = as_matrix(A)
    if A.shape[0] != A.shape[1] or A.shape[0] != x.shape[0]:
        raise ValueError(f"dimension mismatch: x{x.shape} vs A{A.shape}")
    return float(x @ A @ x)


def sherman_morrison(Ainv, u, v, scale: float = 1.0) -> np.ndarray:
    """Inverse of ``A + scale * u v^T`` given ``Ainv = A^{-1}``.

    Raises:
        SingularMatrixError: if ``|1 + scale * v^T Ainv u| < 1e-12``.
    """
    Ainv = as_matrix(Ainv)
    u = as_vector(u)
    v = as_vector(v)
    Au = Ainv @ u
    vA = v @ Ainv
    denom = 1.0 + scale * float(v @ Au)
    if abs(denom) < SINGULAR_TOL:
        raise SingularMatrixError(f"rank-one update is singular (denominator {denom:.3e})")
    return Ainv - (scale / denom) * np.outer(Au, vA)


def solve_small(A, B) -> np.ndarray:
    """Solve ``A X = B`` by Gaussian elimination with partial pivoting.

    ``B`` may be a vector or a matrix with ``A.shape[0]`` rows.
    """
    A = as_matrix(A)
    B = np.asarray(B, dtype=np.float64)
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError(f"A must be square, got {A.shape}")
    vector_rhs = B.ndim == 1
    if B.shape[0] != n:
        raise ValueError(f"B has {B.shape[0]} rows, expected {n}")

    M = A.copy()
    X = B.reshape(n, -1).copy()
    scale = np.linalg.norm(A)
    if scale == 0.0:
        raise SingularMatrixError("matrix is zero")
    for col in range(n):
        piv = col + int(np.argmax(np.abs(M[col:, col])))
        if abs(M[piv, col]) < SINGULAR_TOL * scale:
            raise SingularMatrixError(f"pivot {M[piv, col]:.3e} below tolerance at column {col}")
        if piv != col:
            M[[col, piv]] = M[[piv, col]]
            X[[col, piv]] = X[[piv, col]]
        factors = M[col + 1 :, col] / M[col, col]
        M[col + 1 :, col:] -= np.outer(factors, M[col, col:])
        X[col + 1 :] -= np.outer(factors, X[col])
    for row in range(n - 1, -1, -1):
        X[row] = (X[row] - M[row, row + 1 :] @ X[row + 1 :]) / M[row, row]
    return X.ravel() if vector_rhs else X


def operator_norm(A, iterations: int = POWER_ITERATIONS) -> float:
    """Largest singular value by power iteration on ``A^T A``.

    The start vector is the normalized all-ones vector, so results are
    deterministic. If that start is orthogonal to the top singular vector the
    estimate is low; the callers only use it in tests with generic inputs.
    """
    A = as_matrix(A)
    n = A.shape[1]
    v = np.full(n, 1.0 / np.sqrt(n))
    sigma = 0.0
    for _ in range(iterations):
        w = A.T @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        sigma = float(np.linalg.norm(A @ v))
    return sigma


def operator_norm_bounds_check(A) -> tuple[float, float]:
    """Return ``(||A||_F, ||A||)`` with the operator norm by power iteration.

    Callers check the chain ``||A|| <= ||A||_F <= sqrt(cols) * ||A||``.
    """
    A = as_matrix(A)
    return float(np.sqrt(frobenius_norm_sq(A))), operator_norm(A)
