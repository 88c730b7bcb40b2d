"""Dense matrix kernels: thin SVD, rank-1 approximation, singular value
thresholding, norms, and column concatenation.

All operations take and return plain float64 ndarrays.  Inputs are validated
once at the boundary; numerically suspect results raise
:class:`~surveymc.errors.NumericalFailure` rather than propagating NaNs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NumericalFailure, ShapeError

__all__ = [
    "SvdFactors",
    "MatrixNorms",
    "as_matrix",
    "svd_thin",
    "rank1_approx",
    "svt",
    "norms",
    "nuclear_norm",
    "concat_cols",
]


@dataclass(frozen=True)
class SvdFactors:
    """Thin singular value decomposition M = U @ diag(s) @ V.T.

    U is rows x r, s is length r nonincreasing and nonnegative, V is cols x r,
    with r = min(rows, cols).
    """

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.s) @ self.V.T


@dataclass(frozen=True)
class MatrixNorms:
    """Frobenius, operator (largest singular value), nuclear, and sup norms."""

    frobenius: float
    operator: float
    nuclear: float
    sup: float


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Validate and return M as a finite 2-d float64 array.

    Raises InvalidInput for wrong dimensionality, empty axes, or non-finite
    entries.
    """
    A = np.asarray(M, dtype=np.float64)
    if A.ndim != 2:
        raise InvalidInput(f"{name} must be 2-dimensional, got ndim={A.ndim}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise InvalidInput(f"{name} must have at least one row and column, got {A.shape}")
    if not np.isfinite(A).all():
        raise InvalidInput(f"{name} contains non-finite entries")
    return A


def svd_thin(M) -> SvdFactors:
    """Thin SVD with singular values sorted nonincreasing.

    Deterministic for a fixed input on a fixed platform (LAPACK backend).
    Raises NumericalFailure if the backend does not converge.
    """
    A = as_matrix(M)
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rare backend failure
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    return SvdFactors(U=U, s=s, V=Vt.T)


def rank1_approx(M) -> np.ndarray:
    """Best rank-1 approximation sigma_1 * u_1 v_1^T (Frobenius-optimal)."""
    f = svd_thin(M)
    return f.s[0] * np.outer(f.U[:, 0], f.V[:, 0])


def svt(M, tau: float) -> np.ndarray:
    """Singular value thresholding: U diag((s - tau)_+) V^T.

    This is the proximal operator of tau * nuclear norm.  tau = 0 returns M
    up to SVD round-off; tau >= s_1 returns the zero matrix.
    """
    if not np.isfinite(tau) or tau < 0:
        raise InvalidInput(f"tau must be finite and >= 0, got {tau}")
    f = svd_thin(M)
    shrunk = np.maximum(f.s - tau, 0.0)
    return (f.U * shrunk) @ f.V.T


def norms(M) -> MatrixNorms:
    """All four norms from a single SVD plus an entrywise pass.

    sup is the entrywise max absolute value (not the induced inf-norm).
    """
    A = as_matrix(M)
    s = svd_thin(A).s
    return MatrixNorms(
        frobenius=float(np.sqrt(np.sum(s * s))),
        operator=float(s[0]),
        nuclear=float(np.sum(s)),
        sup=float(np.max(np.abs(A))),
    )


def nuclear_norm(M) -> float:
    """Sum of singular values, without forming the factors."""
    A = as_matrix(M)
    try:
        s = np.linalg.svd(A, compute_uv=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    return float(np.sum(s))


def concat_cols(A, B) -> np.ndarray:
    """Column concatenation [A, B]; rows must agree."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape[0] != B.shape[0]:
        raise ShapeError(f"row mismatch in concat: {A.shape[0]} vs {B.shape[0]}")
    return np.hstack([A, B])
