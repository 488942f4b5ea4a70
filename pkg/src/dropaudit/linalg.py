"""
Dense SPD linear algebra used by every fit and audit.

Gram matrices are factored with a lower-triangular Cholesky factor. Explicit
inverses are only materialised where rank-one downdates (Sherman-Morrison)
amortise their cost, i.e. inside the audit loops.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .errors import DimensionMismatch, NotPositiveDefinite, RankCollapse

DOWNDATE_TOL = 1e-10
# relative pivot threshold below which a matrix is treated as singular
PIVOT_TOL = 1e-13


@dataclass(frozen=True)
class SpdFactor:
    """Cholesky factor ``L`` with ``L @ L.T == A``."""

    dimension: int
    factor_data: np.ndarray
    log_condition_estimate: float

    def reconstruct(self) -> np.ndarray:
        L = self.factor_data
        return L @ L.T


def factor_spd(A, tol: float = PIVOT_TOL) -> SpdFactor:
    """Factor a symmetric positive-definite matrix.

    Raises NotPositiveDefinite when a pivot is non-positive or smaller than
    ``tol`` times the largest diagonal entry of ``A``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    scale = np.max(np.abs(np.diag(A)))
    if not np.allclose(A, A.T, rtol=1e-10, atol=1e-12 * max(scale, 1.0)):
        raise DimensionMismatch("matrix is not symmetric")
    try:
        L = np.linalg.cholesky(0.5 * (A + A.T))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    d = np.diag(L)
    if scale <= 0 or np.min(d) ** 2 <= tol * scale:
        raise NotPositiveDefinite(
            f"leading minor pivot {np.min(d) ** 2:.3e} below tolerance"
        )
    log_cond = float(2.0 * (np.log(np.max(d)) - np.log(np.min(d))))
    L.setflags(write=False)
    return SpdFactor(A.shape[0], L, log_cond)


def solve_spd(f: SpdFactor, b) -> np.ndarray:
    """Solve ``A x = b`` using a precomputed factor. ``b`` may be a matrix."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.dimension:
        raise DimensionMismatch(
            f"right-hand side has leading dimension {b.shape[0]}, expected {f.dimension}"
        )
    return sla.cho_solve((f.factor_data, True), b)


def inverse_spd(f: SpdFactor) -> np.ndarray:
    inv = solve_spd(f, np.eye(f.dimension))
    return 0.5 * (inv + inv.T)


def downdate_inverse(inv_state, x, tol: float = DOWNDATE_TOL) -> np.ndarray:
    """Return ``(A - x x^T)^{-1}`` given ``A^{-1}`` (Sherman-Morrison).

    Raises RankCollapse if ``1 - x^T A^{-1} x <= tol``, i.e. removing the row
    would make the matrix singular.
    """
    inv_state = np.asarray(inv_state, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if inv_state.shape != (x.size, x.size):
        raise DimensionMismatch(
            f"inverse has shape {inv_state.shape}, row has length {x.size}"
        )
    u = inv_state @ x
    denom = 1.0 - x @ u
    if denom <= tol:
        raise RankCollapse(f"downdate denominator {denom:.3e} <= {tol:g}")
    out = inv_state + np.outer(u, u) / denom
    return 0.5 * (out + out.T)
