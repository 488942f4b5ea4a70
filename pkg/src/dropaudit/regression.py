"""
OLS and Huber fits on a dataset or a subset of its rows.

No intercept is ever inserted automatically; put a column of ones in the
design when one is wanted.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import linalg
from .errors import (
    DimensionMismatch,
    NoConvergence,
    NotPositiveDefinite,
    PivotalRow,
    RankDeficient,
)

LEVERAGE_TOL = 1e-10


@dataclass(frozen=True)
class Dataset:
    """Design matrix ``design`` (n x p) and response ``response`` (n,).

    ``groups`` holds categorical columns (e.g. fixed-effect keys) that are not
    part of the numeric design.
    """

    design: np.ndarray
    response: np.ndarray
    column_names: Optional[list] = None
    row_ids: Optional[list] = None
    groups: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.design, dtype=float)
        y = np.asarray(self.response, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DimensionMismatch(
                f"design {X.shape} and response {y.shape} are incompatible"
            )
        n, p = X.shape
        if p < 1 or n < p:
            raise DimensionMismatch(f"need n >= p >= 1, got n={n}, p={p}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite entries")
        if self.column_names is not None and len(self.column_names) != p:
            raise DimensionMismatch("column_names length must equal p")
        if self.row_ids is not None and len(self.row_ids) != n:
            raise DimensionMismatch("row_ids length must equal n")
        for key, vals in self.groups.items():
            if len(vals) != n:
                raise DimensionMismatch(f"group column {key!r} has wrong length")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "response", y)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]

    def restrict(self, rows) -> "Dataset":
        """New dataset made of the given rows, in the given order."""
        rows = np.asarray(rows, dtype=int)
        return Dataset(
            self.design[rows],
            self.response[rows],
            column_names=self.column_names,
            row_ids=None if self.row_ids is None else [self.row_ids[i] for i in rows],
            groups={k: np.asarray(v)[rows] for k, v in self.groups.items()},
        )


@dataclass(frozen=True)
class HuberConfig:
    tau: float = 1.0
    max_iterations: int = 200
    tolerance: float = 1e-9

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.max_iterations < 1 or not self.tolerance > 0:
            raise ValueError("max_iterations and tolerance must be positive")


@dataclass(frozen=True)
class RegressionFit:
    coefficients: np.ndarray
    gram_inverse: np.ndarray
    residuals: np.ndarray
    leverages: np.ndarray
    active_rows: np.ndarray
    loss: str = "squared"
    tau: Optional[float] = None
    condition_log: float = 0.0
    iterations: int = 0

    def __post_init__(self):
        for name in ("coefficients", "gram_inverse", "residuals", "leverages", "active_rows"):
            getattr(self, name).setflags(write=False)


def _rows(data: Dataset, rows) -> np.ndarray:
    if rows is None:
        return np.arange(data.n)
    rows = np.asarray(rows, dtype=int).ravel()
    if rows.size and (rows.min() < 0 or rows.max() >= data.n):
        raise DimensionMismatch("row index out of range")
    if np.unique(rows).size != rows.size:
        raise DimensionMismatch("duplicate row indices")
    return rows


def _gram_factor(X: np.ndarray):
    if X.shape[0] < X.shape[1]:
        raise RankDeficient(f"{X.shape[0]} rows cannot determine {X.shape[1]} coefficients")
    try:
        return linalg.factor_spd(X.T @ X)
    except NotPositiveDefinite as exc:
        raise RankDeficient(f"design is not of full column rank ({exc})") from None


def fit_ols(data: Dataset, rows=None) -> RegressionFit:
    """Least-squares fit on ``rows`` (all rows when None)."""
    rows = _rows(data, rows)
    X = data.design[rows]
    y = data.response[rows]
    f = _gram_factor(X)
    G = linalg.inverse_spd(f)
    beta = linalg.solve_spd(f, X.T @ y)
    resid = y - X @ beta
    lev = np.sum((X @ G) * X, axis=1)
    return RegressionFit(beta, G, resid, lev, rows.copy(), "squared", None,
                         f.log_condition_estimate, 0)


def _check_direction(direction, p):
    v = np.atleast_1d(np.asarray(direction, dtype=float))
    if v.shape != (p,):
        raise DimensionMismatch(f"direction has shape {v.shape}, expected ({p},)")
    return v


def loo_effects(fit: RegressionFit, data: Dataset, direction) -> np.ndarray:
    """Exact change in ``v^T beta`` from deleting each active row alone.

    Entry i equals ``v^T (beta_hat - beta_hat_{-i})``.
    """
    if fit.loss != "squared":
        raise ValueError("loo_effects requires a squared-loss fit")
    v = _check_direction(direction, data.p)
    X = data.design[fit.active_rows]
    if np.any(fit.leverages >= 1.0 - LEVERAGE_TOL):
        i = int(fit.active_rows[np.argmax(fit.leverages)])
        raise PivotalRow(f"row {i} has leverage numerically equal to one")
    a = X @ (fit.gram_inverse @ v)
    return a * fit.residuals / (1.0 - fit.leverages)


def influence_scores(fit: RegressionFit, data: Dataset, direction) -> np.ndarray:
    """First-order (no leverage correction) effect of deleting each row."""
    if fit.loss != "squared":
        raise ValueError("influence_scores requires a squared-loss fit")
    v = _check_direction(direction, data.p)
    X = data.design[fit.active_rows]
    return (X @ (fit.gram_inverse @ v)) * fit.residuals


# --------------------------------------------------------------------------
# Huber regression

def huber_loss(r, tau):
    a = np.abs(r)
    return np.where(a <= tau, 0.5 * r * r, tau * (a - 0.5 * tau))


def huber_score(r, tau):
    """psi_tau(r) = clip(r, -tau, tau)."""
    return np.clip(r, -tau, tau)


def huber_batch(X, y, mask, B0, cfg: HuberConfig):
    """Minimise the masked Huber objective for several row masks at once.

    ``mask`` is (m, n) with 1 for rows in the fit and 0 for removed rows;
    ``B0`` is the (m, p) warm start. Each iteration takes a Newton step on
    the piecewise-quadratic objective (the active-set solve) and falls back
    to the IRLS step with weights ``min(1, tau/|r|)`` when Newton does not
    decrease the objective.

    Returns (B, iterations).
    """
    tau = cfg.tau
    mask = np.asarray(mask, dtype=float)
    B = np.array(B0, dtype=float, copy=True)
    m, p = B.shape
    active = np.ones(m, dtype=bool)
    eye = np.eye(p)
    for it in range(1, cfg.max_iterations + 1):
        idx = np.flatnonzero(active)
        Bi = B[idx]
        Mi = mask[idx]
        R = y[None, :] - Bi @ X.T
        obj = np.sum(Mi * huber_loss(R, tau), axis=1)
        grad = (Mi * huber_score(R, tau)) @ X
        inlier = Mi * (np.abs(R) <= tau)
        H_newton = np.einsum("mi,ij,ik->mjk", inlier, X, X)
        w = Mi * np.minimum(1.0, tau / np.maximum(np.abs(R), 1e-300))
        H_irls = np.einsum("mi,ij,ik->mjk", w, X, X)

        step = np.empty_like(Bi)
        use_newton = np.ones(idx.size, dtype=bool)
        # Newton only where the inlier Gram is safely invertible
        diag_scale = np.maximum(np.einsum("mjj->mj", H_irls).max(axis=1), 1e-300)
        try:
            eig_min = np.linalg.eigvalsh(H_newton)[:, 0]
        except np.linalg.LinAlgError:
            eig_min = np.zeros(idx.size)
        use_newton &= eig_min > 1e-10 * diag_scale
        if np.any(use_newton):
            step[use_newton] = np.linalg.solve(
                H_newton[use_newton], grad[use_newton][..., None])[..., 0]
            trial = Bi[use_newton] + step[use_newton]
            Rt = y[None, :] - trial @ X.T
            obj_t = np.sum(Mi[use_newton] * huber_loss(Rt, tau), axis=1)
            ok = obj_t <= obj[use_newton] * (1 + 1e-15) + 1e-300
            sub = np.flatnonzero(use_newton)
            use_newton[sub[~ok]] = False
        irls = ~use_newton
        if np.any(irls):
            Hi = H_irls[irls] + 1e-300 * eye
            try:
                step[irls] = np.linalg.solve(Hi, grad[irls][..., None])[..., 0]
            except np.linalg.LinAlgError:
                raise RankDeficient("weighted design is singular") from None
        B[idx] = Bi + step
        done = np.max(np.abs(step), axis=1) <= cfg.tolerance * (1.0 + np.max(np.abs(Bi), axis=1))
        active[idx[done]] = False
        if not active.any():
            return B, it
    raise NoConvergence(
        f"Huber IRLS did not converge in {cfg.max_iterations} iterations"
    )


def fit_huber(data: Dataset, rows=None, cfg: Optional[HuberConfig] = None,
              start=None) -> RegressionFit:
    """Huber-loss fit on ``rows``; warm-started from ``start`` or from OLS."""
    cfg = cfg or HuberConfig()
    rows = _rows(data, rows)
    X = data.design[rows]
    y = data.response[rows]
    f = _gram_factor(X)
    G = linalg.inverse_spd(f)
    if start is None:
        start = linalg.solve_spd(f, X.T @ y)
    B, iters = huber_batch(X, y, np.ones((1, rows.size)),
                           np.asarray(start, dtype=float)[None, :], cfg)
    beta = B[0]
    resid = y - X @ beta
    lev = np.sum((X @ G) * X, axis=1)
    return RegressionFit(beta, G, resid, lev, rows.copy(), "huber", cfg.tau,
                         f.log_condition_estimate, iters)


def huber_gradient(fit: RegressionFit, data: Dataset) -> np.ndarray:
    X = data.design[fit.active_rows]
    return X.T @ huber_score(fit.residuals, fit.tau)
