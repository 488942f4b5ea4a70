"""
Lower bounds and exact values of the worst-case coefficient shift

    Delta_k(v) = max_{|S| = n-k} v^T (beta_hat - beta_hat_S)

via 1-Greedy, AMIP (rank once, refit), exhaustive enumeration, and the
noise-aware adversarial subset available in simulations.
"""

from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Optional, Union

import numpy as np

from . import linalg
from .errors import BudgetExceeded, DimensionMismatch, RankCollapse, RankDeficient
from .regression import (
    LEVERAGE_TOL,
    Dataset,
    HuberConfig,
    fit_huber,
    fit_ols,
    huber_batch,
    influence_scores,
)

ENUMERATION_BUDGET = 2_000_000
# fresh refactorisation interval for long downdate chains
REFRESH_EVERY = 25


@dataclass(frozen=True)
class AuditQuery:
    """What to audit.

    ``target`` is ``"maximize"`` (maximise v^T(beta_hat - beta_hat_S)) or
    ``"flip"`` (drive v^T beta_S across zero). For ``"flip"`` the direction is
    oriented by the sign of v^T beta_hat on the full fit, and the audit stops
    at the first sign change.
    """

    direction: np.ndarray
    k_max: int
    target: str = "maximize"
    loss: Union[str, HuberConfig] = "squared"
    # Huber greedy: evaluate only the top-m candidates of the previous step
    candidates: Optional[int] = None

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.direction, dtype=float))
        if not np.linalg.norm(v) > 0:
            raise ValueError("direction must be non-zero")
        if self.k_max < 0:
            raise ValueError("k_max must be non-negative")
        if self.target not in ("maximize", "flip"):
            raise ValueError(f"unknown target {self.target!r}")
        if not (self.loss == "squared" or isinstance(self.loss, HuberConfig)):
            raise ValueError("loss must be 'squared' or a HuberConfig")
        object.__setattr__(self, "direction", v)

    @property
    def huber(self) -> Optional[HuberConfig]:
        return self.loss if isinstance(self.loss, HuberConfig) else None


@dataclass(frozen=True)
class AuditTrace:
    removed: list
    delta_path: list
    flip_at: Optional[int]
    achieved_delta: float
    method: str
    direction: list = field(default_factory=list)
    baseline: float = 0.0
    loss: str = "squared"
    skipped: int = 0

    def __post_init__(self):
        if len(self.removed) != len(self.delta_path):
            raise ValueError("delta_path and removed must have equal length")
        if len(set(self.removed)) != len(self.removed):
            raise ValueError("duplicate removals")


def _loss_name(q: AuditQuery) -> str:
    return "squared" if q.huber is None else f"huber({q.huber.tau:g})"


def _orient(q: AuditQuery, coef) -> np.ndarray:
    """Effective direction: for flip targets, point along sign(v^T beta_hat)."""
    if q.target == "flip":
        s = 1.0 if q.direction @ coef >= 0 else -1.0
        return s * q.direction
    return q.direction


def _flip_index(baseline: float, delta_path) -> Optional[int]:
    """First prefix length j with sign(v^T beta_S) != sign(v^T beta_hat)."""
    s0 = baseline >= 0
    for j, d in enumerate(delta_path, start=1):
        if ((baseline - d) >= 0) != s0:
            return j
    return None


def _trace(removed, path, u, coef, method, loss, skipped=0):
    """Assemble a trace; ``path`` holds u^T(beta_hat - beta_S) per prefix."""
    removed = [int(i) for i in removed]
    path = [float(d) for d in path]
    baseline = float(u @ coef)
    return AuditTrace(
        removed=removed,
        delta_path=path,
        flip_at=_flip_index(baseline, path),
        achieved_delta=path[-1] if path else 0.0,
        method=method,
        direction=[float(x) for x in u],
        baseline=baseline,
        loss=loss,
        skipped=skipped,
    )


class _OlsState:
    """Inverse Gram, coefficients and residuals on a shrinking row set."""

    def __init__(self, data: Dataset, rows=None):
        self.X = data.design
        self.y = data.response
        self.active = np.ones(data.n, dtype=bool)
        if rows is not None:
            self.active[:] = False
            self.active[np.asarray(rows, dtype=int)] = True
        self.steps = 0
        self._refresh()

    def _refresh(self):
        fit = fit_ols(Dataset(self.X, self.y), np.flatnonzero(self.active))
        self.G = np.array(fit.gram_inverse)
        self.beta = np.array(fit.coefficients)

    def remove(self, i: int):
        x = self.X[i]
        Gx = self.G @ x
        h = x @ Gx
        if 1.0 - h <= linalg.DOWNDATE_TOL:
            raise RankCollapse(f"removing row {i} makes the design rank deficient")
        r = self.y[i] - x @ self.beta
        self.G = linalg.downdate_inverse(self.G, x)
        self.beta = self.beta - Gx * r / (1.0 - h)
        self.active[i] = False
        self.steps += 1
        if self.steps % REFRESH_EVERY == 0:
            self._refresh()

    def loo(self, u):
        """Exact single-deletion effects u^T(beta - beta_{-i}) on active rows."""
        idx = np.flatnonzero(self.active)
        X = self.X[idx]
        XG = X @ self.G
        h = np.einsum("ij,ij->i", XG, X)
        r = self.y[idx] - X @ self.beta
        eff = (XG @ u) * r
        ok = h < 1.0 - LEVERAGE_TOL
        eff = np.where(ok, eff / np.where(ok, 1.0 - h, 1.0), -np.inf)
        return idx, eff


def _check_k(data: Dataset, k: int):
    if k > data.n - data.p:
        raise DimensionMismatch(f"k={k} exceeds n - p = {data.n - data.p}")


def one_greedy(data: Dataset, q: AuditQuery) -> AuditTrace:
    """Sequentially delete the row whose exact single deletion moves the
    coefficient furthest in the target direction.

    Candidates are scored by their exact refit effect (leave-one-out via
    downdates for squared loss, warm-started Huber refits otherwise). Ties go
    to the lowest row index. Stops at ``k_max`` or, for flip targets, at the
    first sign change.
    """
    _check_k(data, q.k_max)
    if q.huber is None:
        return _greedy_ols(data, q)
    return _greedy_huber(data, q)


def _greedy_ols(data, q):
    state = _OlsState(data)
    beta0 = state.beta.copy()
    u = _orient(q, beta0)
    base = u @ beta0
    removed, path = [], []
    for _ in range(q.k_max):
        idx, eff = state.loo(u)
        if not np.isfinite(eff).any():
            raise RankCollapse("every remaining row is pivotal")
        j = int(idx[np.argmax(eff)])
        state.remove(j)
        removed.append(j)
        path.append(base - u @ state.beta)
        if q.target == "flip" and base - path[-1] < 0:
            break
    return _trace(removed, path, u, beta0, "one_greedy", "squared")


def _greedy_huber(data, q):
    cfg = q.huber
    X, y = data.design, data.response
    n = data.n
    fit = fit_huber(data, cfg=cfg)
    beta0 = np.array(fit.coefficients)
    u = _orient(q, beta0)
    base = u @ beta0
    beta = beta0.copy()
    mask = np.ones(n)
    G = np.array(fit.gram_inverse)
    prev_eff = None
    removed, path = [], []
    chunk = max(1, int(2_000_000 // max(n * data.p * data.p, 1)))
    for step in range(q.k_max):
        idx = np.flatnonzero(mask)
        lev = np.einsum("ij,jk,ik->i", X[idx], G, X[idx])
        idx = idx[lev < 1.0 - LEVERAGE_TOL]
        if idx.size == 0:
            raise RankCollapse("every remaining row is pivotal")
        if q.candidates is not None and prev_eff is not None and q.candidates < idx.size:
            order = np.lexsort((idx, -prev_eff[idx]))
            idx = np.sort(idx[order[: q.candidates]])
        eff = np.full(n, -np.inf)
        sols = {}
        for start in range(0, idx.size, chunk):
            cand = idx[start:start + chunk]
            M = np.repeat(mask[None, :], cand.size, axis=0)
            M[np.arange(cand.size), cand] = 0.0
            B, _ = huber_batch(X, y, M, np.repeat(beta[None, :], cand.size, axis=0), cfg)
            eff[cand] = base - B @ u
            for c, b in zip(cand, B):
                sols[int(c)] = b
        j = int(np.argmax(eff))
        prev_eff = eff
        mask[j] = 0.0
        G = linalg.downdate_inverse(G, X[j])
        beta = sols[j]
        removed.append(j)
        path.append(float(eff[j]))
        if q.target == "flip" and base - path[-1] < 0:
            break
    return _trace(removed, path, u, beta0, "one_greedy", _loss_name(q))


def _prefix_path(data: Dataset, order, u, beta0):
    """Exact u^T(beta_hat - beta_S) after each prefix of ``order``."""
    state = _OlsState(data)
    base = u @ beta0
    path = []
    for i in order:
        state.remove(int(i))
        path.append(base - u @ state.beta)
    return path


def amip_audit(data: Dataset, q: AuditQuery) -> AuditTrace:
    """Rank rows once by first-order influence, then refit exactly.

    ``delta_path[j-1]`` is the exact shift after removing the top ``j``
    rows of the ranking, so every entry is a certified lower bound on
    Delta_j.
    """
    if q.huber is not None:
        raise ValueError("AMIP is defined for squared loss only")
    _check_k(data, q.k_max)
    fit = fit_ols(data)
    beta0 = np.array(fit.coefficients)
    u = _orient(q, beta0)
    order = amip_ranking(data, u, fit)[: q.k_max]
    path = _prefix_path(data, order, u, beta0)
    return _trace(order, path, u, beta0, "amip", "squared")


def amip_ranking(data: Dataset, u, fit=None) -> np.ndarray:
    """Rows sorted by decreasing influence score; ties by row index."""
    fit = fit or fit_ols(data)
    s = influence_scores(fit, data, u)
    return np.lexsort((np.arange(data.n), -s))


def refit_delta(data: Dataset, removed, u, beta0=None) -> float:
    """u^T(beta_hat - beta_S) by a fresh fit without ``removed``."""
    if beta0 is None:
        beta0 = fit_ols(data).coefficients
    keep = np.ones(data.n, dtype=bool)
    keep[np.asarray(removed, dtype=int)] = False
    beta_s = fit_ols(data, np.flatnonzero(keep)).coefficients
    return float(u @ (beta0 - beta_s))


def brute_force_delta(data: Dataset, q: AuditQuery,
                      budget: int = ENUMERATION_BUDGET) -> AuditTrace:
    """Exact Delta_k by enumerating every removal set of size ``k_max``.

    Each subset is evaluated with the block (Woodbury) downdate
    ``beta_hat - beta_S = G X_R^T (I - H_RR)^{-1} r_R``. Subsets whose removal
    is rank-destroying are skipped and counted in ``trace.skipped``. The
    returned path is the exact prefix path of the maximising subset.
    """
    if q.huber is not None:
        raise ValueError("exhaustive enumeration is implemented for squared loss")
    k = q.k_max
    _check_k(data, k)
    n_sub = comb(data.n, k)
    if n_sub > budget:
        raise BudgetExceeded(f"C({data.n}, {k}) = {n_sub} exceeds budget {budget}")
    fit = fit_ols(data)
    beta0 = np.array(fit.coefficients)
    u = _orient(q, beta0)
    if k == 0:
        return _trace([], [], u, beta0, "brute_force", "squared")
    X = data.design
    G = np.array(fit.gram_inverse)
    H = X @ G @ X.T
    a = X @ (G @ u)
    r = np.array(fit.residuals)
    best_val, best_set, skipped = -np.inf, None, 0
    it = combinations(range(data.n), k)
    eye = np.eye(k)
    chunk = 200_000
    while True:
        C = np.fromiter((c for combo in _take(it, chunk) for c in combo), dtype=int)
        if C.size == 0:
            break
        C = C.reshape(-1, k)
        M = eye[None] - H[C[:, :, None], C[:, None, :]]
        sign, logdet = np.linalg.slogdet(M)
        ok = (sign > 0) & (logdet > np.log(linalg.DOWNDATE_TOL))
        skipped += int((~ok).sum())
        if not ok.any():
            continue
        Cok = C[ok]
        z = np.linalg.solve(M[ok], r[Cok][..., None])[..., 0]
        vals = np.sum(a[Cok] * z, axis=1)
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val, best_set = vals[j], Cok[j]
    if best_set is None:
        raise RankCollapse("every removal set of this size is rank-destroying")
    order = [int(i) for i in best_set]
    path = _prefix_path(data, order, u, beta0)
    return _trace(order, path, u, beta0, "brute_force", "squared", skipped)


def _take(it, m):
    for _, item in zip(range(m), it):
        yield item


def adversarial_subset(noise, first_column, k: int) -> np.ndarray:
    """Indices (sorted) of the n-k smallest products noise_i * first_column_i."""
    e = np.asarray(noise, dtype=float)
    z = np.asarray(first_column, dtype=float)
    if e.shape != z.shape or e.ndim != 1:
        raise DimensionMismatch("noise and first_column must be equal-length vectors")
    n = e.size
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, {n}]")
    order = np.argsort(e * z, kind="stable")
    return np.sort(order[: n - k])


def adversarial_audit(data: Dataset, noise, first_column, k: int, direction) -> AuditTrace:
    """Refit after dropping the k largest noise*covariate products.

    The removed rows are listed in decreasing order of the product; the path
    holds exact prefix deltas.
    """
    _check_k(data, k)
    u = np.atleast_1d(np.asarray(direction, dtype=float))
    keep = adversarial_subset(noise, first_column, k)
    prod = np.asarray(noise, dtype=float) * np.asarray(first_column, dtype=float)
    drop = np.setdiff1d(np.arange(data.n), keep)
    drop = drop[np.lexsort((drop, -prod[drop]))]
    beta0 = fit_ols(data).coefficients
    path = _prefix_path(data, drop, u, beta0)
    return _trace(drop, path, u, beta0, "adversarial_oracle", "squared")
