"""
Seeded data generators and the simulation experiments.

Every replicate draws from its own ``SeedSequence(master_seed,
spawn_key=(replicate, role))`` so results do not depend on how many worker
threads run the replicates or in which order they finish.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .audit import (
    AuditQuery,
    adversarial_subset,
    amip_audit,
    amip_ranking,
    one_greedy,
    refit_delta,
)
from .bounds import NoiseDist, asymptotic_lower_bound, classify_regime
from .errors import DropAuditError, NumericalError
from .regression import Dataset, fit_ols

ROLE_DATA = 0
ROLE_AUDIT = 1


def replicate_seed(master_seed: int, replicate: int, role: int = ROLE_DATA) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(replicate), int(role)))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def _sym_sqrt(S, inverse=False):
    w, V = np.linalg.eigh(S)
    if np.min(w) <= 0:
        raise ValueError("covariance must be positive definite")
    d = w ** (-0.5 if inverse else 0.5)
    return (V * d) @ V.T


@dataclass(frozen=True)
class ModelSpec:
    """Gaussian-design linear model y = beta^T x + noise_scale * eps."""

    sigma: np.ndarray
    beta: np.ndarray
    noise: NoiseDist = NoiseDist()
    noise_scale: float = 1.0

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        b = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if S.shape != (b.size, b.size):
            raise ValueError("sigma must be p x p with p = len(beta)")
        if not np.allclose(S, S.T) or np.linalg.eigvalsh(S)[0] <= 0:
            raise ValueError("sigma must be symmetric positive definite")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be non-negative")
        object.__setattr__(self, "sigma", S)
        object.__setattr__(self, "beta", b)

    @property
    def p(self) -> int:
        return self.beta.size

    @classmethod
    def isotropic(cls, p, beta=None, noise=NoiseDist(), noise_scale=1.0):
        beta = np.ones(p) / np.sqrt(p) if beta is None else beta
        return cls(np.eye(p), beta, noise, noise_scale)

    def sigma_inv_v_norm(self, v) -> float:
        return float(np.linalg.norm(_sym_sqrt(self.sigma, inverse=True) @ np.asarray(v, float)))


@dataclass(frozen=True)
class Hidden:
    """Quantities a simulation knows but an analyst would not."""

    noise: np.ndarray
    whitened: np.ndarray

    def direction_column(self, sigma, v) -> np.ndarray:
        """<z_i, w> with w = Sigma^{-1/2} v / ||Sigma^{-1/2} v||."""
        w = _sym_sqrt(np.atleast_2d(sigma), inverse=True) @ np.asarray(v, float)
        return self.whitened @ (w / np.linalg.norm(w))


def gen_model2(spec: ModelSpec, n: int, seed) -> tuple:
    """Draw n samples; returns (Dataset, Hidden)."""
    if n < spec.p:
        raise ValueError("need n >= p")
    rng = _rng(seed)
    Z = rng.standard_normal((n, spec.p))
    eps = spec.noise.sample(rng, n)
    X = Z @ _sym_sqrt(spec.sigma)
    y = X @ spec.beta + spec.noise_scale * eps
    return Dataset(X, y), Hidden(eps, Z)


@dataclass(frozen=True)
class Misspec:
    """Generic sub-Gaussian (x, y) law; E[y|x] may be non-linear."""

    covariate_family: str = "gaussian"
    response_map: str = "linear_plus_noise"
    noise: NoiseDist = NoiseDist()
    sigma: Optional[np.ndarray] = None
    beta: Optional[np.ndarray] = None
    noise_scale: float = 1.0

    def __post_init__(self):
        if self.covariate_family not in ("gaussian", "rademacher", "uniform_sphere"):
            raise ValueError(f"unknown covariate family {self.covariate_family!r}")
        if self.response_map not in ("linear_plus_noise", "quadratic_link", "sign_link"):
            raise ValueError(f"unknown response map {self.response_map!r}")


def gen_model1(m: Misspec, n: int, p: int, seed) -> Dataset:
    """Draw n samples from a possibly misspecified model.

    ``quadratic_link`` uses y = (beta^T x)^2 / sqrt(p) + noise and
    ``sign_link`` uses y = sign(beta^T x) + noise.
    """
    if n < p:
        raise ValueError("need n >= p")
    sigma = np.eye(p) if m.sigma is None else np.asarray(m.sigma, float)
    beta = np.ones(p) / np.sqrt(p) if m.beta is None else np.asarray(m.beta, float)
    if m.covariate_family == "gaussian" and m.response_map == "linear_plus_noise":
        data, _ = gen_model2(ModelSpec(sigma, beta, m.noise, m.noise_scale), n, seed)
        return data
    rng = _rng(seed)
    if m.covariate_family == "gaussian":
        X = rng.standard_normal((n, p)) @ _sym_sqrt(sigma)
    elif m.covariate_family == "rademacher":
        X = rng.choice(np.array([-1.0, 1.0]), size=(n, p))
    else:
        G = rng.standard_normal((n, p))
        X = np.sqrt(p) * G / np.linalg.norm(G, axis=1, keepdims=True)
    eps = m.noise.sample(rng, n)
    lin = X @ beta
    if m.response_map == "linear_plus_noise":
        signal = lin
    elif m.response_map == "quadratic_link":
        signal = lin ** 2 / np.sqrt(p)
    else:
        signal = np.sign(lin)
    return Dataset(X, signal + m.noise_scale * eps)


# --------------------------------------------------------------------------
# experiments

METHODS = ("amip", "one_greedy", "adversarial_oracle", "theory")


@dataclass(frozen=True)
class SimulationConfig:
    model: Union[ModelSpec, Misspec]
    n: int
    replicates: int
    alphas: tuple
    direction: Optional[np.ndarray] = None
    master_seed: int = 0
    methods: tuple = ("amip", "theory")
    p: Optional[int] = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.alphas or any(not 0 < a < 0.5 for a in self.alphas):
            raise ValueError("every alpha must lie in (0, 1/2)")
        if not self.methods or set(self.methods) - set(METHODS):
            raise ValueError(f"methods must be a non-empty subset of {METHODS}")
        p = self.model.p if isinstance(self.model, ModelSpec) else self.p
        if p is None:
            raise ValueError("p is required for misspecified models")
        if isinstance(self.model, Misspec) and "adversarial_oracle" in self.methods:
            raise ValueError("the adversarial oracle needs a ModelSpec")
        v = np.eye(p)[0] if self.direction is None else np.asarray(self.direction, float)
        if v.shape != (p,):
            raise ValueError("direction has the wrong length")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "direction", v)
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "methods", tuple(self.methods))

    @property
    def ks(self) -> list:
        # round() is round-half-to-even
        return [int(round(a * self.n)) for a in self.alphas]

    def to_dict(self) -> dict:
        m = self.model
        if isinstance(m, ModelSpec):
            model = {"kind": "model2", "sigma": m.sigma.tolist(), "beta": m.beta.tolist(),
                     "noise": m.noise.kind, "noise_df": m.noise.df, "noise_scale": m.noise_scale}
        else:
            model = {"kind": "model1", "covariate_family": m.covariate_family,
                     "response_map": m.response_map, "noise": m.noise.kind,
                     "noise_df": m.noise.df, "noise_scale": m.noise_scale}
        return {"model": model, "n": self.n, "p": self.p, "replicates": self.replicates,
                "alphas": list(self.alphas), "ks": self.ks,
                "direction": self.direction.tolist(), "master_seed": self.master_seed,
                "methods": list(self.methods)}


@dataclass
class SimulationResult:
    """Per-(alpha, method) summaries plus the raw per-replicate values.

    ``sd`` is the standard deviation of per-dataset values (ddof=1), not the
    standard error of the mean.
    """

    rows: list
    theory: list
    per_replicate: dict
    failures: list
    config: dict
    seeds: list
    wall_time: float = field(default=0.0, compare=False)

    def plot_table(self) -> list:
        cols = ("alpha", "method", "mean", "sd", "n_ok")
        return [tuple(r[c] for c in cols) for r in self.rows]


class SimulationFailed(DropAuditError):
    pass


def _figure1_replicate(cfg: SimulationConfig, r: int):
    seed = replicate_seed(cfg.master_seed, r, ROLE_DATA)
    v = cfg.direction
    ks = cfg.ks
    out = {}
    if isinstance(cfg.model, ModelSpec):
        data, hidden = gen_model2(cfg.model, cfg.n, seed)
    else:
        data, hidden = gen_model1(cfg.model, cfg.n, cfg.p, seed), None
    kmax = max(ks)
    if "amip" in cfg.methods:
        tr = amip_audit(data, AuditQuery(v, kmax))
        out["amip"] = [tr.delta_path[k - 1] if k else 0.0 for k in ks]
    if "one_greedy" in cfg.methods:
        tr = one_greedy(data, AuditQuery(v, kmax))
        out["one_greedy"] = [tr.delta_path[k - 1] if k else 0.0 for k in ks]
    if "adversarial_oracle" in cfg.methods:
        col = hidden.direction_column(cfg.model.sigma, v)
        beta0 = fit_ols(data).coefficients
        vals = []
        for k in ks:
            keep = adversarial_subset(hidden.noise, col, k)
            drop = np.setdiff1d(np.arange(cfg.n), keep)
            vals.append(refit_delta(data, drop, v, beta0))
        out["adversarial_oracle"] = vals
    return out


def _map(fn, items, threads):
    if threads is None or threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _summaries(values):
    vals = np.asarray(values, dtype=float)
    n_ok = int(vals.size)
    mean = float(np.mean(vals)) if n_ok else float("nan")
    sd = float(np.std(vals, ddof=1)) if n_ok > 1 else 0.0
    return mean, sd, n_ok


def theory_curve(cfg: SimulationConfig) -> list:
    m = cfg.model
    if not isinstance(m, ModelSpec):
        return []
    s = m.sigma_inv_v_norm(cfg.direction)
    return [asymptotic_lower_bound(k / cfg.n, s, m.noise, m.noise_scale).value
            if 0 < k / cfg.n < 0.5 else float("nan") for k in cfg.ks]


def run_figure1(cfg: SimulationConfig, threads: int = 1,
                max_failure_rate: float = 0.1) -> SimulationResult:
    """Empirical Delta_k lower bounds over replicate datasets plus the
    asymptotic theory curve."""
    t0 = time.perf_counter()
    audit_methods = [m for m in cfg.methods if m != "theory"]

    def run(r):
        try:
            return _figure1_replicate(cfg, r)
        except NumericalError as exc:
            return {"error": f"{type(exc).__name__}: {exc}"}

    results = _map(run, range(cfg.replicates), threads)
    failures = [{"replicate": r, "error": res["error"]}
                for r, res in enumerate(results) if "error" in res]
    if len(failures) > max_failure_rate * cfg.replicates:
        raise SimulationFailed(f"{len(failures)} of {cfg.replicates} replicates failed")
    theory = theory_curve(cfg) if "theory" in cfg.methods else []
    rows, per_rep = [], {}
    for m in audit_methods:
        mat = [res.get(m) for res in results]
        per_rep[m] = [row if row is None else [float(x) for x in row] for row in mat]
        ok = [row for row in mat if row is not None]
        for j, a in enumerate(cfg.alphas):
            mean, sd, n_ok = _summaries([row[j] for row in ok])
            rows.append({"alpha": a, "k": cfg.ks[j], "method": m,
                         "mean": mean, "sd": sd, "n_ok": n_ok})
    for j, a in enumerate(cfg.alphas):
        if theory:
            rows.append({"alpha": a, "k": cfg.ks[j], "method": "theory",
                         "mean": theory[j], "sd": 0.0, "n_ok": cfg.replicates})
    seeds = [{"replicate": r, "entropy": int(cfg.master_seed), "spawn_key": [r, ROLE_DATA]}
             for r in range(cfg.replicates)]
    return SimulationResult(rows, theory, per_rep, failures, cfg.to_dict(), seeds,
                            time.perf_counter() - t0)


# --------------------------------------------------------------------------
# regime grid

_REGIONS = ("I", "II", "III", "IV")
REGION_RULES = {"I": ("small", "small"), "II": ("small", "large"),
                "III": ("large", "small"), "IV": ("large", "large")}


def region_sizes(region: str, n: int) -> tuple:
    """(k, p) for a region: 'small' = ceil(sqrt(n)), 'large' = ceil(n/4)."""
    size = {"small": math.ceil(math.sqrt(n)), "large": math.ceil(n / 4)}
    rk, rp = REGION_RULES[region]
    return size[rk], size[rp]


def _grid_cell(region, n, r, master_seed, noise):
    k, p = region_sizes(region, n)
    spec = ModelSpec.isotropic(p, noise=noise)
    seed = np.random.SeedSequence(int(master_seed), spawn_key=(int(r), n, _REGIONS.index(region), ROLE_DATA))
    data, hidden = gen_model2(spec, n, seed)
    v = np.eye(p)[0]
    fit = fit_ols(data)
    beta0 = fit.coefficients
    col = hidden.whitened[:, 0]
    keep = adversarial_subset(hidden.noise, col, k)
    beta_s = fit_ols(data, keep).coefficients
    adv = float(v @ (beta0 - beta_s))
    drop_amip = amip_ranking(data, v, fit)[:k]
    amip = refit_delta(data, drop_amip, v, beta0)
    return {"adversarial": adv, "amip": amip, "delta": max(adv, amip),
            "err_subset": float(np.linalg.norm(beta_s - spec.beta)),
            "err_full": float(np.linalg.norm(beta0 - spec.beta))}


def run_regime_grid(n_list: Sequence[int] = (200, 800, 3200),
                    regions: Sequence[str] = ("I", "II", "III", "IV"),
                    seeds: int = 30, master_seed: int = 0,
                    noise: NoiseDist = NoiseDist(), threads: int = 1) -> list:
    """Adversarial / AMIP shifts and estimation error across growing n.

    Returns one row per (region, n) with mean shift (``delta`` is the larger
    of the two certified lower bounds), mean ||beta_S - beta|| for the
    adversarial subset, the theory value at alpha = k/n, and the predicted
    robust/consistent flags.
    """
    rows = []
    for region in regions:
        for n in n_list:
            k, p = region_sizes(region, n)
            cells = _map(lambda r: _grid_cell(region, n, r, master_seed, noise),
                         range(seeds), threads)
            mean = lambda key: float(np.mean([c[key] for c in cells]))
            sd = lambda key: float(np.std([c[key] for c in cells], ddof=1)) if seeds > 1 else 0.0
            alpha = k / n
            theory = asymptotic_lower_bound(alpha, 1.0, noise).value if 0 < alpha < 0.5 else None
            cls = classify_regime(k, p, n, cutoff=0.1)
            rows.append({
                "region": region, "n": n, "k": k, "p": p, "seeds": seeds,
                "mean_adversarial": mean("adversarial"), "mean_amip": mean("amip"),
                "mean_delta": mean("delta"), "sd_delta": sd("delta"),
                "mean_err_subset": mean("err_subset"), "mean_err_full": mean("err_full"),
                "theory_lb": theory,
                "predicted_robust": REGION_RULES[region][0] == "small",
                "predicted_consistent": REGION_RULES[region][1] == "small",
                "classified": cls["region"],
            })
    return rows


def regime_trends(rows: list) -> dict:
    """Per region: relative change of mean delta and subset error from the
    smallest to the largest n."""
    out = {}
    for region in sorted({r["region"] for r in rows}):
        rs = sorted((r for r in rows if r["region"] == region), key=lambda r: r["n"])
        first, last = rs[0], rs[-1]
        out[region] = {
            "delta_change": last["mean_delta"] / first["mean_delta"] - 1.0,
            "err_change": last["mean_err_subset"] / first["mean_err_subset"] - 1.0,
            "delta_at_largest_n": last["mean_delta"],
            "err_at_largest_n": last["mean_err_subset"],
        }
    return out
