"""
Closed-form bounds on Delta_k(v) and the product-normal utilities behind them.

Throughout, ``z ~ N(0, 1)`` is independent of the noise ``eps`` and all noise
laws are standardised to unit variance; ``noise_scale`` multiplies the
result. Because z is symmetric, ``eps * z`` has the same law as
``|eps| * z``, which is what every integral below uses.

Unspecified absolute constants are explicit keyword arguments (default 1)
and are echoed in each report's ``constants_assumed``.
"""

from dataclasses import asdict, dataclass, field
from math import e as EULER_E
from typing import Optional, Union

import numpy as np
from scipy import optimize, special, stats

from .errors import (
    AlphaOutOfRange,
    ConditionViolated,
    LeadingTermNonpositive,
    RhoTooLarge,
    UnsupportedDistribution,
)

SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class NoiseDist:
    """Unit-variance noise law: gaussian, rademacher, uniform or student_t."""

    kind: str = "gaussian"
    df: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "rademacher", "uniform", "student_t"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "student_t" and (self.df is None or self.df <= 2):
            raise ValueError("student_t noise needs df > 2 for unit variance")

    @property
    def sub_gaussian(self) -> bool:
        return self.kind != "student_t"

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "rademacher":
            return rng.choice(np.array([-1.0, 1.0]), size=size)
        if self.kind == "uniform":
            return rng.uniform(-SQRT3, SQRT3, size)
        return rng.standard_t(self.df, size) * np.sqrt((self.df - 2.0) / self.df)


def _require_sub_gaussian(noise: NoiseDist):
    if not noise.sub_gaussian:
        raise UnsupportedDistribution(
            f"{noise.kind} noise is not sub-Gaussian; product-normal bounds do not apply"
        )


# --------------------------------------------------------------------------
# quadrature

_GL_CACHE = {}


def _gl(order):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def panel_quad(f, a, b, tol=1e-11, order=20, max_panels=4096):
    """Composite Gauss-Legendre on [a, b], doubling panels until two
    successive estimates differ by less than ``tol``."""
    x0, w0 = _gl(order)

    def estimate(m):
        edges = np.linspace(a, b, m + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        x = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
        w = (half[:, None] * w0[None, :]).ravel()
        return float(np.dot(w, f(x)))

    m = 4
    prev = estimate(m)
    while m < max_panels:
        m *= 2
        cur = estimate(m)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    return prev


def _abs_noise_expectation(g, noise: NoiseDist, tail=12.0):
    """E[g(|eps|)] for a sub-Gaussian unit-variance noise law."""
    _require_sub_gaussian(noise)
    if noise.kind == "rademacher":
        return float(g(np.array([1.0]))[0])
    if noise.kind == "uniform":
        return panel_quad(lambda e: g(e), 0.0, SQRT3) / SQRT3
    return panel_quad(lambda e: 2.0 * stats.norm.pdf(e) * g(e), 0.0, tail)


# --------------------------------------------------------------------------
# product-normal law

def product_normal_cdf(x: float, noise: NoiseDist = NoiseDist()) -> float:
    """P(eps * z <= x)."""
    _require_sub_gaussian(noise)
    if np.isposinf(x):
        return 1.0
    if np.isneginf(x):
        return 0.0
    if x == 0.0:
        return 0.5
    val = _abs_noise_expectation(lambda e: special.ndtr(x / e), noise)
    return float(min(1.0, max(0.0, val)))


def product_normal_quantile(level: float, noise: NoiseDist = NoiseDist()) -> float:
    """Level-quantile of eps * z by bracketed root finding on the CDF."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    _require_sub_gaussian(noise)
    if level == 0.5:
        return 0.0
    f = lambda q: product_normal_cdf(q, noise) - level
    lo, hi = -1.0, 1.0
    while f(lo) > 0:
        lo *= 2.0
    while f(hi) < 0:
        hi *= 2.0
    return float(optimize.brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))


def truncated_product_moment(alpha: float, noise: NoiseDist = NoiseDist()) -> float:
    """E[eps z 1(eps z > q_{1-alpha})].

    Uses E[z 1(z > c)] = phi(c), so the value is E[|eps| phi(q / |eps|)].
    ``alpha >= 1`` gives the full mean, 0.
    """
    _require_sub_gaussian(noise)
    if alpha >= 1.0 or alpha <= 0.0:
        return 0.0
    q = product_normal_quantile(1.0 - alpha, noise)
    return _abs_noise_expectation(lambda e: e * stats.norm.pdf(q / e), noise)


def _orlicz_root(moment, lo, hi=2.0):
    """inf{s > 0 : moment(s) <= e} for a moment decreasing in s."""
    while moment(hi) > EULER_E:
        hi *= 2.0
    return float(optimize.brentq(lambda s: moment(s) - EULER_E, lo, hi, xtol=1e-13))


def psi2_norm(noise: NoiseDist = NoiseDist()) -> float:
    """Sub-Gaussian norm inf{t: E exp(eps^2/t^2) <= e} of the noise."""
    _require_sub_gaussian(noise)
    if noise.kind == "gaussian":
        return float(np.sqrt(2.0 / (1.0 - np.exp(-2.0))))
    if noise.kind == "rademacher":
        return 1.0

    def moment(t):
        return panel_quad(lambda x: np.exp(x * x / (t * t)), 0.0, SQRT3) / SQRT3

    return _orlicz_root(moment, 0.3)


def product_psi1_norm(noise: NoiseDist = NoiseDist()) -> float:
    """Sub-exponential norm inf{s: E exp(|eps z|/s) <= e}.

    Uses E exp(a|z|) = 2 exp(a^2/2) Phi(a).
    """
    _require_sub_gaussian(noise)

    def mgf_abs_z(a):
        return 2.0 * np.exp(0.5 * a * a) * special.ndtr(a)

    if noise.kind == "rademacher":
        return _orlicz_root(lambda s: mgf_abs_z(1.0 / s), 0.05)
    if noise.kind == "uniform":
        return _orlicz_root(
            lambda s: panel_quad(lambda x: mgf_abs_z(x / s), 0.0, SQRT3) / SQRT3, 0.1)

    def moment(s):
        if s <= 1.0:
            return np.inf
        rate = 0.5 * (1.0 - 1.0 / (s * s))
        tail = np.sqrt(80.0 / rate)
        # 2 phi(e) * 2 exp(e^2/(2 s^2)) Phi(e/s) with the exponents merged
        f = lambda x: 4.0 * np.exp(-rate * x * x) / np.sqrt(2 * np.pi) * special.ndtr(x / s)
        return panel_quad(f, 0.0, tail)

    return _orlicz_root(moment, 1.0 + 1e-9)


def lower_bound_eta(noise: NoiseDist = NoiseDist()) -> float:
    """sqrt(2 E|eps|^2 + ||eps||_psi2^2) for unit-variance noise."""
    return float(np.sqrt(2.0 + psi2_norm(noise) ** 2))


# --------------------------------------------------------------------------
# reports

@dataclass(frozen=True)
class BoundParams:
    n: int
    p: int
    k: int
    t: float = 0.0
    delta: float = 0.0
    sigma_inv_norm: float = 1.0
    sigma_inv_v_norm: float = 1.0
    noise_scale: float = 1.0
    eta_misspec: float = 1.0
    omega: float = 1.0
    kappa: float = 1.0
    beta_norm: float = 0.0
    # ||Sigma^{-1}(y x - E[y x])||_psi1; enters eta_consistency when that is None
    yx_psi1: float = 1.0
    eta_consistency: Optional[float] = None

    def __post_init__(self):
        if self.n < 1 or self.p < 1 or self.k < 0:
            raise ValueError("need n, p >= 1 and k >= 0")
        if self.k > self.n:
            raise ValueError("k cannot exceed n")

    @property
    def alpha(self) -> float:
        return self.k / self.n

    @property
    def gamma(self) -> float:
        return (self.p - 1) / (self.n - self.k) if self.n > self.k else np.inf

    @property
    def eta_tilde(self) -> float:
        if self.eta_consistency is not None:
            return self.eta_consistency
        sk = np.sqrt(self.kappa)
        w2 = self.omega ** 2
        return (1 + sk) * self.yx_psi1 + sk * w2 * (1 + w2) * self.beta_norm

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alpha"] = self.alpha
        d["gamma"] = float(self.gamma)
        return d


@dataclass(frozen=True)
class BoundReport:
    kind: str
    value: float
    probability_guarantee: Union[float, str]
    params: dict
    constants_assumed: dict = field(default_factory=dict)
    vacuous: bool = False
    extras: dict = field(default_factory=dict)


def _probability(raw: float):
    return float(min(1.0, max(0.0, raw))), bool(raw <= 0.0)


def _log_term(n, k):
    return np.log(EULER_E * n / k)


def asymptotic_lower_bound(alpha: float, sigma_inv_v_norm: float = 1.0,
                           noise: NoiseDist = NoiseDist(),
                           noise_scale: float = 1.0) -> BoundReport:
    """||Sigma^{-1/2} v|| E[eps z 1(eps z > q_{1-alpha})] / (1 - alpha)."""
    if not 0.0 < alpha < 0.5:
        raise AlphaOutOfRange(f"alpha={alpha} outside (0, 1/2)")
    tm = truncated_product_moment(alpha, noise)
    value = sigma_inv_v_norm * noise_scale * tm / (1.0 - alpha)
    return BoundReport(
        kind="asymptotic_lb",
        value=float(value),
        probability_guarantee="asymptotic",
        params={"alpha": alpha, "sigma_inv_v_norm": sigma_inv_v_norm,
                "noise": noise.kind, "noise_scale": noise_scale},
        extras={"truncated_moment": tm},
    )


def q_alpha_t(alpha: float, t: float, noise: NoiseDist = NoiseDist()) -> float:
    """(1-t) E[eps z 1(eps z > q_{1-alpha+t})] - t ||eps z||_psi1."""
    tm = truncated_product_moment(alpha - t, noise) if t > 0 else truncated_product_moment(alpha, noise)
    psi1 = product_psi1_norm(noise) if t > 0 else 0.0
    return (1.0 - t) * tm - t * psi1


def finite_sample_lower_bound(params: BoundParams, noise: NoiseDist = NoiseDist(),
                              c: float = 1.0) -> BoundReport:
    """Non-asymptotic lower bound on Delta_k(v) for the Gaussian-design model.

    value = ||Sigma^{-1/2} v|| [ (1-g)/(1-g-t) (Q/(1-a+3t) - 3 eta delta)
                                 - eta t / (1 - sqrt(g(1-a)) - t)^2 ]
    holding with probability
    1 - 13 exp(-c n t^2) - 2^{-c(n-k-p) delta^2} - 3 exp(-n (1/2 - a)^2).
    """
    a, g, t, d = params.alpha, params.gamma, params.t, params.delta
    if not 0.0 < a < 0.5:
        raise AlphaOutOfRange(f"alpha={a} outside (0, 1/2)")
    if not g < 1.0:
        raise ConditionViolated(f"gamma={g} must be < 1")
    if t < 0 or d < 0 or t >= a:
        raise ConditionViolated("need 0 <= t < alpha and delta >= 0")
    eta = lower_bound_eta(noise)
    Q = q_alpha_t(a, t, noise)

    def evaluate(gam):
        if 1.0 - gam - t <= 0 or 1.0 - np.sqrt(gam * (1 - a)) - t <= 0:
            raise ConditionViolated("t too large for this gamma")
        lead = (1.0 - gam) / (1.0 - gam - t) * (Q / (1.0 - a + 3.0 * t) - 3.0 * eta * d)
        tail = eta * t / (1.0 - np.sqrt(gam * (1.0 - a)) - t) ** 2
        return lead, lead - tail

    lead, core = evaluate(g)
    if lead <= 0:
        raise LeadingTermNonpositive(
            f"leading term {lead:.4g} <= 0; choose smaller t, delta")
    _, core0 = evaluate(0.0)
    scale = params.sigma_inv_v_norm * params.noise_scale
    n, k, p = params.n, params.k, params.p
    raw = (1.0 - 13.0 * np.exp(-c * n * t * t)
           - 2.0 ** (-c * (n - k - p) * d * d)
           - 3.0 * np.exp(-n * (0.5 - a) ** 2))
    prob, vacuous = _probability(raw)
    return BoundReport(
        kind="finite_sample_lb",
        value=float(scale * core),
        probability_guarantee=prob,
        params=params.to_dict() | {"noise": noise.kind},
        constants_assumed={"c": c},
        vacuous=vacuous,
        extras={"probability_raw": float(raw), "Q_alpha_t": float(Q), "eta": eta,
                "value_without_gamma_factor": float(scale * core0)},
    )


def rho(params: BoundParams) -> float:
    n, k, p = params.n, params.k, params.p
    first = np.sqrt(3.0 * k / n * _log_term(n, k)) if k > 0 else 0.0
    return float(first + np.sqrt(p / n) + params.delta)


def gaussian_upper_bound(params: BoundParams) -> BoundReport:
    """Explicit-constant upper bound on max_S ||beta_hat - beta_hat_S|| under
    Gaussian noise and Gaussian design."""
    n, k, p, t, d = params.n, params.k, params.p, params.t, params.delta
    if k > n / 2:
        raise ConditionViolated("need k <= n/2")
    if p > n - k:
        raise ConditionViolated("need p <= n - k")
    r = rho(params)
    if r >= 1.0:
        raise RhoTooLarge(f"rho={r:.4f} >= 1")
    if k == 0:
        value, raw = 0.0, 1.0
    else:
        L = _log_term(n, k)
        pref = params.sigma_inv_norm * params.noise_scale / (1.0 - r) ** 4
        first = (6.0 * k / n * L + 2.0 / n * np.sqrt(k * p * L)) * (1 + t) ** 2
        second = 72.0 * np.sqrt(k) * (k + p) / n ** 1.5 * L ** 1.5 * (1 + t) ** 3
        value = pref * (first + second)
        raw = (1.0 - 6.0 * (EULER_E * n / k) ** (-k * t * t)
               - np.exp(-n / 2.0) - 2.0 * np.exp(-n * d * d / 2.0))
    prob, vacuous = _probability(raw)
    return BoundReport(
        kind="gaussian_ub",
        value=float(value),
        probability_guarantee=prob,
        params=params.to_dict(),
        vacuous=vacuous,
        extras={"rho": r, "probability_raw": float(raw)},
    )


def classify_regime(k: int, p: int, n: int, cutoff: float = 0.1) -> dict:
    """Region I-IV of the (k, p, n) grid: k/n and p/n against ``cutoff``."""
    small_k = k / n < cutoff
    small_p = p / n < cutoff
    region = {(True, True): "I", (True, False): "II",
              (False, True): "III", (False, False): "IV"}[(small_k, small_p)]
    return {"region": region, "robust": small_k, "consistent": small_p}


def rate_bounds(params: BoundParams, kind: str = "misspec_delta",
                C: float = 1.0, c: float = 1.0, cutoff: float = 0.1) -> BoundReport:
    """Rate bounds with absolute constants substituted.

    ``misspec_delta``: C eta (k/n log(en/k) + sqrt(k p log(en/k))/n)(1+t)^2
    under omega^2 (sqrt(k/n log(en/k)) + sqrt(p/n)) <= c.

    ``consistency``: C eta~ (sqrt(p/n)(1+t) + p/n (1+t)^2) under
    omega^2 sqrt(p/n) <= c.
    """
    n, k, p, t, w = params.n, params.k, params.p, params.t, params.omega
    if kind == "misspec_delta":
        if k > n / 2:
            raise ConditionViolated("need k <= n/2")
        L = _log_term(n, k) if k > 0 else 0.0
        cond = w ** 2 * (np.sqrt(k / n * L) + np.sqrt(p / n))
        if cond > c:
            raise ConditionViolated(f"omega^2 (sqrt(k/n log(en/k)) + sqrt(p/n)) = {cond:.4g} > c = {c}")
        value = C * params.eta_misspec * (k / n * L + np.sqrt(k * p * L) / n) * (1 + t) ** 2
        tail = 3.0 * (EULER_E * n / k) ** (-k * t * t) if k > 0 else 0.0
        raw = 1.0 - tail - 4.0 * np.exp(-c * n / w ** 4)
    elif kind == "consistency":
        cond = w ** 2 * np.sqrt(p / n)
        if cond > c:
            raise ConditionViolated(f"omega^2 sqrt(p/n) = {cond:.4g} > c = {c}")
        value = C * params.eta_tilde * (np.sqrt(p / n) * (1 + t) + p / n * (1 + t) ** 2)
        raw = 1.0 - 3.0 * np.exp(-p * t * t) - 3.0 * np.exp(-c * n / w ** 4)
    else:
        raise ValueError(f"unknown rate kind {kind!r}")
    prob, vacuous = _probability(raw)
    return BoundReport(
        kind="misspec_rate_ub" if kind == "misspec_delta" else "consistency_rate",
        value=float(value),
        probability_guarantee=prob,
        params=params.to_dict(),
        constants_assumed={"C": C, "c": c},
        vacuous=vacuous,
        extras={"condition_value": float(cond), "probability_raw": float(raw),
                "regime": classify_regime(k, p, n, cutoff), "regime_cutoff": cutoff},
    )
