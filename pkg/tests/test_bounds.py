import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize, special, stats

from dropaudit.bounds import (
    BoundParams,
    NoiseDist,
    asymptotic_lower_bound,
    classify_regime,
    finite_sample_lower_bound,
    gaussian_upper_bound,
    lower_bound_eta,
    product_normal_cdf,
    product_normal_quantile,
    product_psi1_norm,
    psi2_norm,
    q_alpha_t,
    rate_bounds,
    rho,
    truncated_product_moment,
)
from dropaudit.errors import (
    AlphaOutOfRange,
    ConditionViolated,
    LeadingTermNonpositive,
    RhoTooLarge,
    UnsupportedDistribution,
)

GAUSS = NoiseDist("gaussian")


# product of two independent standard normals has density K0(|w|)/pi
def bessel_cdf(x):
    half = integrate.quad(lambda s: special.k0(s) / np.pi, 0, abs(x), limit=200)[0]
    return 0.5 + math.copysign(half, x)


def bessel_quantile(level):
    return optimize.brentq(lambda x: bessel_cdf(x) - level, -30, 30, xtol=1e-14)


def bessel_tail_moment(alpha):
    q = bessel_quantile(1 - alpha)
    return abs(q) * special.k1(abs(q)) / np.pi


@pytest.mark.parametrize("x", [-2.0, -0.3, 0.5, 1.0, 3.0])
def test_cdf_matches_bessel_oracle(x):
    assert abs(product_normal_cdf(x) - bessel_cdf(x)) < 1e-9


def test_cdf_frozen_value_and_limits():
    assert abs(product_normal_cdf(1.0) - 0.8955031684976739) < 1e-10
    assert product_normal_cdf(0.0) == pytest.approx(0.5, abs=1e-14)
    assert product_normal_cdf(60.0) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("alpha", [0.01, 0.1, 0.25, 0.4])
def test_truncated_moment_matches_bessel_oracle(alpha):
    assert truncated_product_moment(alpha) == pytest.approx(bessel_tail_moment(alpha), rel=1e-8)


def test_truncated_moment_special_values():
    assert abs(truncated_product_moment(0.5) - 1 / np.pi) < 1e-9
    assert truncated_product_moment(1.0) == 0.0
    r = truncated_product_moment(0.001) / (0.001 * np.log(1000))
    assert 0.7 <= r <= 1.4


def test_quantile_inverts_cdf():
    for level in (0.05, 0.5, 0.9, 0.999):
        assert abs(product_normal_cdf(product_normal_quantile(level)) - level) < 1e-9
    assert abs(product_normal_quantile(0.5)) < 1e-9


def test_rademacher_noise_reduces_to_normal():
    rad = NoiseDist("rademacher")
    assert product_normal_cdf(1.3, rad) == pytest.approx(stats.norm.cdf(1.3), abs=1e-10)
    a = 0.1
    want = stats.norm.pdf(stats.norm.ppf(1 - a))
    assert truncated_product_moment(a, rad) == pytest.approx(want, rel=1e-8)


def test_uniform_noise_against_monte_carlo():
    rng = np.random.default_rng(11)
    u = NoiseDist("uniform")
    w = u.sample(rng, 2_000_000) * rng.standard_normal(2_000_000)
    assert product_normal_cdf(0.7, u) == pytest.approx(np.mean(w <= 0.7), abs=2e-3)


def test_heavy_tails_rejected():
    with pytest.raises(UnsupportedDistribution):
        psi2_norm(NoiseDist("student_t", 5))


def test_psi2_gaussian_definition():
    s = psi2_norm(GAUSS)
    # E exp(e^2/s^2) = (1 - 2/s^2)^(-1/2) for a standard normal
    assert (1 - 2 / s ** 2) ** -0.5 == pytest.approx(np.e, rel=1e-12)
    assert lower_bound_eta(GAUSS) == pytest.approx(np.sqrt(2 + s * s))


def test_psi2_uniform_definition():
    s = psi2_norm(NoiseDist("uniform"))
    m = integrate.quad(lambda x: np.exp(x * x / s ** 2), 0, np.sqrt(3))[0] / np.sqrt(3)
    assert m == pytest.approx(np.e, rel=1e-9)


def test_psi1_gaussian_against_direct_quadrature():
    s = product_psi1_norm(GAUSS)
    assert s == pytest.approx(1.23678, abs=1e-5)
    # E exp(|e z|/s) = E_e[2 exp(e^2/(2 s^2)) Phi(|e|/s)]
    rate = 0.5 * (1 - 1 / s ** 2)
    f = lambda e: 4 * np.exp(-rate * e * e) / np.sqrt(2 * np.pi) * special.ndtr(e / s)
    m = integrate.quad(f, 0, np.inf, limit=200)[0]
    assert m == pytest.approx(np.e, rel=1e-8)


def test_asymptotic_lb():
    r = asymptotic_lower_bound(0.25)
    assert r.value == pytest.approx(4 / 3 * truncated_product_moment(0.25), rel=1e-14)
    assert r.value == pytest.approx(0.3773502, abs=1e-6)
    assert r.probability_guarantee == "asymptotic"
    vals = [asymptotic_lower_bound(a).value for a in np.arange(0.01, 0.31, 0.01)]
    assert np.all(np.diff(vals) > 0)
    assert asymptotic_lower_bound(1e-6).value < 1e-4
    with pytest.raises(AlphaOutOfRange):
        asymptotic_lower_bound(0.5)


def test_finite_lb_continuity_and_slack():
    a = asymptotic_lower_bound(0.25).value
    near = finite_sample_lower_bound(BoundParams(n=10**6, p=1, k=250000, t=1e-7, delta=1e-7))
    assert near.value == pytest.approx(a, rel=1e-5)
    r = finite_sample_lower_bound(BoundParams(n=1000, p=2, k=250, t=0.02, delta=0.02))
    assert r.value < a
    assert r.constants_assumed == {"c": 1.0}


def test_finite_lb_transcription():
    prm = BoundParams(n=2000, p=2, k=500, t=0.02, delta=0.02)
    r = finite_sample_lower_bound(prm)
    a, g, t, d = 0.25, 1 / 1500, 0.02, 0.02
    eta = np.sqrt(2 + 2 / (1 - np.exp(-2)))
    Q = (1 - t) * bessel_tail_moment(a - t) - t * product_psi1_norm()
    want = ((1 - g) / (1 - g - t) * (Q / (1 - a + 3 * t) - 3 * eta * d)
            - eta * t / (1 - np.sqrt(g * (1 - a)) - t) ** 2)
    assert r.value == pytest.approx(want, rel=1e-8)
    assert r.extras["Q_alpha_t"] == pytest.approx(q_alpha_t(a, t), rel=1e-14)
    raw = 1 - 13 * np.exp(-2000 * t * t) - 2 ** (-(1498) * d * d) - 3 * np.exp(-2000 * 0.0625)
    assert r.extras["probability_raw"] == pytest.approx(raw, rel=1e-12)
    # with c = 1 the guarantee is vacuous here; reported, never hidden
    assert r.vacuous and r.probability_guarantee == 0.0


def test_finite_lb_errors():
    with pytest.raises(LeadingTermNonpositive):
        finite_sample_lower_bound(BoundParams(n=2000, p=2, k=500, t=0.02, delta=0.5))
    with pytest.raises(ConditionViolated):
        finite_sample_lower_bound(BoundParams(n=2000, p=2, k=500, t=0.3, delta=0.0))


def eq7_again(n, k, p, t, delta, s_inv=1.0, sig=1.0):
    lg = math.log(math.e * n / k)
    r = math.sqrt(3 * k / n * lg) + math.sqrt(p / n) + delta
    bracket = ((6 * k / n) * lg + (2 / n) * math.sqrt(k * p * lg)) * (1 + t) ** 2
    bracket += 72 * math.sqrt(k) * (k + p) / n ** 1.5 * lg ** 1.5 * (1 + t) ** 3
    return s_inv * sig / (1 - r) ** 4 * bracket


def test_gaussian_ub_transcriptions_agree():
    r = gaussian_upper_bound(BoundParams(n=1000, k=10, p=5, t=1.0, delta=0.1))
    assert abs(r.value - eq7_again(1000, 10, 5, 1.0, 0.1)) <= 1e-12 * r.value
    raw = 1 - 6 * (np.e * 100) ** (-10) - np.exp(-500) - 2 * np.exp(-1000 * 0.01 / 2)
    assert r.extras["probability_raw"] == pytest.approx(raw, rel=1e-12)


def test_gaussian_ub_monotone_in_k():
    vals = [gaussian_upper_bound(BoundParams(n=10**4, k=k, p=10, t=0.5, delta=0.1)).value
            for k in range(1, 101)]
    assert np.all(np.diff(vals) >= 0)


def test_gaussian_ub_edge_cases():
    r = gaussian_upper_bound(BoundParams(n=100, k=0, p=2, t=0.1, delta=0.1))
    assert r.value == 0.0 and r.probability_guarantee == 1.0
    with pytest.raises(RhoTooLarge):
        gaussian_upper_bound(BoundParams(n=100, k=40, p=2, t=0.1, delta=0.1))
    assert rho(BoundParams(n=100, k=0, p=4, delta=0.1)) == pytest.approx(0.3)


def test_rate_bounds():
    small = rate_bounds(BoundParams(n=10**6, k=1, p=1))
    assert small.value < 1e-4
    assert small.extras["regime"]["region"] == "I"
    cons = rate_bounds(BoundParams(n=10**4, k=0, p=100, eta_consistency=1.0), "consistency")
    assert cons.value == pytest.approx(0.11, rel=1e-12)
    assert cons.constants_assumed == {"C": 1.0, "c": 1.0}
    with pytest.raises(ConditionViolated):
        rate_bounds(BoundParams(n=100, k=1, p=90, omega=2.0), "consistency")


def test_classify_regime():
    n = 1000
    assert classify_regime(n // 4, n // 4, n) == {"region": "IV", "robust": False, "consistent": False}
    assert classify_regime(5, 5, n)["region"] == "I"
    assert classify_regime(5, 300, n)["region"] == "II"
    assert classify_regime(300, 5, n)["region"] == "III"


@settings(max_examples=40, deadline=None)
@given(x=st.floats(0.0, 8.0))
def test_cdf_symmetry(x):
    assert product_normal_cdf(x) + product_normal_cdf(-x) == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.005, 0.49), b=st.floats(0.005, 0.49))
def test_truncated_moment_monotone(a, b):
    lo, hi = sorted((a, b))
    if hi - lo > 1e-6:
        assert truncated_product_moment(lo) < truncated_product_moment(hi)
