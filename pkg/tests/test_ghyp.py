import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.special import kv

from regimerisk.errors import ParameterDomainError, StripError
from regimerisk.ghyp import (GhypParams, Strip, equal_mean_location, ghyp_cf, ghyp_logpdf, ghyp_mean,
                             ghyp_mgf, ghyp_pdf, ghyp_sample, mean_shift)
from regimerisk.quadrature import integrate

ASYM = GhypParams(1.3, 2.0, -0.7, 1.1, 0.4)
NIG = GhypParams(-0.5, 3.0, 1.0, 0.8, -0.2)


def nig_pdf(alpha, beta, delta, mu, x):
    gamma = math.sqrt(alpha**2 - beta**2)
    q = np.sqrt(delta**2 + (x - mu) ** 2)
    return alpha * delta * kv(1, alpha * q) / (math.pi * q) * np.exp(delta * gamma + beta * (x - mu))


@st.composite
def params(draw, lam=st.floats(-3.0, 3.0)):
    alpha = draw(st.floats(0.5, 50.0))
    beta = draw(st.floats(-0.9, 0.9)) * alpha
    return GhypParams(draw(lam), alpha, beta, draw(st.floats(0.05, 5.0)), draw(st.floats(-2.0, 2.0)))


# --- construction -----------------------------------------------------------

def test_domain_validation():
    with pytest.raises(ParameterDomainError):
        GhypParams(0.0, -1.0, 0.0, 1.0)
    with pytest.raises(ParameterDomainError):
        GhypParams(0.0, 1.0, 0.0, 0.0)
    with pytest.raises(ParameterDomainError):
        GhypParams(0.0, 1.0, 1.0, 1.0)
    with pytest.raises(ParameterDomainError):
        GhypParams(0.0, 1.0, -1.0 + 1e-12, 1.0)
    with pytest.raises(ParameterDomainError):
        GhypParams(math.nan, 1.0, 0.0, 1.0)
    p = GhypParams(0.0, 1.0, 0.999, 1.0)
    assert p.strip == Strip(0.999 - 1.0, 0.999 + 1.0)
    with pytest.raises(ParameterDomainError):
        Strip(0.1, 1.0)


@given(params())
@settings(max_examples=50, deadline=None)
def test_strip_contains_zero(p):
    assert p.strip.lower < 0.0 < p.strip.upper


# --- density ----------------------------------------------------------------

def test_pdf_against_reference(oracles):
    for entry in oracles["ghyp_pdf"].values():
        p = GhypParams(*entry["params"])
        xs, ref = np.array(entry["points"]).T
        np.testing.assert_allclose(ghyp_pdf(p, xs), ref, rtol=1e-12)
        assert ghyp_mean(p) == pytest.approx(entry["mean"], rel=1e-12, abs=1e-15)


def test_nig_closed_form():
    x = np.linspace(-4.0, 4.0, 41)
    np.testing.assert_allclose(ghyp_pdf(NIG, x), nig_pdf(3.0, 1.0, 0.8, -0.2, x), rtol=1e-12)


@pytest.mark.parametrize("p", [ASYM, NIG, GhypParams(-0.5, 150.0, -5.0, 0.012, 3e-4),
                               GhypParams(4.0, 20.0, 10.0, 0.3), GhypParams(-2.5, 0.8, 0.1, 2.0)])
def test_density_integrates_to_one(p):
    s = math.sqrt(mean_shift(p) ** 2 + p.scale**2)
    total, _ = integrate(lambda x: ghyp_pdf(p, x), -np.inf, np.inf, abstol=1e-12,
                         breakpoints=(p.location,), scale=s)
    assert total == pytest.approx(1.0, abs=1e-8)
    # finite window of the spec: [mu - 40 delta k, mu + 40 delta k]
    k = 1.0 + 1.0 / (p.scale * p.gamma)
    part, _ = integrate(lambda x: ghyp_pdf(p, x), p.location - 40 * p.scale * k,
                        p.location + 40 * p.scale * k, abstol=1e-12, breakpoints=(p.location,))
    assert part == pytest.approx(1.0, abs=1e-8)


@given(params(), st.floats(-20, 20))
@settings(max_examples=80, deadline=None)
def test_pdf_is_exp_logpdf_and_nonnegative(p, x):
    lp = ghyp_logpdf(p, x)
    assert math.isfinite(lp)
    assert ghyp_pdf(p, x) == pytest.approx(math.exp(lp), rel=1e-15, abs=0.0)
    assert ghyp_pdf(p, x) >= 0.0


@given(params(), st.floats(0.0, 10.0))
@settings(max_examples=60, deadline=None)
def test_symmetric_when_beta_zero(p, d):
    q = GhypParams(p.lam, p.alpha, 0.0, p.scale, p.location)
    assert ghyp_pdf(q, q.location + d) == pytest.approx(ghyp_pdf(q, q.location - d), rel=1e-12)


@pytest.mark.parametrize("p", [ASYM, NIG, GhypParams(-3.0, 5.0, 2.0, 1.0)])
def test_tail_slopes(p):
    # log f(x) - [(lam - 1) log|x| + (-alpha + beta) x] flattens out; mirrored on the left
    def resid(x, sign):
        return ghyp_logpdf(p, x) - ((p.lam - 1) * math.log(abs(x)) + (-sign * p.alpha + p.beta) * x)

    for sign in (1.0, -1.0):
        drift = []
        for x0 in (40.0, 80.0, 160.0):
            drift.append(abs(resid(sign * 2 * x0, sign) - resid(sign * x0, sign)))
        assert drift[-1] < 0.01
        assert drift[0] > drift[1] > drift[2]


def test_normal_limit_monotone():
    sigma = 0.7
    x = np.linspace(-4 * sigma, 4 * sigma, 401)
    phi = stats.norm.pdf(x, scale=sigma)
    dist = []
    for delta in (10.0, 1e2, 1e3):
        p = GhypParams(1.0, delta / sigma**2, 0.0, delta)
        dist.append(np.max(np.abs(ghyp_pdf(p, x) - phi)))
    assert dist[0] > dist[1] > dist[2]
    assert dist[2] < 1e-3


# --- transforms -------------------------------------------------------------

def test_mgf_normalization_and_nig_form():
    assert ghyp_mgf(ASYM, 0.0) == pytest.approx(1.0, abs=1e-14)
    alpha, beta, delta, mu = 3.0, 1.0, 0.8, -0.2
    t = np.array([-3.5, -1.0, 0.3, 1.5])
    nig = np.exp(mu * t + delta * (math.sqrt(alpha**2 - beta**2) - np.sqrt(alpha**2 - (beta + t) ** 2)))
    np.testing.assert_allclose(ghyp_mgf(NIG, t), nig, rtol=1e-12)


def test_mgf_domain_error_carries_interval():
    with pytest.raises(StripError) as info:
        ghyp_mgf(NIG, 2.5)
    assert (info.value.lower, info.value.upper) == pytest.approx((-4.0, 2.0))


def test_mgf_derivative_matches_monte_carlo():
    x = ghyp_sample(ASYM, 10**6, 5)
    h = 1e-5
    deriv = (ghyp_mgf(ASYM, h) - ghyp_mgf(ASYM, -h)) / (2 * h)
    se = x.std() / 1e3
    assert abs(deriv - x.mean()) < 3 * se
    assert deriv == pytest.approx(ghyp_mean(ASYM), rel=1e-8)


def test_cf_basic_identities():
    assert ghyp_cf(ASYM, 0.0) == pytest.approx(1.0, abs=1e-14)
    t = np.linspace(-30, 30, 61)
    c = ghyp_cf(ASYM, t)
    np.testing.assert_allclose(ghyp_cf(ASYM, -t), np.conj(c), rtol=1e-13, atol=1e-16)
    # continuation: cf(v + i d) = MGF(i v - d); real slice t = i s gives MGF(-s)
    for s in (-0.9, 0.5, 1.2):
        assert complex(ghyp_cf(ASYM, 1j * s)) == pytest.approx(ghyp_mgf(ASYM, -s), rel=1e-12)


def test_cf_against_quadrature(oracles):
    p = GhypParams(*oracles["ghyp_cf"]["params"])
    for t, re, im in oracles["ghyp_cf"]["values"]:
        assert complex(ghyp_cf(p, t)) == pytest.approx(complex(re, im), abs=1e-11)


def test_cf_strip_error():
    with pytest.raises(StripError):
        ghyp_cf(ASYM, 1.0 + 1.3j)     # strip is (-2.7, 1.3)
    with pytest.raises(StripError):
        ghyp_cf(ASYM, np.array([0.0, -2.8j]))
    assert np.isfinite(ghyp_cf(ASYM, 5.0 + 1.29j))


@given(params(), st.floats(-1e3, 1e3))
@settings(max_examples=80, deadline=None)
def test_cf_modulus_bounded(p, t):
    assert abs(complex(ghyp_cf(p, t))) <= 1.0 + 1e-12


def test_pdf_recovered_from_cf():
    p = ASYM
    for x in (-2.0, -0.5, 0.4, 1.0, 3.0):
        # f(x) = (1/pi) Int_0^inf Re(exp(-i t x) cf(t)) dt
        val, _ = integrate(lambda t: (np.exp(-1j * t * x) * ghyp_cf(p, t)).real, 0.0, np.inf,
                           abstol=1e-11, scale=5.0)
        assert val / math.pi == pytest.approx(float(ghyp_pdf(p, x)), abs=1e-6)


# --- moments and location ---------------------------------------------------

def test_mean_basic():
    p = GhypParams(0.7, 3.0, 0.0, 1.0, 2.5)
    assert ghyp_mean(p) == 2.5
    q = ASYM.with_location(0.0)
    assert ghyp_mean(ASYM) - ghyp_mean(q) == pytest.approx(ASYM.location, abs=1e-15)
    x = ghyp_sample(ASYM, 10**6, 11)
    assert abs(x.mean() - ghyp_mean(ASYM)) < 4 * x.std() / 1e3


def test_equal_mean_location():
    shape = GhypParams(-0.5, 2.0, 0.0, 1.0)
    assert equal_mean_location(shape, 0.3) == 0.3
    for shape in (ASYM, NIG, GhypParams(2.0, 10.0, -9.0, 0.05)):
        loc = equal_mean_location(shape, -0.123)
        assert ghyp_mean(shape.with_location(loc)) == pytest.approx(-0.123, abs=1e-12)
    loc = equal_mean_location(ASYM, 0.0)
    x = ghyp_sample(ASYM.with_location(loc), 10**6, 4)
    assert abs(x.mean()) < 4 * x.std() / 1e3


# --- sampling ---------------------------------------------------------------

def test_sampling_deterministic():
    np.testing.assert_array_equal(ghyp_sample(NIG, 100, 3), ghyp_sample(NIG, 100, 3))
    assert not np.array_equal(ghyp_sample(NIG, 100, 3), ghyp_sample(NIG, 100, 4))


def test_symmetric_sample_skewness():
    p = GhypParams(-0.5, 2.0, 0.0, 1.0)
    x = ghyp_sample(p, 10**6, 9)
    # Monte Carlo band from 100 independent batches
    batch = stats.skew(x.reshape(100, -1), axis=1)
    se = batch.std(ddof=1) / 10.0
    assert abs(stats.skew(x)) < 4 * se


@pytest.mark.parametrize("p", [ASYM, NIG, GhypParams(-2.0, 1.0, 0.3, 0.5)])
def test_sample_ks_against_quadrature_cdf(p):
    x = np.sort(ghyp_sample(p, 10**5, 21))
    grid = np.quantile(x, np.linspace(0.005, 0.995, 60))
    s = 3.0 * math.sqrt(p.scale**2 + mean_shift(p) ** 2)
    cdf = np.array([integrate(lambda t: ghyp_pdf(p, t), -np.inf, g, abstol=1e-12, scale=s)[0]
                    for g in grid])
    emp = np.searchsorted(x, grid, side="right") / x.size
    ks = np.max(np.abs(emp - cdf))
    assert ks < 1.628 / math.sqrt(x.size)
