"""
Generalized hyperbolic (GHYP) distribution in the (lambda, alpha, beta,
scale, location) parametrization.

The density is

    f(x) = (alpha^2 - beta^2)^(lam/2) / (sqrt(2 pi) alpha^(lam - 1/2) scale^lam K_lam(zeta))
           * K_(lam - 1/2)(alpha q) exp(beta (x - location)) q^(lam - 1/2)

with ``q = sqrt(scale^2 + (x - location)^2)`` and
``zeta = scale * sqrt(alpha^2 - beta^2)``. The moment generating function
is a Bessel ratio defined for ``|beta + t| < alpha``; continuing it to
``MGF(i u)`` gives the characteristic function on the strip
``beta - alpha < Im(u) < beta + alpha``.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import kve

from .bessel import log_bessel_k
from .errors import ParameterDomainError, StripError
from .gig import gig_sample

#: Relative margin keeping ``|beta|`` strictly inside ``alpha``.
BETA_MARGIN = 1e-10

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Strip:
    """Open interval ``(lower, upper)`` of admissible imaginary parts."""

    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < 0.0 < self.upper:
            raise ParameterDomainError(f"strip must contain 0, got ({self.lower}, {self.upper})")

    def contains(self, y):
        return self.lower < y < self.upper

    def intersect(self, other):
        return Strip(max(self.lower, other.lower), min(self.upper, other.upper))

    def check(self, u):
        """Raise ``StripError`` unless every ``Im(u)`` lies inside the strip."""
        im = np.imag(np.asarray(u))
        bad = (im <= self.lower) | (im >= self.upper)
        if np.any(bad):
            raise StripError(float(np.atleast_1d(im)[np.atleast_1d(bad)][0]), self.lower, self.upper)


@dataclass(frozen=True)
class GhypParams:
    """Parameters of one univariate GHYP law."""

    lam: float
    alpha: float
    beta: float
    scale: float
    location: float = 0.0

    def __post_init__(self):
        for name in ("lam", "alpha", "beta", "scale", "location"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterDomainError(f"{name} must be finite, got {value!r}")
        if self.alpha <= 0.0:
            raise ParameterDomainError(f"alpha must be positive, got {self.alpha!r}")
        if self.scale <= 0.0:
            raise ParameterDomainError(f"scale must be positive, got {self.scale!r}")
        if abs(self.beta) >= self.alpha * (1.0 - BETA_MARGIN):
            raise ParameterDomainError(
                f"|beta| must be below alpha, got beta={self.beta!r}, alpha={self.alpha!r}")

    @property
    def gamma(self):
        """``sqrt(alpha^2 - beta^2)``."""
        return math.sqrt((self.alpha - self.beta) * (self.alpha + self.beta))

    @property
    def zeta(self):
        return self.scale * self.gamma

    @property
    def strip(self):
        return Strip(self.beta - self.alpha, self.beta + self.alpha)

    def with_location(self, location):
        return replace(self, location=float(location))


def log_kv(order, x):
    """
    log K_order(x) for real ``x > 0`` or complex ``x`` with ``Re(x) > 0``,
    vectorized.

    Uses the exponentially scaled SciPy (AMOS) kernel and falls back to
    :func:`regimerisk.bessel.log_bessel_k` where that over/underflows or
    reports a loss of precision.
    """
    cplx = np.iscomplexobj(x)
    x = np.asarray(x, dtype=complex if cplx else float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.log(kve(order, x)) - x
    bad = ~np.isfinite(out)
    if np.any(bad):
        if out.ndim == 0:
            value = log_bessel_k(order, x[()])
            return complex(value) if cplx else float(value)
        out = np.array(out, copy=True)
        out[bad] = log_bessel_k(order, x[bad])
    return out


def _log_norm_const(p):
    g2 = (p.alpha - p.beta) * (p.alpha + p.beta)
    return (0.5 * p.lam * math.log(g2) - _LOG_SQRT_2PI - (p.lam - 0.5) * math.log(p.alpha)
            - p.lam * math.log(p.scale) - float(log_kv(p.lam, p.zeta)))


def ghyp_logpdf(p, x):
    """Log density at ``x`` (scalar or array)."""
    x = np.asarray(x, dtype=float)
    d = x - p.location
    q = np.hypot(p.scale, d)
    return (_log_norm_const(p) + log_kv(p.lam - 0.5, p.alpha * q)
            + p.beta * d + (p.lam - 0.5) * np.log(q))


def ghyp_pdf(p, x):
    return np.exp(ghyp_logpdf(p, x))


def mgf_interval(p):
    """Open interval of real ``t`` on which the MGF is finite."""
    return (-p.alpha - p.beta, p.alpha - p.beta)


def ghyp_log_mgf(p, t):
    lo, hi = mgf_interval(p)
    t_arr = np.asarray(t, dtype=float)
    bad = (t_arr <= lo) | (t_arr >= hi)
    if np.any(bad):
        raise StripError(float(np.atleast_1d(t_arr)[np.atleast_1d(bad)][0]), lo, hi)
    bt = p.beta + t_arr
    w = (p.alpha - bt) * (p.alpha + bt)
    g2 = (p.alpha - p.beta) * (p.alpha + p.beta)
    return (t_arr * p.location + 0.5 * p.lam * (math.log(g2) - np.log(w))
            + log_kv(p.lam, p.scale * np.sqrt(w)) - log_kv(p.lam, p.zeta))


def ghyp_mgf(p, t):
    """
    Moment generating function ``E[exp(t X)]``.

    Raises
    ------
    StripError
        If ``t`` is outside ``(-alpha - beta, alpha - beta)``; the interval
        is carried on the exception.
    """
    return np.exp(ghyp_log_mgf(p, t))


def ghyp_log_cf(p, u):
    """Log characteristic function at complex ``u`` inside ``p.strip``."""
    u = np.asarray(u, dtype=complex)
    p.strip.check(u)
    bt = p.beta + 1j * u
    w = (p.alpha - bt) * (p.alpha + bt)
    g2 = (p.alpha - p.beta) * (p.alpha + p.beta)
    norm = float(log_kv(p.lam, p.zeta))
    return (1j * u * p.location + 0.5 * p.lam * (math.log(g2) - np.log(w))
            + log_kv(p.lam, p.scale * np.sqrt(w)) - norm)


def ghyp_cf(p, u):
    """
    Characteristic function ``E[exp(i u X)]``, analytically continued.

    For ``u = v + i d`` this equals ``MGF(i v - d)``; it is defined for
    ``beta - alpha < d < beta + alpha``.
    """
    return np.exp(ghyp_log_cf(p, u))


def mixing_mean(p):
    """Mean of the GIG mixing variable; the variance of the ``beta = 0`` law."""
    return p.scale / p.gamma * math.exp(float(log_kv(p.lam + 1.0, p.zeta)) - float(log_kv(p.lam, p.zeta)))


def mean_shift(p):
    """``E[X] - location``; depends only on the non-location parameters."""
    if p.beta == 0.0:
        return 0.0
    return p.beta * mixing_mean(p)


def ghyp_mean(p):
    return p.location + mean_shift(p)


def equal_mean_location(shape, target_mean):
    """
    Location giving ``shape`` (whose own location is ignored) the mean
    ``target_mean``.
    """
    return float(target_mean) - mean_shift(shape)


def ghyp_sample(p, count, seed=None):
    """
    Draw i.i.d. variates via the normal mean-variance mixture
    ``X = location + beta W + sqrt(W) Z`` with ``W ~ GIG(lam, scale^2, gamma^2)``.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    rng = np.random.default_rng(seed)
    w = gig_sample(p.lam, p.scale * p.scale, p.gamma * p.gamma, count, rng)
    z = rng.standard_normal(w.size)
    return p.location + p.beta * w + np.sqrt(w) * z
