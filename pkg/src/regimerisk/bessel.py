"""
Modified Bessel function of the second kind, K_nu(z).

Real order, complex argument with ``Re(z) > 0``. The order is reduced to
``mu = nu - n`` with ``|mu| <= 1/2``; ``K_mu`` and ``K_{mu+1}`` come from
Temme's series for small ``|z|`` or Steed's continued fraction (CF2) for
large ``|z|``, and forward recurrence (stable for K) climbs to ``nu``.
Everything is carried in log space so that large orders or arguments do
not overflow before the caller decides what to do with the value.
"""

import math

import numpy as np
from scipy.special import rgamma

from .errors import BesselRangeError

#: Arguments with ``|z|`` at or below this radius use Temme's series.
SERIES_RADIUS = 2.0

_EPS = 1e-16
_MAX_ITER = 5000
_EULER = 0.57721566490153286061

# odd-power Taylor coefficients of 1/Gamma(1+x), x^1, x^3, ..., x^11
_RGAMMA_ODD = (
    0.57721566490153286061,
    -0.042002635034095235529,
    -0.042197734555544336748,
    0.0072189432466630995424,
    -0.00021524167411495097282,
    -0.000020134854780788238656,
)


def _temme_gammas(mu):
    """Return (gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu))."""
    gampl = float(rgamma(1.0 + mu))
    gammi = float(rgamma(1.0 - mu))
    if abs(mu) < 0.1:
        m2 = mu * mu
        gam1 = -sum(c * m2**j for j, c in enumerate(_RGAMMA_ODD))
    else:
        gam1 = (gammi - gampl) / (2.0 * mu)
    gam2 = 0.5 * (gammi + gampl)
    return gam1, gam2, gampl, gammi


def _temme_series(mu, z):
    """K_mu(z), K_{mu+1}(z) for |z| <= SERIES_RADIUS, |mu| <= 1/2."""
    gam1, gam2, gampl, gammi = _temme_gammas(mu)
    x2 = 0.5 * z
    pimu = math.pi * mu
    fact = 1.0 if mu == 0.0 else pimu / math.sin(pimu)
    d = -np.log(x2)
    e = mu * d
    small = np.abs(e) < 1e-8
    e_safe = np.where(small, 1.0, e)
    fact2 = np.where(small, 1.0 + e * e / 6.0, np.sinh(e_safe) / e_safe)
    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
    total = ff
    ee = np.exp(e)
    p = 0.5 * ee / gampl
    q = 0.5 / (ee * gammi)
    c = np.ones_like(z)
    dd = x2 * x2
    total1 = p
    for i in range(1, _MAX_ITER):
        ff = (i * ff + p + q) / (i * i - mu * mu)
        c = c * dd / i
        p = p / (i - mu)
        q = q / (i + mu)
        term = c * ff
        total = total + term
        total1 = total1 + c * (p - i * ff)
        if np.all(np.abs(term) < np.abs(total) * _EPS):
            break
    return total, total1 * 2.0 / z


def _steed_cf2(mu, z):
    """exp(z) K_mu(z), exp(z) K_{mu+1}(z) for |z| > SERIES_RADIUS."""
    b = 2.0 * (1.0 + z)
    d = 1.0 / b
    h = d
    delh = d
    q1 = np.zeros_like(z)
    q2 = np.ones_like(z)
    a1 = 0.25 - mu * mu
    q = a1
    c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(1, _MAX_ITER):
        a = a - 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        if np.all(np.abs(dels) < np.abs(s) * _EPS):
            break
    h = a1 * h
    kmu = np.sqrt(math.pi / (2.0 * z)) / s
    kmu1 = kmu * (mu + z + 0.5 - h) / z
    return kmu, kmu1


def log_bessel_k(order, z):
    """
    Natural log of K_order(z), elementwise over ``z``.

    Parameters
    ----------
    order : float
        Real order; ``K_{-nu} = K_nu`` so the sign is irrelevant.
    z : array_like
        Real or complex argument(s) with positive real part.

    Returns
    -------
    ndarray or scalar
        Real log for real input; for complex input the principal-branch
        complex log (``log|K| + i arg K``), so ``exp`` of it is ``K``.
    """
    nu = abs(float(order))
    z_in = np.asarray(z)
    is_complex = np.iscomplexobj(z_in)
    zz = np.atleast_1d(z_in.astype(complex if is_complex else float))
    if np.any(~(zz.real > 0.0)):
        bad = zz[~(zz.real > 0.0)][0]
        raise ValueError(f"Bessel K requires Re(z) > 0, got {bad!r}")

    n = int(math.floor(nu + 0.5))
    mu = nu - n
    dtype = complex if is_complex else float
    kmu = np.empty(zz.shape, dtype=dtype)
    kmu1 = np.empty(zz.shape, dtype=dtype)
    # log of the common factor multiplying kmu, kmu1
    logscale = np.zeros(zz.shape, dtype=dtype)

    near = np.abs(zz) <= SERIES_RADIUS
    if np.any(near):
        kmu[near], kmu1[near] = _temme_series(mu, zz[near])
    far = ~near
    if np.any(far):
        kmu[far], kmu1[far] = _steed_cf2(mu, zz[far])
        logscale[far] = -zz[far]

    two_over_z = 2.0 / zz
    for i in range(1, n + 1):
        knew = (mu + i) * two_over_z * kmu1 + kmu
        kmu = kmu1
        kmu1 = knew
        big = np.abs(kmu1) > 1e250
        if np.any(big):
            # rescale both recurrence terms to stay in range
            norm = np.where(big, np.abs(kmu1), 1.0)
            kmu = kmu / norm
            kmu1 = kmu1 / norm
            logscale = logscale + np.log(norm)

    out = np.log(kmu) + logscale
    if not is_complex:
        out = out.real
    if np.ndim(z_in) == 0:
        return out[0]
    return out


def bessel_k(order, z):
    """
    K_order(z) in linear space.

    Raises
    ------
    BesselRangeError
        If the value overflows or underflows double precision at some
        argument; the first offending argument is attached.

    Examples
    --------
    >>> round(float(bessel_k(0.5, 1.0)), 12)
    0.461068504447
    """
    logk = np.atleast_1d(log_bessel_k(order, z))
    mag = logk.real
    bad = (mag > 709.0) | (mag < -708.0)
    if np.any(bad):
        arg = np.atleast_1d(np.asarray(z))[bad][0]
        raise BesselRangeError(order, arg)
    out = np.exp(logk)
    return out[0] if np.ndim(z) == 0 else out
