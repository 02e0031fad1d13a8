"""
Generalized inverse Gaussian sampling.

GIG(lam, chi, psi) has density proportional to
``x**(lam - 1) * exp(-(chi / x + psi * x) / 2)`` on ``x > 0``. Sampling
works in the two-parameter form ``x**(lam-1) exp(-omega/2 (x + 1/x))`` with
``omega = sqrt(chi * psi)``, then rescales by ``sqrt(chi / psi)``; negative
``lam`` uses ``1/X`` of the ``-lam`` variate.

The general-purpose generator is ratio-of-uniforms with the bounding
rectangle shifted to the mode (Dagpunar; Lehner), which is valid for every
parameter pair. Two cheaper variants from Hoermann & Leydold (2014) take
over where the shifted rectangle gets loose: ratio-of-uniforms without
shift for moderate ``omega``, and a three-piece rejection hat for
``lam < 1`` with tiny ``omega``.
"""

import math

import numpy as np


def _mode(lam, omega):
    if lam >= 1.0:
        return (math.sqrt((lam - 1.0) ** 2 + omega * omega) + (lam - 1.0)) / omega
    return omega / (math.sqrt((1.0 - lam) ** 2 + omega * omega) + (1.0 - lam))


def _log_sqrt_density(x, t, s):
    return t * np.log(x) - s * (x + 1.0 / x)


def _rou_shift(rng, n, lam, omega):
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _mode(lam, omega)
    nc = t * math.log(xm) - s * (xm + 1.0 / xm)

    # u-extent of the minimal bounding rectangle: roots of a cubic (Cardano)
    a = -(2.0 * (lam + 1.0) / omega + xm)
    b = 2.0 * (lam - 1.0) * xm / omega - 1.0
    c = xm
    p = b - a * a / 3.0
    q = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    fi = math.acos(-q / (2.0 * math.sqrt(-(p**3) / 27.0)))
    fak = 2.0 * math.sqrt(-p / 3.0)
    y1 = fak * math.cos(fi / 3.0) - a / 3.0
    y2 = fak * math.cos(fi / 3.0 + 4.0 / 3.0 * math.pi) - a / 3.0
    uplus = (y1 - xm) * math.exp(t * math.log(y1) - s * (y1 + 1.0 / y1) - nc)
    uminus = (y2 - xm) * math.exp(t * math.log(y2) - s * (y2 + 1.0 / y2) - nc)

    def draw(m):
        u = uminus + rng.random(m) * (uplus - uminus)
        v = rng.random(m)
        x = u / v + xm
        with np.errstate(invalid="ignore", divide="ignore"):
            keep = (x > 0.0) & (np.log(v) <= _log_sqrt_density(np.where(x > 0, x, 1.0), t, s) - nc)
        return x[keep]

    return _collect(draw, n)


def _rou_noshift(rng, n, lam, omega):
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _mode(lam, omega)
    nc = t * math.log(xm) - s * (xm + 1.0 / xm)
    ym = ((lam + 1.0) + math.sqrt((lam + 1.0) ** 2 + omega * omega)) / omega
    um = math.exp(0.5 * (lam + 1.0) * math.log(ym) - s * (ym + 1.0 / ym) - nc)

    def draw(m):
        u = um * rng.random(m)
        v = rng.random(m)
        x = u / v
        with np.errstate(divide="ignore", invalid="ignore"):
            keep = (x > 0.0) & (np.log(v) <= _log_sqrt_density(np.where(x > 0, x, 1.0), t, s) - nc)
        return x[keep]

    return _collect(draw, n)


def _small_omega(rng, n, lam, omega):
    # 0 <= lam < 1, omega small: constant hat up to x0, power hat, exponential tail
    xm = _mode(lam, omega)
    x0 = omega / (1.0 - lam)
    k0 = math.exp((lam - 1.0) * math.log(xm) - 0.5 * omega * (xm + 1.0 / xm))
    a0 = k0 * x0
    if x0 >= 2.0 / omega:
        k1 = 0.0
        a1 = 0.0
        k2 = x0 ** (lam - 1.0)
        a2 = k2 * 2.0 * math.exp(-omega * x0 / 2.0) / omega
    else:
        k1 = math.exp(-omega)
        if lam == 0.0:
            a1 = k1 * math.log(2.0 / (omega * omega))
        else:
            a1 = k1 / lam * ((2.0 / omega) ** lam - x0**lam)
        k2 = (2.0 / omega) ** (lam - 1.0)
        a2 = k2 * 2.0 * math.exp(-1.0) / omega
    total = a0 + a1 + a2
    edge = max(x0, 2.0 / omega)

    def draw(m):
        v = total * rng.random(m)
        x = np.empty(m)
        hx = np.empty(m)
        first = v <= a0
        x[first] = x0 * v[first] / a0
        hx[first] = k0
        second = (~first) & (v <= a0 + a1)
        v2 = v[second] - a0
        if lam == 0.0:
            x[second] = omega * np.exp(math.exp(omega) * v2)
            hx[second] = k1 / x[second]
        else:
            x[second] = (x0**lam + lam / k1 * v2) ** (1.0 / lam)
            hx[second] = k1 * x[second] ** (lam - 1.0)
        third = ~(first | second)
        v3 = v[third] - a0 - a1
        x[third] = -2.0 / omega * np.log(math.exp(-omega / 2.0 * edge) - omega / (2.0 * k2) * v3)
        hx[third] = k2 * np.exp(-omega / 2.0 * x[third])
        u = rng.random(m) * hx
        with np.errstate(divide="ignore", invalid="ignore"):
            keep = (x > 0.0) & (np.log(u) <= (lam - 1.0) * np.log(x) - 0.5 * omega * (x + 1.0 / x))
        return x[keep]

    return _collect(draw, n)


def _collect(draw, n):
    out = []
    got = 0
    batch = max(16, int(1.3 * n) + 16)
    while got < n:
        x = draw(batch)
        out.append(x)
        got += x.size
        rate = max(x.size / batch, 0.05)
        batch = max(16, int(1.2 * (n - got) / rate) + 16)
    return np.concatenate(out)[:n]


def gig_sample(lam, chi, psi, count, rng):
    """
    Draw ``count`` GIG(lam, chi, psi) variates.

    Parameters
    ----------
    lam : float
        Index parameter, any real.
    chi, psi : float
        Positive parameters of the ``1/x`` and ``x`` terms of the exponent.
    count : int
    rng : numpy.random.Generator

    Returns
    -------
    ndarray of shape (count,)
    """
    if not (chi > 0.0 and psi > 0.0):
        raise ValueError(f"GIG requires chi > 0 and psi > 0, got chi={chi!r}, psi={psi!r}")
    count = int(count)
    if count < 1:
        return np.empty(0)
    scale = math.sqrt(chi / psi)
    omega = math.sqrt(chi * psi)
    lam_abs = abs(lam)
    if lam_abs > 2.0 or omega > 3.0:
        x = _rou_shift(rng, count, lam_abs, omega)
    elif lam_abs >= 1.0 - 2.25 * omega * omega or omega > 0.2:
        x = _rou_noshift(rng, count, lam_abs, omega)
    else:
        x = _small_omega(rng, count, lam_abs, omega)
    return scale / x if lam < 0.0 else scale * x
