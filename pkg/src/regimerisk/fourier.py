"""
Distribution function, value-at-risk and expected shortfall by damped
Fourier inversion of a characteristic function.

For a damping ``d`` inside the strip of regularity,

    F(y) = exp(d y) / (2 pi) * Int exp(-i v y) phi(v + i d) / (d - i v) dv        (d > 0)
    F(y) = 1 + (the same expression)                                             (d < 0)

and the lower partial first moment is

    Int_{-inf}^{y} x f(x) dx
        = exp(d y) / (2 pi) * Int exp(-i v y) ((d - i v) y - 1) / (d - i v)^2 phi(v + i d) dv.

Both are evaluated on a whole grid of ``y`` with one FFT each
(:func:`cdf_fft`), or at a single point with adaptive quadrature
(:func:`cdf_point`, :func:`partial_moment_point`), which serves as the
refinement oracle for root finding.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from . import ghyp as _ghyp
from .errors import InversionConfigError, QuadratureError, StripError
from .ghyp import Strip
from .quadrature import integrate

#: FFT length used when none is given.
DEFAULT_GRID_SIZE = 2**14
#: Preferred upper bound on the y-grid spacing, in return units.
PREFERRED_Y_STEP = 1e-4
#: Aliasing budget: the y-period L must satisfy exp(-|d| L / 2) <= ~1e-12.
ALIAS_EXPONENT = 55.0
#: Minimal y-period in units of the distribution's standard deviation.
MIN_SPAN_SPREADS = 30.0
#: Damping is capped at this many inverse standard deviations (round-off control).
DAMPING_SPREADS = 2.0
#: Tolerance used to certify a value-at-risk against :func:`cdf_point`.
VAR_TOLERANCE = 1e-9


@dataclass(eq=False)
class CharFn:
    """
    A characteristic function together with its strip of regularity.

    ``func`` must be vectorized over complex arrays. ``center`` and
    ``spread`` (mean and standard deviation) size the inversion grid; when
    omitted they are estimated from the cumulant function near zero.
    """

    func: object
    strip: Strip
    center: float = None
    spread: float = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.center is None or self.spread is None:
            mean, sd = _numeric_moments(self.func)
            if self.center is None:
                self.center = mean
            if self.spread is None:
                self.spread = sd

    def __call__(self, u):
        self.strip.check(u)
        return self.func(np.asarray(u, dtype=complex))


def _numeric_moments(func):
    h = 1.0
    var = 1.0
    for _ in range(6):
        lp = complex(np.log(func(np.array([h + 0j]))[0]))
        lm = complex(np.log(func(np.array([-h + 0j]))[0]))
        var_new = -(lp + lm).real / (h * h)
        if var_new <= 0.0 or not math.isfinite(var_new):
            h *= 0.1
            continue
        h_new = 1e-3 / math.sqrt(var_new)
        var = var_new
        if abs(h_new - h) < 0.05 * h:
            break
        h = h_new
    lp = complex(np.log(func(np.array([h + 0j]))[0]))
    lm = complex(np.log(func(np.array([-h + 0j]))[0]))
    mean = (lp - lm).imag / (2.0 * h)
    return mean, math.sqrt(var)


def ghyp_charfn(p):
    """:class:`CharFn` of a single GHYP law."""
    ew = _ghyp.mixing_mean(p)
    return CharFn(lambda u: _ghyp.ghyp_cf(p, u), p.strip,
                  center=_ghyp.ghyp_mean(p), spread=math.sqrt(ew) + abs(p.beta) * ew)


def normal_charfn(mean=0.0, sd=1.0):
    """:class:`CharFn` of ``N(mean, sd^2)``; entire, so the strip is unbounded."""
    return CharFn(lambda u: np.exp(1j * u * mean - 0.5 * sd * sd * u * u),
                  Strip(-math.inf, math.inf), center=mean, spread=sd)


def mixture_charfn(weights, parts):
    """Finite mixture ``sum_i weights[i] * parts[i]``."""
    weights = [float(w) for w in weights]
    strip = parts[0].strip
    for part in parts[1:]:
        strip = strip.intersect(part.strip)

    def func(u):
        return sum(w * part.func(u) for w, part in zip(weights, parts) if w != 0.0)

    return CharFn(func, strip)


@dataclass(frozen=True)
class InversionConfig:
    """
    FFT inversion settings. ``None`` fields are derived from the target
    characteristic function when the grid is resolved.
    """

    grid_size: int = DEFAULT_GRID_SIZE
    freq_step: float = None
    damping: float = None
    center: float = None
    truncation_tol: float = 1e-12

    def __post_init__(self):
        n = self.grid_size
        if n < 16 or n & (n - 1):
            raise InversionConfigError(f"grid_size must be a power of two >= 16, got {n}")
        if self.freq_step is not None and not self.freq_step > 0:
            raise InversionConfigError(f"freq_step must be positive, got {self.freq_step}")
        if self.damping is not None and not self.damping > 0:
            raise InversionConfigError(f"damping must be positive, got {self.damping}")


@dataclass(frozen=True)
class Grid:
    size: int
    freq_step: float
    y_step: float
    damping: float
    right_damping: float
    center: float

    @property
    def v(self):
        return (np.arange(self.size) - self.size // 2) * self.freq_step

    @property
    def y(self):
        return self.center + (np.arange(self.size) - self.size // 2) * self.y_step


def default_damping(cf):
    """Half the upper strip edge, capped at ``DAMPING_SPREADS / spread``."""
    return min(0.5 * cf.strip.upper, DAMPING_SPREADS / cf.spread)


def _right_damping(cf, damping):
    # mirror rule on the lower strip edge, used for the right half of the CDF
    return -min(0.5 * -cf.strip.lower, DAMPING_SPREADS / cf.spread, damping)


def _abs_cf(cf, v, d, center):
    return float(np.abs(cf.func(np.array([v + 1j * d])))[0]) * math.exp(d * center)


def truncation_frequency(cf, damping, tol=1e-12):
    """Smallest ``v = 2^k / spread`` with ``|phi(v + i d)| exp(d * center) < tol``."""
    key = ("vtrunc", damping, tol)
    if key in cf._cache:
        return cf._cache[key]
    v = 1.0 / cf.spread
    for _ in range(200):
        if _abs_cf(cf, v, damping, cf.center) < tol and _abs_cf(cf, 2.0 * v, damping, cf.center) < tol:
            break
        v *= 2.0
    else:
        raise InversionConfigError(f"characteristic function does not decay below {tol} on the contour")
    cf._cache[key] = v
    return v


def resolve_grid(cf, cfg=None):
    """Concrete FFT grid for ``cf`` under ``cfg``; validates damping and truncation."""
    cfg = cfg or InversionConfig()
    n = cfg.grid_size
    damping = cfg.damping if cfg.damping is not None else default_damping(cf)
    if not 0.0 < damping < cf.strip.upper:
        raise StripError(damping, 0.0, cf.strip.upper)
    right = _right_damping(cf, damping)
    center = cf.center if cfg.center is None else float(cfg.center)

    if cfg.freq_step is not None:
        dv = float(cfg.freq_step)
        dy = 2.0 * math.pi / (n * dv)
    else:
        v_trunc = max(truncation_frequency(cf, damping, cfg.truncation_tol),
                      truncation_frequency(cf, right, cfg.truncation_tol))
        dy_max = math.pi / v_trunc
        span = max(ALIAS_EXPONENT / min(damping, -right), MIN_SPAN_SPREADS * cf.spread)
        dy_min = span / n
        if dy_min > dy_max:
            raise InversionConfigError(
                f"grid_size {n} cannot cover y-span {span:.3g} with frequency reach {v_trunc:.3g}; "
                f"use grid_size >= {2 ** math.ceil(math.log2(span * v_trunc / math.pi))}")
        dy = max(dy_min, min(PREFERRED_Y_STEP, dy_max))
        dv = 2.0 * math.pi / (n * dy)

    edge = 0.5 * n * dv
    for d in (damping, right):
        level = _abs_cf(cf, edge, d, center)
        if not level < cfg.truncation_tol:
            raise InversionConfigError(
                f"|phi| = {level:.3g} at frequency edge {edge:.4g} (damping {d:.4g}) exceeds "
                f"{cfg.truncation_tol:g}; decrease freq_step or increase grid_size")
    return Grid(n, dv, dy, damping, right, center)


def _simpson_weights(n):
    w = np.where(np.arange(n) % 2 == 1, 4.0, 2.0) / 3.0
    w[0] = 1.0 / 3.0
    return w


def _fft_transform(grid, phi, power, d):
    """exp(d y) / (2 pi) * Int exp(-i v y) phi / (d - i v)^power dv on the y-grid."""
    v = grid.v
    n = grid.size
    sign = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    a = _simpson_weights(n) * sign * np.exp(-1j * v * grid.center) * phi / (d - 1j * v) ** power
    out = sign * np.fft.fft(a) * grid.freq_step
    return np.exp(d * grid.y) / (2.0 * math.pi) * out.real


@dataclass(frozen=True)
class CdfCurve:
    """
    Distribution function on an ascending grid.

    ``values`` is the cleaned (clamped, running-max) curve; ``raw`` keeps
    the inversion output. ``partial`` holds ``Int_{-inf}^y x f(x) dx`` when
    computed (reliable left of the center).
    """

    y: np.ndarray
    values: np.ndarray
    raw: np.ndarray
    grid: Grid
    partial: np.ndarray = None

    def __call__(self, y):
        spline = self.__dict__.get("_spline")
        if spline is None:
            spline = CubicSpline(self.y, self.values)
            object.__setattr__(self, "_spline", spline)
        return spline(y)

    def bracket(self, level):
        """Index ``k`` with ``values[k] <= level < values[k+1]``."""
        if not self.values[0] <= level < self.values[-1]:
            raise InversionConfigError(
                f"level {level} outside the grid's CDF range "
                f"[{self.values[0]:.3g}, {self.values[-1]:.3g}]; widen the y-grid")
        return int(np.searchsorted(self.values, level, side="right")) - 1


def _curve_from(grid, phi_left, phi_right, with_partial):
    y = grid.y
    left = _fft_transform(grid, phi_left, 1, grid.damping)
    right = 1.0 + _fft_transform(grid, phi_right, 1, grid.right_damping)
    raw = np.where(y <= grid.center, left, right)
    partial = None
    if with_partial:
        h = _fft_transform(grid, phi_left, 2, grid.damping)
        partial = y * left - h
    return raw, partial


def _clean(raw, eps=1e-6):
    low, high = float(raw.min()), float(raw.max())
    if low < -eps or high > 1.0 + eps:
        raise InversionConfigError(
            f"inverted CDF leaves [0, 1] by more than {eps:g} (range [{low:.3g}, {high:.3g}]); "
            "grid too coarse or damping too large")
    return np.clip(np.maximum.accumulate(raw), 0.0, 1.0)


def cdf_fft(cf, cfg=None, with_partial=False):
    """
    Distribution function on an FFT grid.

    Returns
    -------
    CdfCurve
        ``grid_size`` equally spaced values with spacing
        ``2 pi / (grid_size * freq_step)``, centered at ``cfg.center`` (the
        distribution mean by default).
    """
    grid = resolve_grid(cf, cfg)
    v = grid.v
    phi_left = cf.func(v + 1j * grid.damping)
    phi_right = cf.func(v + 1j * grid.right_damping)
    raw, partial = _curve_from(grid, phi_left, phi_right, with_partial)
    return CdfCurve(grid.y, _clean(raw), raw, grid, partial)


def _point_integral(cf, y, damping, kernel, tol, v_max=None):
    if not cf.strip.lower < damping < cf.strip.upper or damping == 0.0:
        raise StripError(damping, cf.strip.lower, cf.strip.upper)
    if v_max is None:
        v_max = truncation_frequency(cf, damping, 1e-16)
    prefactor = math.exp(damping * y) / math.pi
    n0 = max(8, int(math.ceil(abs(y - cf.center) * v_max / math.pi)) + 8)

    def integrand(v):
        z = damping - 1j * v
        return (np.exp(-1j * v * y) * kernel(z) * cf.func(v + 1j * damping)).real

    value, err = integrate(integrand, 0.0, v_max, abstol=tol / prefactor, initial_intervals=n0)
    return prefactor * value, prefactor * err


def cdf_point(cf, y, damping=None, tol=1e-10, v_max=None):
    """
    F(y) by adaptive quadrature of the damped inversion integral.

    ``damping`` may be negative (contour below the pole at the origin), in
    which case the residue ``1`` is added back.
    """
    if damping is None:
        damping = default_damping(cf)
    value, _ = _point_integral(cf, float(y), float(damping), lambda z: 1.0 / z, tol, v_max)
    return value if damping > 0 else 1.0 + value


def partial_moment_point(cf, y, damping=None, tol=1e-10, v_max=None):
    """``Int_{-inf}^y x f(x) dx`` by adaptive quadrature (positive damping)."""
    if damping is None:
        damping = default_damping(cf)
    if not damping > 0:
        raise StripError(damping, 0.0, cf.strip.upper)
    y = float(y)
    value, _ = _point_integral(cf, y, float(damping), lambda z: (z * y - 1.0) / (z * z), tol, v_max)
    return value


def _local_interpolant(curve_y, curve_v, k, width=4, cls=PchipInterpolator):
    lo = max(0, k - width)
    hi = min(len(curve_y), k + width + 2)
    return cls(curve_y[lo:hi], curve_v[lo:hi])


def refine_root(fn, level, y0, slope, bracket, tol=VAR_TOLERANCE, max_newton=6):
    """
    Solve ``fn(y) = level`` starting at ``y0``; Newton steps with a fixed
    slope, then bisection on ``bracket`` if Newton does not certify.
    """
    y = y0
    for _ in range(max_newton):
        fy = fn(y)
        if abs(fy - level) < tol:
            return y
        if slope > 0:
            y = y - (fy - level) / slope
    a, b = bracket
    fa, fb = fn(a), fn(b)
    while fa > level:
        a -= (b - a)
        fa = fn(a)
    while fb < level:
        b += (b - a)
        fb = fn(b)
    for _ in range(200):
        m = 0.5 * (a + b)
        fm = fn(m)
        if abs(fm - level) < tol:
            return m
        if fm < level:
            a = m
        else:
            b = m
    raise QuadratureError(abs(fm - level), tol)


def value_at_risk(cf, alpha, cfg=None, curve=None, certify=True):
    """
    Lower ``alpha``-quantile of the distribution, ``F(VaR) = alpha``.

    The FFT curve brackets the root and a monotone interpolant supplies the
    starting point; with ``certify`` the result is refined until
    ``|cdf_point(VaR) - alpha| < 1e-9``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if curve is None:
        curve = cdf_fft(cf, cfg)
    k = curve.bracket(alpha)
    interp = _local_interpolant(curve.y, curve.values, k)
    y0 = _interp_root(interp, alpha, curve.y[k], curve.y[k + 1])
    if not certify:
        return y0
    slope = float(interp.derivative()(y0))
    d = curve.grid.damping
    return refine_root(lambda y: cdf_point(cf, y, d), alpha, y0, slope,
                       (curve.y[k], curve.y[k + 1]))


def value_at_risk_point(cf, alpha, damping=None, tol=VAR_TOLERANCE):
    """
    VaR by root search on :func:`cdf_point` alone, for distributions whose
    tails or slowly decaying cf rule out a practical FFT grid.
    """
    from scipy.optimize import brentq

    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    d = default_damping(cf) if damping is None else damping
    fn = lambda y: cdf_point(cf, y, d) - alpha
    step = cf.spread
    lo = hi = cf.center
    for _ in range(200):
        if fn(lo) < 0.0:
            break
        lo -= step
        step *= 2.0
    else:
        raise InversionConfigError(f"no lower bracket for the {alpha} quantile")
    step = cf.spread
    for _ in range(200):
        if fn(hi) > 0.0:
            break
        hi += step
        step *= 2.0
    else:
        raise InversionConfigError(f"no upper bracket for the {alpha} quantile")
    y = brentq(fn, lo, hi, xtol=1e-14 * max(1.0, abs(cf.center)), rtol=1e-14, maxiter=200)
    if not abs(fn(y)) < tol:
        raise QuadratureError(abs(fn(y)), tol)
    return y


def _interp_root(interp, level, a, b):
    from scipy.optimize import brentq

    fa = float(interp(a)) - level
    fb = float(interp(b)) - level
    if fa == 0.0:
        return float(a)
    if fa * fb > 0:
        return float(a)
    return brentq(lambda y: float(interp(y)) - level, a, b, xtol=1e-15, rtol=1e-15)


def expected_shortfall(cf, alpha, var, cfg=None, curve=None, method="fft", normalization="tail"):
    """
    Expected shortfall ``E[X | X <= var]``.

    Parameters
    ----------
    alpha : float
        Lower-tail probability used for ``var`` (``F(var) = alpha``).
    method : {"fft", "quad"}
        Read the partial moment off the FFT grid, or integrate it adaptively
        at ``var``.
    normalization : {"tail", "paper"}
        ``"tail"`` divides the partial moment by ``alpha``; ``"paper"``
        divides by ``1 - alpha`` (the confidence-level convention, correct
        when ``alpha`` is given as the confidence level).
    """
    if method == "quad":
        d = curve.grid.damping if curve is not None else (
            cfg.damping if cfg is not None and cfg.damping is not None else default_damping(cf))
        tail = partial_moment_point(cf, var, d)
    elif method == "fft":
        if curve is None or curve.partial is None:
            curve = cdf_fft(cf, cfg, with_partial=True)
        tail = partial_moment_at(curve, var)
    else:
        raise ValueError(f"unknown method {method!r}")
    if normalization == "tail":
        return tail / alpha
    if normalization == "paper":
        return tail / (1.0 - alpha)
    raise ValueError(f"unknown normalization {normalization!r}")


def partial_moment_at(curve, y):
    k = int(np.clip(np.searchsorted(curve.y, y) - 1, 0, len(curve.y) - 2))
    spline = _local_interpolant(curve.y, curve.partial, k, cls=CubicSpline)
    return float(spline(y))


def select_damping(model, asset):
    """Half the smallest upper strip edge ``alpha + beta`` over both states of ``asset``."""
    states = model.asset(asset)
    return 0.5 * min(s.alpha + s.beta for s in (states.state1, states.state2))


def plancherel_expectation(cf, g_hat, damping):
    """
    ``E[g(X)] = (1 / 2 pi) Int phi(u) g_hat(u) du`` along ``Im(u) = damping``,
    where ``g_hat(u) = Int exp(-i u x) g(x) dx``.
    """
    v_max = truncation_frequency(cf, damping, 1e-16)

    def integrand(v):
        u = v + 1j * damping
        return cf.func(u) * g_hat(u)

    value, _ = integrate(lambda v: integrand(v).real, -v_max, v_max, abstol=1e-12,
                         initial_intervals=16)
    return value / (2.0 * math.pi)
