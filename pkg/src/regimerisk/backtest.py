"""
Per-date regime-model risk forecasts, VaR backtests and the rolling
single-regime GHYP baseline.

Conventions: ``level`` is the confidence level (0.95 for the 95% VaR) and
VaR/ES are reported as lower-tail return quantiles, so they are usually
negative. A breach on date ``n`` means ``r_n < VaR_n`` where ``VaR_n`` was
forecast with information up to date ``n - 1``.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln, logsumexp
from scipy.stats import chi2, norm

from . import fourier
from .errors import DegenerateInputError, InversionConfigError, RegimeRiskError
from .fourier import CharFn, InversionConfig, cdf_point, ghyp_charfn
from .ghyp import GhypParams, equal_mean_location, ghyp_logpdf, ghyp_mean
from .regime import Posterior, _nperiod, _nperiod_spread, filter_series, stationary_distribution

log = logging.getLogger(__name__)

DEFAULT_LEVEL = 0.95
DEFAULT_WINDOW = 250
#: Largest FFT length the regime engine grows to when the default is too coarse.
MAX_ENGINE_GRID = 2**20


# ---------------------------------------------------------------------------
# regime-model risk engine


@dataclass(frozen=True, eq=False)
class RiskReport:
    """VaR/ES forecasts per date for one market."""

    asset: str
    level: float
    horizon: int
    dates: np.ndarray
    returns: np.ndarray
    var: np.ndarray
    es: np.ndarray
    posterior_state1: np.ndarray

    def __len__(self):
        return self.dates.shape[0]


class RegimeRiskEngine:
    """
    N-period VaR and ES of one market as a function of the filter posterior.

    The N-period characteristic function is linear in the posterior, so
    the FFT distribution function and partial-moment curves are computed
    once for each pure state and mixed per forecast. Every VaR is then
    certified against single-point quadrature of the mixed inversion
    integral.

    Parameters
    ----------
    model : RegimeModel
    asset : str or int
    horizon : int
    cfg : InversionConfig, optional
        ``damping=None`` uses :func:`select_damping`, capped at
        ``fourier.DAMPING_SPREADS`` inverse standard deviations.
    normalization : {"tail", "paper"}
        Passed to the ES normalization, see
        :func:`regimerisk.fourier.expected_shortfall`.
    """

    def __init__(self, model, asset, horizon=1, cfg=None, normalization="tail", certify=True):
        if int(horizon) != horizon or horizon < 1:
            raise ValueError(f"horizon must be an integer >= 1, got {horizon!r}")
        self.model = model
        self.states = model.asset(asset)
        self.horizon = int(horizon)
        self.normalization = normalization
        self.certify = certify
        self._pmat = model.transitions.matrix
        spreads = [_nperiod_spread(np.eye(2)[i], model, self.states, self.horizon) for i in (0, 1)]
        self._spreads = spreads
        # a single grid must resolve both pure-state laws
        template = CharFn(self._func(np.array([0.5, 0.5])), self.states.strip,
                          center=self.horizon * self.states.common_mean, spread=max(spreads))
        cfg = cfg or InversionConfig()
        if cfg.damping is None:
            damping = min(fourier.select_damping(model, self.states),
                          fourier.DAMPING_SPREADS / max(spreads))
            cfg = InversionConfig(cfg.grid_size, cfg.freq_step, damping, cfg.center, cfg.truncation_tol)
        self.cfg, self.grid = _resolve_growing(template, cfg)
        self._v_max = max(fourier.truncation_frequency(
            CharFn(self._func(np.eye(2)[i]), self.states.strip, template.center, spreads[i]),
            self.grid.damping, 1e-16) for i in (0, 1))
        self._basis = [self._basis_curve(np.eye(2)[i]) for i in (0, 1)]

    def _func(self, weights):
        a, pmat, h = self.states, self._pmat, self.horizon
        return lambda u: _nperiod(weights, pmat, a, h, u)

    def _basis_curve(self, weights):
        grid = self.grid
        f = self._func(weights)
        left = f(grid.v + 1j * grid.damping)
        right = f(grid.v + 1j * grid.right_damping)
        return fourier._curve_from(grid, left, right, True)

    def charfn(self, posterior):
        w = _weights(posterior)
        spread = math.sqrt(w[0] * self._spreads[0] ** 2 + w[1] * self._spreads[1] ** 2)
        return CharFn(self._func(w), self.states.strip,
                      center=self.horizon * self.states.common_mean, spread=spread)

    def curve(self, posterior):
        """Mixed :class:`fourier.CdfCurve` for ``posterior``."""
        w = _weights(posterior)
        raw = w[0] * self._basis[0][0] + w[1] * self._basis[1][0]
        partial = w[0] * self._basis[0][1] + w[1] * self._basis[1][1]
        return fourier.CdfCurve(self.grid.y, fourier._clean(raw), raw, self.grid, partial)

    def cdf(self, posterior, y):
        return cdf_point(self.charfn(posterior), y, self.grid.damping, v_max=self._v_max)

    def var_es(self, posterior, level=DEFAULT_LEVEL):
        """``(VaR, ES)`` at confidence ``level`` (lower tail ``1 - level``)."""
        alpha = 1.0 - level
        curve = self.curve(posterior)
        k = curve.bracket(alpha)
        interp = fourier._local_interpolant(curve.y, curve.values, k)
        y0 = fourier._interp_root(interp, alpha, curve.y[k], curve.y[k + 1])
        if self.certify:
            cf = self.charfn(posterior)
            slope = float(interp.derivative()(y0))
            var = fourier.refine_root(
                lambda y: cdf_point(cf, y, self.grid.damping, v_max=self._v_max),
                alpha, y0, slope, (curve.y[k], curve.y[k + 1]))
        else:
            var = y0
        tail = fourier.partial_moment_at(curve, var)
        denom = alpha if self.normalization == "tail" else level
        if self.normalization not in ("tail", "paper"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        return var, tail / denom


def _resolve_growing(cf, cfg):
    # sharply peaked fitted laws can need more points than the default grid
    while True:
        try:
            return cfg, fourier.resolve_grid(cf, cfg)
        except InversionConfigError:
            if cfg.grid_size >= MAX_ENGINE_GRID or cfg.freq_step is not None:
                raise
            cfg = replace(cfg, grid_size=2 * cfg.grid_size)
            log.info("regime engine: growing the FFT grid to %d points", cfg.grid_size)


def _weights(posterior):
    if isinstance(posterior, Posterior):
        return posterior.as_array()
    w = np.asarray(posterior, dtype=float)
    Posterior(float(w[0]), float(w[1]))
    return w


def prior_posteriors(model, panel, initial=None):
    """
    Posterior available before each date: the stationary law (or
    ``initial``) for the first date, then the filter output of the
    previous date.
    """
    if initial is None:
        initial = stationary_distribution(model.transitions)
    series = filter_series(model, panel, initial)
    out = np.empty((len(panel), 2))
    if len(panel):
        out[0] = initial.as_array()
        out[1:] = series.probs[:-1]
    return out


def risk_series(model, panel, asset, level=DEFAULT_LEVEL, horizon=1, cfg=None, posterior=None,
                normalization="tail", engine=None):
    """
    Forecast VaR and ES for every date of ``panel``.

    With ``posterior`` given, that fixed state law is used on every date
    instead of the filter (constant output).
    """
    engine = engine or RegimeRiskEngine(model, asset, horizon, cfg, normalization)
    if posterior is None:
        priors = prior_posteriors(model, panel)
    else:
        priors = np.tile(_weights(posterior), (len(panel), 1))
    var = np.empty(len(panel))
    es = np.empty(len(panel))
    cache = {}
    for i, w in enumerate(priors):
        key = (w[0], w[1])
        if key not in cache:
            cache[key] = engine.var_es(w, level)
        var[i], es[i] = cache[key]
    name = engine.states.name
    return RiskReport(name, level, engine.horizon, panel.dates, panel.column(name).copy(), var, es,
                      priors[:, 0].copy())


# ---------------------------------------------------------------------------
# breaches and tests


@dataclass(frozen=True, eq=False)
class BreachSeries:
    dates: np.ndarray
    flags: np.ndarray

    @property
    def n(self):
        return int(self.flags.size)

    @property
    def count(self):
        return int(self.flags.sum())


def breach_series(returns, var_forecasts, dates=None):
    """Flag ``returns[n] < var_forecasts[n]``."""
    r = np.asarray(returns, dtype=float)
    v = np.asarray(var_forecasts, dtype=float)
    if r.shape != v.shape:
        raise ValueError(f"returns and forecasts differ in length: {r.shape} vs {v.shape}")
    if dates is None:
        dates = np.arange(r.size)
    return BreachSeries(np.asarray(dates), r < v)


def binomial_test_pvalue(breaches, n, level=DEFAULT_LEVEL, two_sided=False):
    """
    Backtest p-value for ``breaches`` violations in ``n`` forecasts.

    By default ``P(X >= breaches)`` for ``X ~ Binomial(n, 1 - level)``,
    summed exactly in log space. ``two_sided=True`` returns Kupiec's
    likelihood-ratio (proportion of failures) p-value instead.
    """
    x, n = int(breaches), int(n)
    if not 0 <= x <= n:
        raise ValueError(f"need 0 <= breaches <= n, got {x}, {n}")
    q = 1.0 - level
    if not 0.0 < q < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    if two_sided:
        return _kupiec_pvalue(x, n, q)
    if n == 0 or x == 0:
        return 1.0
    k = np.arange(x, n + 1)
    logpmf = (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
              + k * math.log(q) + (n - k) * math.log1p(-q))
    return float(min(1.0, math.exp(logsumexp(logpmf))))


def _kupiec_pvalue(x, n, q):
    if n == 0:
        return 1.0

    def loglik(p):
        terms = 0.0
        if x:
            terms += x * math.log(p)
        if n - x:
            terms += (n - x) * math.log1p(-p)
        return terms

    lr = -2.0 * (loglik(q) - loglik(x / n))
    return float(chi2.sf(max(lr, 0.0), 1))


def runs_test_pvalue(flags):
    """
    Two-sided Wald-Wolfowitz runs test (normal approximation) for random
    ordering of breach flags.
    """
    f = np.asarray(flags, dtype=bool)
    n1 = int(f.sum())
    n2 = int(f.size - n1)
    if n1 == 0 or n2 == 0:
        raise DegenerateInputError("runs test needs both breaches and non-breaches")
    n = n1 + n2
    runs = 1 + int(np.count_nonzero(f[1:] != f[:-1]))
    mean = 1.0 + 2.0 * n1 * n2 / n
    var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1.0))
    if var <= 0.0:
        raise DegenerateInputError("runs test variance vanishes for this input")
    z = (runs - mean) / math.sqrt(var)
    return float(2.0 * norm.sf(abs(z)))


@dataclass(frozen=True)
class BacktestReport:
    n: int
    breaches: int
    binomial_pvalue: float
    runs_pvalue: float
    level: float
    model: str
    first_date: str = ""
    last_date: str = ""

    @property
    def breach_rate(self):
        return self.breaches / self.n if self.n else math.nan


def assemble_report(returns, forecasts, level, tag, dates=None, two_sided=False):
    """Breach count and test p-values; the runs p-value is NaN when undefined."""
    br = breach_series(returns, forecasts, dates)
    try:
        runs = runs_test_pvalue(br.flags)
    except DegenerateInputError:
        runs = math.nan
    first = str(br.dates[0]) if br.n and dates is not None else ""
    last = str(br.dates[-1]) if br.n and dates is not None else ""
    return BacktestReport(br.n, br.count, binomial_test_pvalue(br.count, br.n, level, two_sided),
                          runs, level, tag, first, last)


@dataclass(eq=False)
class BacktestResult:
    in_sample: BacktestReport
    out_of_sample: BacktestReport
    forecasts: RiskReport
    split_index: int
    extra: dict = field(default_factory=dict)


def _split_index(panel, split):
    if split is None:
        return len(panel)
    if isinstance(split, (int, np.integer)):
        idx = int(split)
    else:
        idx = int(np.searchsorted(panel.dates, np.datetime64(split, "D")))
    if not 0 <= idx <= len(panel):
        raise ValueError(f"split {split!r} outside the panel")
    return idx


def _period_bounds(panel, split, burn_in, in_sample_last):
    idx = _split_index(panel, split)
    if not 0 <= burn_in <= idx:
        raise ValueError(f"burn_in {burn_in} exceeds the in-sample length {idx}")
    end = idx
    if in_sample_last is not None:
        end = min(idx, int(np.searchsorted(panel.dates, np.datetime64(in_sample_last, "D"), side="right")))
    return idx, max(end, burn_in)


def backtest(model, panel, asset, level=DEFAULT_LEVEL, split=None, burn_in=0, cfg=None,
             two_sided=False, normalization="tail", in_sample_last=None):
    """
    One-step VaR backtest of the regime model.

    Dates before ``split`` (a date or row index) form the in-sample
    period, the rest the out-of-sample period. The first ``burn_in``
    in-sample dates, and any dates after ``in_sample_last``, are filtered
    but not evaluated in-sample.
    """
    idx, end = _period_bounds(panel, split, burn_in, in_sample_last)
    risk = risk_series(model, panel, asset, level, 1, cfg, normalization=normalization)
    tag = "regime"
    ins = assemble_report(risk.returns[burn_in:end], risk.var[burn_in:end], level, tag,
                          risk.dates[burn_in:end], two_sided)
    out = assemble_report(risk.returns[idx:], risk.var[idx:], level, tag, risk.dates[idx:], two_sided)
    return BacktestResult(ins, out, risk, idx)


# ---------------------------------------------------------------------------
# single-regime baseline


#: Shape box for the baseline fit. 250 points rarely pin down all five
#: parameters, and unbounded fits drift to the variance-gamma (scale -> 0),
#: Student-t (alpha -> 0) or skewed-t (|beta| -> alpha) limits, whose
#: transforms no practical grid resolves. A floor on alpha * scale rules
#: out the first two, a cap on |beta| / alpha the third. Past the ceiling
#: on alpha * scale the law is normal to within sampling noise, while the
#: fit keeps drifting with a location and skew shift that nearly cancel.
FIT_LAMBDA_BOUND = 10.0
FIT_BETA_RATIO = 0.8
FIT_ZETA_FLOOR = 0.25
FIT_ZETA_CEILING = 1e3


def _ghyp_from(x):
    """
    Coordinates ``(lam, alpha * scale, sqrt(scale / alpha), beta / alpha, mean)``,
    each mapped onto its box; they are far better conditioned than the
    raw parameters.
    """
    lam = FIT_LAMBDA_BOUND * math.tanh(x[0] / FIT_LAMBDA_BOUND)
    zeta = FIT_ZETA_FLOOR + math.exp(x[1])
    s = math.exp(x[2])
    alpha = math.sqrt(zeta) / s
    shape = GhypParams(lam, alpha, alpha * FIT_BETA_RATIO * math.tanh(x[3]), s * math.sqrt(zeta))
    return replace(shape, location=equal_mean_location(shape, x[4]))


def _ghyp_to(p):
    clip = lambda z: min(max(z, -0.999), 0.999)
    zeta = p.alpha * p.scale
    return np.array([FIT_LAMBDA_BOUND * math.atanh(clip(p.lam / FIT_LAMBDA_BOUND)),
                     math.log(min(max(zeta - FIT_ZETA_FLOOR, 1e-3), 0.999 * (FIT_ZETA_CEILING - FIT_ZETA_FLOOR))), 0.5 * math.log(p.scale / p.alpha),
                     math.atanh(clip(p.beta / (p.alpha * FIT_BETA_RATIO))), ghyp_mean(p)])


def _moment_start(r):
    c = r - r.mean()
    v = float(np.mean(c * c))
    k = min(max(float(np.mean(c**4)) / (v * v) - 3.0, 0.3), 30.0)
    return GhypParams(-0.5, math.sqrt(3.0 / (k * v)), 0.0, math.sqrt(3.0 * v / k), float(r.mean()))


def fit_ghyp(returns, start=None, max_evaluations=3000, tol=1e-4):
    """
    Maximum-likelihood GHYP fit (all five parameters) by Nelder-Mead.

    The shape is confined to ``|lambda| <= FIT_LAMBDA_BOUND``,
    ``|beta| <= FIT_BETA_RATIO * alpha`` and
    ``FIT_ZETA_FLOOR <= alpha * scale <= FIT_ZETA_CEILING``. ``start`` warm-starts the
    simplex; by default a symmetric NIG matched to the sample variance and
    kurtosis. ``tol`` is the absolute log-likelihood convergence tolerance.

    Returns
    -------
    params : GhypParams
    success : bool
    """
    r = np.asarray(returns, dtype=float)
    if r.size < 10 or not np.std(r) > 0:
        raise DegenerateInputError("GHYP fit needs at least 10 non-constant observations")
    p0 = start or _moment_start(r)
    sd = float(np.std(r))
    center = float(r.mean())
    zeta_top = math.log(FIT_ZETA_CEILING - FIT_ZETA_FLOOR)

    def nll(x):
        if not -30.0 <= x[1] <= zeta_top or abs(x[2]) > 30.0 or abs(x[3]) > 20.0 or abs(x[4] - center) > 10 * sd:
            return math.inf
        try:
            value = -float(np.sum(ghyp_logpdf(_ghyp_from(x), r)))
        except (RegimeRiskError, ValueError, OverflowError, FloatingPointError):
            return math.inf
        return value if math.isfinite(value) else math.inf

    x0 = _ghyp_to(p0)
    simplex = np.tile(x0, (6, 1))
    # a warm start sits near the optimum already; a smaller simplex saves evaluations
    shrink = 0.25 if start is not None else 1.0
    for i, step in enumerate((0.5, 0.3, 0.1, 0.2, 0.2 * sd / math.sqrt(r.size))):
        simplex[i + 1, i] += shrink * step
    res = minimize(nll, x0, method="Nelder-Mead",
                   options={"initial_simplex": simplex, "maxfev": max_evaluations,
                            "xatol": 1e-3, "fatol": tol, "adaptive": True})
    if not math.isfinite(res.fun):
        raise RegimeRiskError("GHYP fit found no finite likelihood")
    return _ghyp_from(res.x), bool(res.success)


#: Largest FFT length tried before falling back to point-wise root search.
MAX_BASELINE_GRID = 2**16


def _single_var(cf, alpha, cfg):
    cfg = cfg or InversionConfig()
    size = cfg.grid_size
    while True:
        try:
            return fourier.value_at_risk(cf, alpha, replace(cfg, grid_size=size))
        except InversionConfigError:
            if size >= MAX_BASELINE_GRID or cfg.freq_step is not None:
                break
            size *= 2
    return fourier.value_at_risk_point(cf, alpha)


@dataclass(frozen=True, eq=False)
class RollingForecast:
    """Baseline forecasts for dates ``window..T-1``; ``failed`` marks carried-forward values."""

    start: int
    var: np.ndarray
    failed: np.ndarray
    params: tuple


def rolling_simple_var(returns, window=DEFAULT_WINDOW, level=DEFAULT_LEVEL, cfg=None):
    """
    Rolling single-regime GHYP VaR.

    For each ``n >= window`` a GHYP is fitted by maximum likelihood to
    ``returns[n - window:n]`` (warm-started from the previous fit) and its
    ``level`` VaR is the forecast for date ``n``. A failed fit or
    inversion carries the last good forecast forward and is flagged.
    """
    r = np.asarray(returns, dtype=float)
    window = int(window)
    if r.size <= window:
        raise ValueError(f"series of length {r.size} is not longer than the window {window}")
    count = r.size - window
    var = np.empty(count)
    failed = np.zeros(count, dtype=bool)
    params = []
    prev_p, prev_var = None, math.nan
    for i in range(count):
        chunk = r[i:i + window]
        try:
            p, _ = fit_ghyp(chunk, start=prev_p)
            v = _single_var(ghyp_charfn(p), 1.0 - level, cfg)
            prev_p, prev_var = p, v
        except (RegimeRiskError, ValueError, ArithmeticError) as exc:
            log.warning("baseline window ending at %d failed: %s", i + window, exc)
            failed[i] = True
            p, v = prev_p, prev_var
        var[i] = v
        params.append(p)
    return RollingForecast(window, var, failed, tuple(params))


def backtest_simple(panel, asset, level=DEFAULT_LEVEL, split=None, window=DEFAULT_WINDOW, burn_in=0,
                    cfg=None, two_sided=False, forecast=None, in_sample_last=None):
    """
    Backtest of the rolling baseline over the same periods as
    :func:`backtest`; dates without a forecast (the first ``window``) are
    skipped.
    """
    idx, end = _period_bounds(panel, split, burn_in, in_sample_last)
    r = panel.column(asset)
    fc = forecast or rolling_simple_var(r, window, level, cfg)
    full = np.full(len(panel), np.nan)
    full[fc.start:] = fc.var
    valid = np.isfinite(full)
    tag = f"simple-{window}"

    def part(lo, hi):
        sel = np.zeros(len(panel), dtype=bool)
        sel[lo:hi] = True
        sel &= valid
        return assemble_report(r[sel], full[sel], level, tag, panel.dates[sel], two_sided)

    return BacktestResult(part(burn_in, end), part(idx, len(panel)), None, idx,
                          {"forecast": fc, "var": full})
