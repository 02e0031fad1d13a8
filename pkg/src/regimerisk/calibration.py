"""
Penalized maximum-likelihood calibration of the regime model.

The objective is the HMM log-likelihood minus a quadratic penalty on the
gap between model-implied and sample autocovariances of absolute returns
over lags ``1..K``. It is maximized with Nelder-Mead in unconstrained
coordinates, with several starts and simplex restarts.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DataError, FilterDegeneracyError, ParameterDomainError, RegimeRiskError
from .ghyp import BETA_MARGIN, GhypParams
from .regime import (AssetStates, RegimeModel, TransitionMatrix, autocov_curve, state_log_densities,
                     stationary_distribution)

log = logging.getLogger(__name__)

#: Default number of autocovariance lags in the penalty.
DEFAULT_LAGS = 50
#: Auto-balanced penalty is this fraction of ``|log-likelihood|`` at the start.
AUTO_PENALTY_RATIO = 0.15
#: Keeps ``|beta| / alpha`` away from 1 in the unconstrained map.
_TANH_SCALE = 1.0 - 10.0 * BETA_MARGIN
#: Evaluations with any coordinate beyond this magnitude are rejected.
_COORD_LIMIT = 40.0
#: Admissible state laws during the search. Without these walls the simplex
#: can wander along flat ridges toward degenerate limits (|beta| -> alpha
#: with alpha -> inf and scale -> 0), where each evaluation gets slow.
LAMBDA_BOUND = 10.0
BETA_RATIO_BOUND = 0.95
ZETA_FLOOR = 0.05
ALPHA_CEILING = 1e5


@dataclass(frozen=True)
class CalibrationConfig:
    """
    Optimizer and penalty settings.

    ``penalty_weight=None`` selects the weight automatically: the penalty
    then equals ``AUTO_PENALTY_RATIO * |log L|`` at the starting point.
    """

    penalty_weight: float = None
    penalty_lags: int = DEFAULT_LAGS
    max_iterations: int = 20000
    convergence_tol: float = 1e-7
    restarts: int = 3
    seed: int = 0
    polish_rounds: int = 4
    screen_iterations: int = 3000

    def __post_init__(self):
        if self.penalty_weight is not None and not self.penalty_weight >= 0.0:
            raise ValueError(f"penalty_weight must be >= 0, got {self.penalty_weight}")
        if int(self.penalty_lags) < 1:
            raise ValueError(f"penalty_lags must be >= 1, got {self.penalty_lags}")
        if not self.convergence_tol > 0.0:
            raise ValueError(f"convergence_tol must be positive, got {self.convergence_tol}")
        if int(self.restarts) < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if int(self.max_iterations) < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")


@dataclass
class CalibrationResult:
    """Fitted model plus optimizer diagnostics."""

    model: RegimeModel
    objective: float
    log_likelihood: float
    penalty: float
    penalty_weight: float
    converged: bool
    evaluations: int
    trace: list = field(default_factory=list)
    starts: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# likelihood


def _chain_log_product(logdens, pmat, initial):
    """
    ``log(initial P D_1 P D_2 ... P D_T 1)`` by pairwise reduction of the
    per-date 2x2 matrices, each kept scaled to unit max entry.
    """
    m = logdens.max(axis=1)
    if not np.all(np.isfinite(m)):
        bad = int(np.flatnonzero(~np.isfinite(m))[0])
        raise FilterDegeneracyError(bad)
    d = np.exp(logdens - m[:, None])
    mats = pmat[None, :, :] * d[:, None, :]
    logscale = float(m.sum())
    while mats.shape[0] > 1:
        if mats.shape[0] % 2:
            tail = mats[-1:]
            mats = mats[:-1]
        else:
            tail = None
        mats = np.einsum("nij,njk->nik", mats[0::2], mats[1::2])
        s = mats.max(axis=(1, 2))
        if not np.all(s > 0.0):
            raise FilterDegeneracyError(None)
        mats /= s[:, None, None]
        logscale += float(np.log(s).sum())
        if tail is not None:
            mats = np.concatenate([mats, tail])
    total = float(initial @ mats[0] @ np.ones(2))
    if not total > 0.0:
        raise FilterDegeneracyError(None)
    return logscale + math.log(total)


def log_likelihood(model, panel):
    """
    HMM log-likelihood of ``panel`` with the chain started at its
    stationary distribution.
    """
    if len(panel) == 0:
        raise DataError("log-likelihood of an empty panel")
    panel = panel.select(model.names)
    logdens = state_log_densities(model, panel)
    try:
        return _chain_log_product(logdens, model.transitions.matrix,
                                  stationary_distribution(model.transitions).as_array())
    except FilterDegeneracyError as exc:
        # locate the offending date with the sequential filter
        from .regime import forward_pass
        forward_pass(logdens, model.transitions, stationary_distribution(model.transitions).as_array())
        raise exc


# ---------------------------------------------------------------------------
# penalty


def empirical_autocov(series, k, transform="abs"):
    """Biased (``1/T``) sample autocovariance at lag ``k`` of ``|x|`` or ``x``."""
    x = np.asarray(series, dtype=float)
    k = int(k)
    if k < 0 or k >= x.size:
        raise ValueError(f"lag {k} requires a series longer than {k}, got length {x.size}")
    if transform == "abs":
        x = np.abs(x)
    elif transform != "identity":
        raise ValueError(f"unknown transform {transform!r}")
    c = x - x.mean()
    return float(c[: x.size - k] @ c[k:]) / x.size


def empirical_autocov_curve(series, lags, transform="abs"):
    return np.array([empirical_autocov(series, k, transform) for k in range(1, int(lags) + 1)])


def _targets(panel, lags):
    return {name: empirical_autocov_curve(panel.column(name), lags) for name in panel.names}


def squared_gap(model, panel, lags, targets=None):
    """``sum_assets sum_k (model autocov - sample autocov)^2`` for absolute returns."""
    targets = targets or _targets(panel, lags)
    total = 0.0
    for a in model.assets:
        total += float(np.sum((autocov_curve(model, a, lags) - targets[a.name]) ** 2))
    return total


def penalty(model, panel, cfg, weight=None, targets=None):
    """``weight * squared_gap``; ``weight`` defaults to ``cfg.penalty_weight``."""
    w = cfg.penalty_weight if weight is None else weight
    if w is None:
        raise ValueError("penalty weight unresolved; use auto_penalty_weight first")
    if w == 0.0:
        return 0.0
    return w * squared_gap(model, panel, cfg.penalty_lags, targets)


def auto_penalty_weight(model, panel, cfg, ratio=AUTO_PENALTY_RATIO):
    """
    Weight making the penalty ``ratio * |log L|`` at ``model``.

    The squared gap is floored at its sampling-noise scale
    ``K * var(|r|)^2 / T`` so that a lucky start does not blow the weight up.
    """
    gap = squared_gap(model, panel, cfg.penalty_lags)
    floor = sum(cfg.penalty_lags * np.var(np.abs(panel.column(a.name))) ** 2 / len(panel)
                for a in model.assets)
    return ratio * abs(log_likelihood(model, panel)) / max(gap, floor, 1e-300)


def objective(model, panel, cfg, weight=None, targets=None):
    """Penalized log-likelihood ``log L - penalty`` (to be maximized)."""
    return log_likelihood(model, panel) - penalty(model, panel, cfg, weight, targets)


# ---------------------------------------------------------------------------
# parametrization


def _logit(p):
    return math.log(p) - math.log1p(-p)


def _expit(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def n_coordinates(m):
    return 9 * m + 2


def to_unconstrained(model):
    """
    Flat vector ``[logit p11, logit p22, then per market: mean,
    (lam, log alpha, log scale, atanh(beta / alpha)) for each state]``.

    Locations are not coordinates; both follow from the shared mean.
    """
    t = model.transitions
    out = [_logit(t.p11), _logit(t.p22)]
    for a in model.assets:
        out.append(a.common_mean)
        for s in a.states:
            out.extend([s.lam, math.log(s.alpha), math.log(s.scale),
                        math.atanh(s.beta / (s.alpha * _TANH_SCALE))])
    return np.array(out)


def from_unconstrained(vector, names):
    """Inverse of :func:`to_unconstrained`; ``names`` labels the markets."""
    x = np.asarray(vector, dtype=float)
    names = tuple(names)
    if x.shape != (n_coordinates(len(names)),):
        raise ValueError(f"expected {n_coordinates(len(names))} coordinates, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("unconstrained vector has non-finite entries")
    trans = TransitionMatrix(_expit(x[0]), _expit(x[1]))
    assets = []
    for j, name in enumerate(names):
        block = x[2 + 9 * j: 11 + 9 * j]
        shapes = []
        for lam, la, ls, zb in (block[1:5], block[5:9]):
            alpha = math.exp(la)
            shapes.append(GhypParams(float(lam), alpha, alpha * _TANH_SCALE * math.tanh(zb), math.exp(ls)))
        assets.append(AssetStates.with_mean(name, shapes[0], shapes[1], float(block[0])))
    return RegimeModel(trans, tuple(assets))


# ---------------------------------------------------------------------------
# starting values


def _symmetric_shape(variance, excess_kurtosis):
    """Symmetric NIG with the given variance and excess kurtosis (``3 / (alpha scale)``)."""
    k = min(max(excess_kurtosis, 0.3), 30.0)
    scale = math.sqrt(3.0 * variance / k)
    alpha = math.sqrt(3.0 / (k * variance))
    return GhypParams(-0.5, alpha, 0.0, scale)


def _excess_kurtosis(x):
    c = x - x.mean()
    v = np.mean(c * c)
    return float(np.mean(c**4) / (v * v) - 3.0)


#: Window (days) of the rolling volatility that splits dates for the start.
START_WINDOW = 21


def _rolling_volatility(panel, window=START_WINDOW):
    """Centered rolling mean of ``|r - mean| / sd``, pooled over markets."""
    x = panel.values
    dev = np.abs(x - x.mean(axis=0)) / x.std(axis=0)
    pooled = dev.mean(axis=1)
    kernel = np.ones(min(window, len(pooled)))
    return np.convolve(pooled, kernel, mode="same") / np.convolve(np.ones_like(pooled), kernel, mode="same")


def initial_guess(panel, seed=None, jitter=0.15):
    """
    Moment-based starting model.

    Dates are split at the median of a centered rolling volatility, which
    follows persistent regimes rather than single large days. Per split and
    market a symmetric NIG is matched to the split's second moment and
    excess kurtosis. Both transition diagonals start at 0.95. When ``seed``
    is given, the unconstrained coordinates are perturbed by
    ``jitter``-scaled normal noise (the transition coordinates are left
    alone).
    """
    _check_panel(panel)
    vol = _rolling_volatility(panel)
    calm = vol <= np.median(vol)
    if calm.all() or not calm.any():
        calm = np.arange(len(panel)) % 2 == 0
    assets = []
    for j, name in enumerate(panel.names):
        r = panel.values[:, j]
        mean = float(r.mean())
        shapes = [_symmetric_shape(float(np.mean((r[mask] - mean) ** 2)), _excess_kurtosis(r[mask]))
                  for mask in (calm, ~calm)]
        assets.append(AssetStates.with_mean(name, shapes[0], shapes[1], mean))
    model = RegimeModel(TransitionMatrix(0.95, 0.95), tuple(assets))
    if seed is None:
        return model
    rng = np.random.default_rng(seed)
    x = to_unconstrained(model)
    scale = np.full(x.size, jitter)
    scale[:2] = 0.0
    for j in range(panel.n_assets):
        scale[2 + 9 * j] *= np.std(panel.values[:, j]) / math.sqrt(len(panel))
    for _ in range(100):
        guess = from_unconstrained(x + scale * rng.normal(size=x.size), panel.names)
        if admissible(guess):
            return guess
    return model


def admissible(model):
    """True when every state law lies inside the calibration search box."""
    for a in model.assets:
        for p in a.states:
            if (abs(p.lam) > LAMBDA_BOUND or abs(p.beta) > BETA_RATIO_BOUND * p.alpha
                    or p.alpha * p.scale < ZETA_FLOOR or p.alpha > ALPHA_CEILING):
                return False
    return True


def _check_panel(panel):
    if len(panel) < 10:
        raise DataError(f"panel too short for calibration ({len(panel)} dates)")
    sd = panel.values.std(axis=0)
    if np.any(sd == 0.0):
        const = [n for n, s in zip(panel.names, sd) if s == 0.0]
        raise DataError(f"constant return series: {const}")


# ---------------------------------------------------------------------------
# optimizer


def _initial_simplex(x0, panel, step=0.25):
    """Axis-parallel simplex; the mean coordinates get a step of two standard errors."""
    n = x0.size
    simplex = np.tile(x0, (n + 1, 1))
    for i in range(n):
        simplex[i + 1, i] += step
    for j in range(panel.n_assets):
        i = 2 + 9 * j
        simplex[i + 1, i] = x0[i] + 2.0 * np.std(panel.values[:, j]) / math.sqrt(len(panel))
    return simplex


class _Objective:
    """Negative penalized log-likelihood in unconstrained coordinates, with a trace."""

    def __init__(self, panel, cfg, weight):
        self.panel = panel
        self.cfg = cfg
        self.weight = weight
        self.targets = _targets(panel, cfg.penalty_lags)
        self.evaluations = 0
        self.best = math.inf
        self.best_x = None
        self.trace = []

    def __call__(self, x):
        self.evaluations += 1
        if not np.all(np.isfinite(x)):
            return math.inf
        if np.max(np.abs(x)) > _COORD_LIMIT:
            return math.inf
        try:
            model = from_unconstrained(x, self.panel.names)
            if not admissible(model):
                return math.inf
            value = -objective(model, self.panel, self.cfg, self.weight, self.targets)
        except (RegimeRiskError, ValueError, FloatingPointError, OverflowError, ZeroDivisionError):
            return math.inf
        if not math.isfinite(value):
            return math.inf
        if value < self.best:
            self.best = value
            self.best_x = np.array(x, copy=True)
            self.trace.append((self.evaluations, -value))
        return value


def _run_simplex(fn, x0, panel, cfg, budget):
    simplex = _initial_simplex(x0, panel)
    res = minimize(fn, x0, method="Nelder-Mead",
                   options={"initial_simplex": simplex, "maxfev": budget, "maxiter": budget,
                            "xatol": 1e-6, "fatol": cfg.convergence_tol * max(1.0, abs(fn.best)),
                            "adaptive": True})
    return res


def _polish(fn, panel, cfg, budget, rounds):
    """Restarted Nelder-Mead from ``fn.best_x``; true once a restart stops improving."""
    previous = fn.best
    for round_ in range(rounds):
        if budget <= 0:
            return False
        res = _run_simplex(fn, fn.best_x, panel, cfg, budget)
        budget -= res.nfev
        gain = previous - fn.best
        previous = fn.best
        if round_ > 0 and gain <= cfg.convergence_tol * max(1.0, abs(fn.best)):
            return True
    return False


def calibrate(panel, cfg=None, initial=None):
    """
    Fit a :class:`RegimeModel` to ``panel``.

    Parameters
    ----------
    panel : ReturnPanel
    cfg : CalibrationConfig, optional
    initial : RegimeModel or sequence of RegimeModel, optional
        Explicit starting points. By default start ``r`` is
        ``initial_guess(panel, seed=cfg.seed + r)`` for ``r < cfg.restarts``
        (start 0 unperturbed).

    Returns
    -------
    CalibrationResult
        Best model over all starts, canonically labeled. Each start first
        runs ``screen_iterations`` evaluations; the best one then gets up to
        ``max_iterations`` more in restarted simplex rounds. ``converged`` is
        false when that budget ran out before a restart stopped improving.
    """
    cfg = cfg or CalibrationConfig()
    _check_panel(panel)
    n_par = n_coordinates(panel.n_assets)
    if len(panel) < 20 * n_par:
        warnings.warn(f"{len(panel)} dates for {n_par} parameters; estimates may be unreliable",
                      stacklevel=2)
    if initial is None:
        starts = [initial_guess(panel, None if r == 0 else cfg.seed + r) for r in range(cfg.restarts)]
    elif isinstance(initial, RegimeModel):
        starts = [initial]
    else:
        starts = list(initial)
    starts = [s if s.names == panel.names else _reorder(s, panel.names) for s in starts]
    if not all(admissible(s) for s in starts):
        raise ValueError("starting model lies outside the calibration search box (see admissible)")

    weight = cfg.penalty_weight
    if weight is None:
        weight = auto_penalty_weight(starts[0], panel, cfg)

    # screen every start on a short budget, then polish the best one
    screened = []
    for r, start in enumerate(starts):
        fn = _Objective(panel, cfg, weight)
        fn(to_unconstrained(start))
        _polish(fn, panel, cfg, int(cfg.screen_iterations), rounds=1)
        log.info("start %d: objective %.6f after %d evaluations", r, -fn.best, fn.evaluations)
        screened.append(fn)
    order = sorted(range(len(screened)), key=lambda i: screened[i].best)
    winner = screened[order[0]]
    converged = _polish(winner, panel, cfg, int(cfg.max_iterations), rounds=1 + cfg.polish_rounds)
    log.info("polished start %d: objective %.6f", order[0], -winner.best)

    summaries = [{"start": r, "objective": -fn.best, "evaluations": fn.evaluations,
                  "selected": r == order[0]} for r, fn in enumerate(screened)]
    total_evals = sum(fn.evaluations for fn in screened)
    best = (winner.best, winner.best_x, converged)
    trace = winner.trace

    model = from_unconstrained(best[1], panel.names).canonical()
    ll = log_likelihood(model, panel)
    pen = penalty(model, panel, cfg, weight)
    monotone = []
    for e, v in trace:
        if not monotone or v >= monotone[-1][1]:
            monotone.append((e, v))
    return CalibrationResult(model=model, objective=ll - pen, log_likelihood=ll, penalty=pen,
                             penalty_weight=weight, converged=best[2], evaluations=total_evals,
                             trace=monotone, starts=summaries)


def _reorder(model, names):
    try:
        return RegimeModel(model.transitions, tuple(model.asset(n) for n in names))
    except KeyError as exc:
        raise ParameterDomainError(f"initial model lacks market: {exc}") from None
