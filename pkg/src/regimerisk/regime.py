"""
Two-state hidden Markov model of multi-market returns.

A hidden ergodic chain selects the state each day; given the state, each
market's return is an independent GHYP draw with state-specific
parameters. Both states of a market share one distribution mean, which
makes raw returns serially uncorrelated while absolute returns keep the
chain's autocorrelation.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import FilterDegeneracyError, MomentError, ParameterDomainError
from .fourier import CharFn
from .ghyp import GhypParams, equal_mean_location, ghyp_cf, ghyp_logpdf, ghyp_mean, ghyp_pdf, ghyp_sample, mixing_mean
from .panel import ReturnPanel, business_dates
from .quadrature import integrate

#: Tolerance on equality of the two state means of a market.
MEAN_TOLERANCE = 1e-10


@dataclass(frozen=True)
class TransitionMatrix:
    """Two-state transition kernel; ``p11``/``p22`` are the stay probabilities."""

    p11: float
    p22: float

    def __post_init__(self):
        for name in ("p11", "p22"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ParameterDomainError(f"{name} must lie strictly in (0, 1), got {value!r}")

    @property
    def matrix(self):
        return np.array([[self.p11, 1.0 - self.p11], [1.0 - self.p22, self.p22]])

    @property
    def second_eigenvalue(self):
        return self.p11 + self.p22 - 1.0

    def swapped(self):
        return TransitionMatrix(self.p22, self.p11)


@dataclass(frozen=True)
class Posterior:
    """Probabilities of the two hidden states."""

    p1: float
    p2: float

    def __post_init__(self):
        if self.p1 < 0.0 or self.p2 < 0.0 or abs(self.p1 + self.p2 - 1.0) > 1e-12:
            raise ParameterDomainError(f"invalid state probabilities ({self.p1!r}, {self.p2!r})")

    def as_array(self):
        return np.array([self.p1, self.p2])

    @classmethod
    def from_array(cls, arr):
        return cls(float(arr[0]), float(arr[1]))


@dataclass(frozen=True)
class AssetStates:
    """The two state-conditional laws of one market."""

    name: str
    state1: GhypParams
    state2: GhypParams

    @classmethod
    def with_mean(cls, name, shape1, shape2, mean):
        """Build from location-free shapes, placing both at distribution mean ``mean``."""
        return cls(name,
                   shape1.with_location(equal_mean_location(shape1, mean)),
                   shape2.with_location(equal_mean_location(shape2, mean)))

    @property
    def states(self):
        return (self.state1, self.state2)

    @property
    def common_mean(self):
        return ghyp_mean(self.state1)

    @property
    def strip(self):
        return self.state1.strip.intersect(self.state2.strip)

    def swapped(self):
        return AssetStates(self.name, self.state2, self.state1)


@dataclass(frozen=True)
class RegimeModel:
    """Shared transition kernel plus per-market state pairs."""

    transitions: TransitionMatrix
    assets: tuple

    def __post_init__(self):
        assets = tuple(self.assets)
        if not assets:
            raise ParameterDomainError("model needs at least one market")
        names = [a.name for a in assets]
        if len(set(names)) != len(names):
            raise ParameterDomainError(f"duplicate market names {names}")
        for a in assets:
            m1, m2 = ghyp_mean(a.state1), ghyp_mean(a.state2)
            if abs(m1 - m2) > MEAN_TOLERANCE * max(1.0, abs(m1)):
                raise ParameterDomainError(
                    f"state means of {a.name!r} differ: {m1!r} vs {m2!r}")
        object.__setattr__(self, "assets", assets)

    @property
    def names(self):
        return tuple(a.name for a in self.assets)

    @property
    def n_assets(self):
        return len(self.assets)

    @property
    def n_parameters(self):
        """Free parameters: nine per market (the second mean is implied) plus two."""
        return 10 * self.n_assets - self.n_assets + 2

    def asset(self, key):
        if isinstance(key, AssetStates):
            return key
        if isinstance(key, (int, np.integer)):
            return self.assets[key]
        for a in self.assets:
            if a.name == key:
                return a
        raise KeyError(f"unknown market {key!r}; have {self.names}")

    def relabeled(self):
        """Swap the two state labels everywhere."""
        return RegimeModel(self.transitions.swapped(), tuple(a.swapped() for a in self.assets))

    def canonical(self):
        """
        Apply the labeling convention: state 1 has the smaller mean absolute
        deviation ``E|r - mu|`` for the first market.
        """
        first = self.assets[0]
        mu = first.common_mean
        d1 = conditional_expectation(first.state1, "abs", mu)
        d2 = conditional_expectation(first.state2, "abs", mu)
        return self.relabeled() if d1 > d2 else self


@dataclass(frozen=True, eq=False)
class PosteriorSeries:
    """Filtered state probabilities, one row per date (after observing it)."""

    dates: np.ndarray
    probs: np.ndarray

    def __len__(self):
        return self.probs.shape[0]

    def __getitem__(self, i):
        return Posterior.from_array(self.probs[i])


def stationary_distribution(t):
    """Closed-form left fixed point of the transition matrix."""
    denom = 2.0 - t.p11 - t.p22
    return Posterior((1.0 - t.p22) / denom, (1.0 - t.p11) / denom)


def k_step(t, k):
    """``k``-step transition matrix ``P^k``."""
    if int(k) != k or k < 1:
        raise ValueError(f"k must be an integer >= 1, got {k!r}")
    return np.linalg.matrix_power(t.matrix, int(k))


_TRANSFORMS = {
    "abs": lambda x, c: np.abs(x - c),
    "square": lambda x, c: (x - c) ** 2,
    "identity": lambda x, c: x,
}


@lru_cache(maxsize=8192)
def conditional_expectation(p, g="abs", center=0.0):
    """
    ``E[g(X)]`` for ``X ~ GHYP(p)`` by adaptive Gauss-Kronrod quadrature.

    ``g`` is ``"abs"`` (``|x - center|``), ``"square"`` (``(x - center)^2``)
    or ``"identity"``. The integration range is split at the location and
    at ``center``.
    """
    if g not in _TRANSFORMS:
        raise ValueError(f"unknown transform {g!r}; expected one of {sorted(_TRANSFORMS)}")
    # all polynomial moments exist iff the MGF is finite around 0
    if not p.strip.lower < 0.0 < p.strip.upper:
        raise MomentError(f"moments of {p} do not exist")
    fn = _TRANSFORMS[g]
    sd = math.sqrt(mixing_mean(p)) + abs(p.beta) * mixing_mean(p)
    tol = 1e-10 * (sd * sd if g == "square" else sd)
    value, _ = integrate(lambda x: fn(x, center) * ghyp_pdf(p, x), -math.inf, math.inf,
                         abstol=tol, breakpoints=(p.location, center), scale=sd)
    return float(value)


def abs_return_autocov(model, asset, k, g="abs"):
    """
    Model autocovariance ``COV[g(r_n), g(r_{n+k})] = pi G P^k G 1 - (pi G 1)^2``
    with ``G = diag(E[g(r) | state i])``.
    """
    a = model.asset(asset)
    gvec = np.array([conditional_expectation(s, g) for s in a.states])
    pi = stationary_distribution(model.transitions).as_array()
    pk = k_step(model.transitions, k)
    return float(pi @ np.diag(gvec) @ pk @ gvec - (pi @ gvec) ** 2)


def autocov_curve(model, asset, lags, g="abs"):
    """
    :func:`abs_return_autocov` for each lag in ``1..lags``, using the
    spectral form ``P^k = 1 pi + l^k (I - 1 pi)`` with ``l = p11 + p22 - 1``.
    """
    a = model.asset(asset)
    gvec = np.array([conditional_expectation(s, g) for s in a.states])
    pi = stationary_distribution(model.transitions).as_array()
    resid = np.eye(2) - np.outer(np.ones(2), pi)
    base = float(pi @ np.diag(gvec) @ resid @ gvec)
    k = np.arange(1, int(lags) + 1)
    return base * model.transitions.second_eigenvalue ** k


def state_log_densities(model, panel):
    """``(T, 2)`` array of per-state joint log densities of each date's observation."""
    values = panel.values if isinstance(panel, ReturnPanel) else np.atleast_2d(np.asarray(panel, dtype=float))
    if values.shape[1] != model.n_assets:
        raise ValueError(f"observation has {values.shape[1]} markets, model has {model.n_assets}")
    out = np.zeros((values.shape[0], 2))
    for j, a in enumerate(model.assets):
        out[:, 0] += ghyp_logpdf(a.state1, values[:, j])
        out[:, 1] += ghyp_logpdf(a.state2, values[:, j])
    return out


def forward_pass(logdens, t, initial):
    """
    Scaled forward recursion in log space.

    Returns ``(probs, logliks)``: filtered posteriors ``(T, 2)`` and the log
    one-step predictive density of each date.
    """
    p11, p22 = t.p11, t.p22
    q12, q21 = 1.0 - p11, 1.0 - p22
    a1, a2 = float(initial[0]), float(initial[1])
    n = logdens.shape[0]
    probs = np.empty((n, 2))
    lls = np.empty(n)
    exp, log = math.exp, math.log
    for i, (l1, l2) in enumerate(logdens.tolist()):
        pred1 = a1 * p11 + a2 * q21
        pred2 = a1 * q12 + a2 * p22
        m = l1 if l1 > l2 else l2
        if m == -math.inf or m != m:
            raise FilterDegeneracyError(i)
        e1 = pred1 * exp(l1 - m)
        e2 = pred2 * exp(l2 - m)
        c = e1 + e2
        if not c > 0.0:
            raise FilterDegeneracyError(i)
        a1 = e1 / c
        a2 = e2 / c
        probs[i, 0] = a1
        probs[i, 1] = a2
        lls[i] = m + log(c)
    return probs, lls


def posterior_update(prev, model, observation):
    """One step of the filter: ``p_n = p_{n-1} P F(r_n) / (p_{n-1} P F(r_n) 1)``."""
    obs = np.asarray(observation, dtype=float).reshape(1, -1)
    probs, _ = forward_pass(state_log_densities(model, obs), model.transitions, prev.as_array())
    return Posterior.from_array(probs[0])


def filter_series(model, panel, initial=None):
    """
    Run the filter over every date of ``panel``.

    ``initial`` defaults to the stationary distribution.
    """
    if initial is None:
        initial = stationary_distribution(model.transitions)
    if len(panel) == 0:
        return PosteriorSeries(panel.dates, np.empty((0, 2)))
    panel = panel.select(model.names)
    probs, _ = forward_pass(state_log_densities(model, panel), model.transitions, initial.as_array())
    return PosteriorSeries(panel.dates, probs)


def nperiod_cf(posterior, model, asset, horizon, u):
    """
    Characteristic function of the sum of the next ``horizon`` returns of
    ``asset``: ``p (P diag(phi1(u), phi2(u)))^N 1``.
    """
    if int(horizon) != horizon or horizon < 1:
        raise ValueError(f"horizon must be an integer >= 1, got {horizon!r}")
    a = model.asset(asset)
    u = np.asarray(u, dtype=complex)
    a.strip.check(u)
    return _nperiod(np.asarray(posterior.as_array() if isinstance(posterior, Posterior) else posterior, float),
                    model.transitions.matrix, a, int(horizon), u)


def _nperiod(weights, pmat, a, horizon, u):
    phis = np.stack([ghyp_cf(a.state1, u), ghyp_cf(a.state2, u)], axis=-1)
    vec = np.broadcast_to(weights.astype(complex), phis.shape)
    for _ in range(horizon):
        vec = (vec @ pmat) * phis
    return vec.sum(axis=-1)


def nperiod_charfn(posterior, model, asset, horizon):
    """:class:`CharFn` of the ``horizon``-period return given ``posterior``."""
    a = model.asset(asset)
    weights = posterior.as_array() if isinstance(posterior, Posterior) else np.asarray(posterior, float)
    pmat = model.transitions.matrix
    h = int(horizon)
    return CharFn(lambda u: _nperiod(weights, pmat, a, h, u), a.strip,
                  center=h * a.common_mean, spread=_nperiod_spread(weights, model, a, h))


def _nperiod_spread(weights, model, a, horizon):
    # standard deviation of the N-period sum; means are equal so only
    # state variances and the chain's persistence enter
    var = np.array([conditional_expectation(s, "square", a.common_mean) for s in a.states])
    pmat = model.transitions.matrix
    total = 0.0
    w = np.asarray(weights, float)
    for _ in range(horizon):
        w = w @ pmat
        total += float(w @ var)
    return math.sqrt(total)


def _chain(t, steps, rng):
    pi = stationary_distribution(t)
    state = 0 if rng.random() < pi.p1 else 1
    leave = (1.0 - t.p11, 1.0 - t.p22)
    out = np.empty(steps, dtype=np.int8)
    filled = 0
    while filled < steps:
        # sojourn lengths are geometric; draw runs of alternating states in blocks
        block = max(64, int((steps - filled) * max(leave)) + 64)
        runs = np.empty(block, dtype=np.int64)
        runs[0::2] = rng.geometric(leave[state], size=(block + 1) // 2)
        runs[1::2] = rng.geometric(leave[1 - state], size=block // 2)
        labels = (state + np.arange(block)) % 2
        seq = np.repeat(labels, runs)
        take = min(seq.size, steps - filled)
        out[filled:filled + take] = seq[:take]
        filled += take
        state = (state + block) % 2
    return out


def simulate(model, steps, seed=None, start="2000-01-03"):
    """
    Simulate the hidden chain (started from stationarity) and returns.

    Returns
    -------
    states : ndarray of int, values 1 or 2
    panel : ReturnPanel on consecutive business days from ``start``
    """
    steps = int(steps)
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    rng = np.random.default_rng(seed)
    chain = _chain(model.transitions, steps, rng)
    values = np.empty((steps, model.n_assets))
    mask1 = chain == 0
    n1 = int(mask1.sum())
    for j, a in enumerate(model.assets):
        if n1:
            values[mask1, j] = ghyp_sample(a.state1, n1, rng)
        if steps - n1:
            values[~mask1, j] = ghyp_sample(a.state2, steps - n1, rng)
    panel = ReturnPanel(business_dates(steps, start), model.names, values, ("simulated",))
    return chain.astype(int) + 1, panel
