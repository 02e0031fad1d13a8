"""
Two-state regime-switching model of multi-market returns with
generalized hyperbolic state laws, penalized maximum-likelihood
calibration, and value-at-risk / expected shortfall by damped Fourier
inversion.
"""

__version__ = "0.1.0"

from .errors import (BesselRangeError, DataError, DegenerateInputError, FilterDegeneracyError,
                     InversionConfigError, MomentError, ParameterDomainError, QuadratureError,
                     RegimeRiskError, StripError)
from .bessel import bessel_k
from .ghyp import (GhypParams, Strip, equal_mean_location, ghyp_cf, ghyp_logpdf, ghyp_mean, ghyp_mgf,
                   ghyp_pdf, ghyp_sample)
from .fourier import (CdfCurve, CharFn, InversionConfig, cdf_fft, cdf_point, expected_shortfall,
                      ghyp_charfn, mixture_charfn, normal_charfn, select_damping, value_at_risk)
from .panel import ReturnPanel
from .regime import (AssetStates, Posterior, PosteriorSeries, RegimeModel, TransitionMatrix,
                     abs_return_autocov, filter_series, k_step, nperiod_cf, nperiod_charfn,
                     posterior_update, simulate, stationary_distribution)
from .calibration import (CalibrationConfig, CalibrationResult, calibrate, empirical_autocov, initial_guess,
                          log_likelihood, objective, penalty, from_unconstrained, to_unconstrained)
from .backtest import (BacktestReport, BreachSeries, RegimeRiskEngine, RiskReport, backtest, backtest_simple,
                       binomial_test_pvalue, breach_series, risk_series, rolling_simple_var,
                       runs_test_pvalue)
from .data import ingest, load_model, save_model
