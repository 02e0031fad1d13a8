"""Exception hierarchy shared by all modules."""


class RegimeRiskError(Exception):
    """Base class for every error raised by this package."""


class ParameterDomainError(RegimeRiskError, ValueError):
    """A distribution or model parameter lies outside its admissible domain."""


class BesselRangeError(RegimeRiskError, ArithmeticError):
    """Bessel K over- or underflows in linear space at the given argument."""

    def __init__(self, order, argument, message=None):
        self.order = order
        self.argument = argument
        super().__init__(message or f"K_{order}({argument}) is not representable in double precision")


class StripError(RegimeRiskError, ValueError):
    """An argument lies outside the open interval where a transform is finite.

    For characteristic functions the checked value is ``Im(u)``; for the MGF
    it is the real argument itself.
    """

    def __init__(self, value, lower, upper):
        self.value = value
        self.lower = lower
        self.upper = upper
        super().__init__(f"value {value!r} outside admissible interval ({lower!r}, {upper!r})")


class MomentError(RegimeRiskError, ValueError):
    """A requested conditional expectation does not exist."""


class FilterDegeneracyError(RegimeRiskError, ArithmeticError):
    """All state densities vanish at an observation, so the filter cannot normalize."""

    def __init__(self, index=None, message=None):
        self.index = index
        where = "" if index is None else f" at date index {index}"
        super().__init__(message or f"all state densities underflow to zero{where}")


class QuadratureError(RegimeRiskError, ArithmeticError):
    """Adaptive quadrature failed to reach its tolerance."""

    def __init__(self, achieved, requested):
        self.achieved = achieved
        self.requested = requested
        super().__init__(f"quadrature reached error estimate {achieved:.3g}, requested {requested:.3g}")


class InversionConfigError(RegimeRiskError, ValueError):
    """The Fourier inversion grid is unsuitable for the target distribution."""


class DataError(RegimeRiskError, ValueError):
    """Input data violates the ingestion contract."""


class DegenerateInputError(RegimeRiskError, ValueError):
    """A statistical test is undefined for the given input."""
