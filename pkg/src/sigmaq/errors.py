"""Exception hierarchy shared by all sigmaq modules."""


class SigmaqError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(SigmaqError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DimensionError(SigmaqError, ValueError):
    """Array shapes are inconsistent with each other or with the model."""


class SingularDesignError(SigmaqError):
    """The design matrix is rank deficient."""


class ImproperPosteriorError(SigmaqError):
    """The posterior parameters do not define a proper distribution."""


class DegeneratePosteriorError(SigmaqError):
    """The data determine the model exactly, collapsing the scale posterior."""


class DegenerateScaleError(SigmaqError):
    """A requested distribution has a rank-deficient scale matrix."""


class NumericError(SigmaqError):
    """An iterative numeric procedure failed to reach its tolerance."""


class ConvergenceError(NumericError):
    """An optimizer stopped without satisfying its convergence test."""


class CurvatureError(SigmaqError):
    """The local curvature at a candidate mode has the wrong sign."""


class InitializationError(SigmaqError):
    """A sampler was started from a state with zero target density."""


class ParseError(SigmaqError, ValueError):
    """A data file could not be parsed; the message names the offending line."""
