"""Exception hierarchy shared across the package."""


class LowRankBayesError(Exception):
    """Base class for all package-specific errors."""


class InputValidationError(LowRankBayesError, ValueError):
    """Malformed input: wrong shape, non-finite entries, out-of-range argument."""


class DegeneracyError(LowRankBayesError):
    """A matrix required to be symmetric positive definite is numerically not."""


class SingularityError(LowRankBayesError):
    """Covariance comparison eigenvalue at or below -1: the Gaussian pair is singular."""


class DomainError(LowRankBayesError):
    """Divergence undefined for the given order/spectrum combination."""


class RangeViolationError(LowRankBayesError):
    """Operator columns fall outside the required covariance range."""


class QuadratureError(LowRankBayesError):
    """Adaptive quadrature failed to reach the requested tolerance."""
