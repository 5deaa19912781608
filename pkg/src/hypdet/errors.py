"""Exception types shared across the package.

Every error that a caller is expected to catch programmatically lives here;
modules raise these rather than bare ValueError so the CLI can map failure
classes to exit codes.
"""


class HypdetError(Exception):
    """Base class for all package errors."""


class DomainError(HypdetError):
    """Input outside the mathematical domain of an operation."""


class EllipticElement(DomainError):
    """A matrix with |trace| < 2 where a hyperbolic element is required."""


class InvalidDecomposition(DomainError):
    """A pants decomposition datum that violates the combinatorial rules."""


class BudgetExceeded(HypdetError):
    """Predicted resource usage exceeds the configured budget."""

    def __init__(self, message, predicted=None, budget=None):
        super().__init__(message)
        self.predicted = predicted
        self.budget = budget


class IncompleteSpectrum(HypdetError):
    """Enumeration stopped before the completeness radius was exhausted."""


class GapTooLargeToResolve(HypdetError):
    """Spectral-gap estimate is not resolvable above the trace noise floor.

    Carries the diagnostic time and the noise level so callers can report a
    one-sided bound instead of a point estimate.
    """

    def __init__(self, message, t=None, noise=None, lower_bound=None):
        super().__init__(message)
        self.t = t
        self.noise = noise
        self.lower_bound = lower_bound


class NoSpectralGapEstimate(HypdetError):
    """Determinant pipeline has no usable spectral-gap input.

    Raised when the heat-trace gap estimate fails and no external override
    was supplied; the long-time remainder cannot be certified without one.
    """


class NotHyperbolic(DomainError):
    """A group element that is not hyperbolic where a geodesic is required."""


class MomentDivergesByTheorem(HypdetError):
    """Requested moment is infinite for every genus, so estimation is refused.

    Raised for systole moments with exponent beta >= 2: the integrand
    1/sys^beta against the Weil-Petersson measure has a non-integrable
    singularity at the pinching locus, independent of sample size.
    """


class FitUnstable(HypdetError):
    """A fitted auxiliary model produced parameters outside its sane range."""
