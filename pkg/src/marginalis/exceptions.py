"""Exception types shared across the package."""


class MarginalisError(Exception):
    """Base class for all package-specific errors."""


class BoundaryError(MarginalisError, ValueError):
    """A constrained value sits on or outside its support boundary."""


class DomainError(MarginalisError, ValueError):
    """An input is outside the mathematical domain of an operation."""


class DataError(MarginalisError, ValueError):
    """Invalid observed data: bad deck index, schema violation, layout mismatch."""


class FitError(MarginalisError, ValueError):
    """A moment fit or covariance factorization failed."""


class SamplingError(MarginalisError, RuntimeError):
    """MCMC could not proceed (NaN log-density, degenerate configuration)."""


class DiagnosticError(MarginalisError, ValueError):
    """Not enough draws, or a degenerate series, for a diagnostic."""


class EstimationError(MarginalisError, RuntimeError):
    """A marginal-likelihood estimator could not produce a usable value."""
