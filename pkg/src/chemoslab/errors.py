"""Exception and warning types shared across the package."""


class ChemoslabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ChemoslabError):
    """Bad or missing configuration (unknown key, out-of-range size, ...)."""


class ValidationError(ChemoslabError):
    """Data violates a model invariant (e.g. nonpositive sigma)."""


class DimensionError(ChemoslabError):
    """Field shapes do not conform to the mesh or quadrature."""


class SolverError(ChemoslabError):
    """Numerical failure: zero pivot, nonpositive coefficient, NaN.

    ``dump`` optionally carries arrays describing the failing state.
    """

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}


class ConvergenceWarning(RuntimeWarning):
    """Source iteration stopped at its cap before reaching tolerance."""


class StabilityWarning(RuntimeWarning):
    """Explicit drift step violates its CFL condition."""
