"""Exception types shared across the package."""


class LevyMapsError(Exception):
    """Base class for all package errors."""


class SchemaError(LevyMapsError):
    """Malformed input file or specification dictionary."""


class DomainError(LevyMapsError):
    """Operation applied outside its domain of definition.

    Typical cause: a transform that needs a finite logarithmic moment was
    applied to a measure whose log-moment diverges.
    """


class QuadratureError(LevyMapsError):
    """Adaptive quadrature failed to converge to the requested tolerance."""
