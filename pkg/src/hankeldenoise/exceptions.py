"""Exception hierarchy shared by the estimators and the benchmark harness."""


class HankelDenoiseError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(HankelDenoiseError, ValueError):
    pass


class InvalidRankError(HankelDenoiseError, ValueError):
    pass


class SingularInputError(HankelDenoiseError, ValueError):
    """Raised when a Gram matrix that must be inverted is (numerically) singular."""


class DegenerateInputError(HankelDenoiseError, ValueError):
    pass


class PoleProximityError(HankelDenoiseError, ValueError):
    """Raised when the D-transform is evaluated at or below the bulk edge."""
