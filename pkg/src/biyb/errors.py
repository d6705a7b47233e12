"""Exception types raised across the package."""


class BiYBError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDimensionError(BiYBError, ValueError):
    pass


class BasisMismatchError(BiYBError, ValueError):
    pass


class ConsistencyError(BiYBError):
    """An internal consistency check failed (usually signals a bug)."""


class ConditioningError(BiYBError, ValueError):
    pass


class SubspaceError(BiYBError, ValueError):
    """An element expected to lie in a subspace is too far from it."""


class SingularOperatorError(BiYBError, ValueError):
    def __init__(self, message, site=None):
        super().__init__(message)
        self.site = site


class SpectralPoleError(BiYBError, ValueError):
    pass


class InstabilityError(BiYBError, RuntimeError):
    pass


class AliasingError(BiYBError, ValueError):
    pass


class TransportError(BiYBError, RuntimeError):
    pass


class ParameterError(BiYBError, ValueError):
    pass
