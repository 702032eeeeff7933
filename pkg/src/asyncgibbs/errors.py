"""Exception hierarchy shared by every module in the package."""


class AsyncGibbsError(Exception):
    """Base class for all package errors."""


class ConfigError(AsyncGibbsError, ValueError):
    pass


class StateSpaceTooLarge(AsyncGibbsError):
    pass


class SubsetSpaceTooLarge(AsyncGibbsError):
    pass


class DimensionMismatch(AsyncGibbsError, ValueError):
    pass


class DobrushinViolated(AsyncGibbsError):
    """Raised when a bound needs total influence alpha < 1."""


class EpsilonTooSmall(AsyncGibbsError):
    """Raised when epsilon is below the validity threshold of a bound."""


class NonConvexBoundFunction(AsyncGibbsError):
    pass


class NonFerromagnetic(AsyncGibbsError):
    pass


class InsufficientTrials(AsyncGibbsError):
    pass


class UnattainableTauStar(AsyncGibbsError, ValueError):
    pass


class GenerationFailure(AsyncGibbsError):
    pass

