"""Exception types shared across the package."""


class GridnavError(Exception):
    pass


class InvalidInputError(GridnavError, ValueError):
    """An argument violates an operation's precondition."""


class InsufficientDataError(GridnavError):
    """Too few valid samples to compute a statistic."""


class InsufficientTokensError(GridnavError):
    """A transmission was attempted with less than one communication token."""


class InvalidConfigError(GridnavError, ValueError):
    pass


class ExplorationComplete(GridnavError):
    """Raised by goal selection when every region is masked and no target is known."""
