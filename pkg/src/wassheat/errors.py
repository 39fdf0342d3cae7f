"""Exception types raised across the package."""


class WassheatError(ValueError):
    """Base class for all package errors."""


class EmptySupport(WassheatError):
    pass


class NegativeWeight(WassheatError):
    pass


class DegenerateWeightSum(WassheatError):
    pass


class DimensionMismatch(WassheatError):
    pass


class NegativeVariance(WassheatError):
    pass


class SizeGuardExceeded(WassheatError):
    pass


class TensorGuardExceeded(WassheatError):
    pass


class ArityGuardExceeded(WassheatError):
    pass


class GridMismatch(WassheatError):
    pass


class GridMissing(WassheatError):
    pass


class NotStabilized(WassheatError):
    """The far-point limit defining the analytic extension did not settle."""


class IllConditioned(WassheatError):
    pass


class IndexOutOfRange(WassheatError):
    pass


class SupportExceedsBall(WassheatError):
    pass


class ConfigError(WassheatError):
    pass
