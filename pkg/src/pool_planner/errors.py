"""Exceptions raised by the planner.

Everything derives from :class:`PoolingError` (itself a ``ValueError``) so the
CLI can turn any domain failure into a one-line diagnostic and exit status 2.
"""


class PoolingError(ValueError):
    pass


class NonDivisibleError(PoolingError):
    pass


class NotDecreasingError(PoolingError):
    pass


class PoolTooSmallError(PoolingError):
    pass


class EmptyStrategyError(PoolingError):
    pass


class InvalidPoolSizeError(PoolingError):
    pass


class OutOfRangeError(PoolingError):
    pass


class BracketFailureError(PoolingError):
    pass


class StrategyOverflowError(PoolingError):
    pass


class LengthMismatchError(PoolingError):
    pass


class TooLargeError(PoolingError):
    pass


class InvalidPoolsError(PoolingError):
    pass
