"""Exception hierarchy.

The CLI maps the three families onto exit codes: ``InputError`` -> 2,
``StatisticalError`` -> 3, ``PricingError`` -> 4.
"""


class MlobError(Exception):
    """Base class for every error raised by this package."""


class InputError(MlobError, ValueError):
    """Malformed input data: bad frames, inconsistent books, bad configs."""


class StatisticalError(MlobError, ArithmeticError):
    """A statistic is undefined on the supplied data."""


class PricingError(MlobError, ValueError):
    """Option pricing cannot proceed for the requested market."""


# tape codec / book
class TapeError(InputError):
    pass


class TruncatedFrame(TapeError):
    pass


class MalformedFrame(TapeError):
    pass


class UnknownKind(TapeError):
    pass


class FieldRange(TapeError):
    pass


class BadHeader(TapeError):
    pass


class NonMonotonicTimestamp(TapeError):
    pass


class UnknownOrder(TapeError):
    pass


class DuplicateOrder(TapeError):
    pass


class OverExecution(TapeError):
    pass


class CrossedBook(TapeError):
    pass


# ledger / parent
class SignMismatch(InputError):
    pass


class InsufficientDepth(InputError):
    pass


# impact / hftest
class InsufficientData(StatisticalError):
    pass


class BucketTooSmall(StatisticalError):
    pass


class DegenerateVariance(StatisticalError):
    pass


class ZeroVariance(StatisticalError):
    pass


# limits / simgen
class InvalidParams(InputError):
    pass


class GrowthViolation(InputError):
    pass


class InvalidConfig(InputError):
    pass


# pricing
class IllPosedRegime(PricingError):
    pass


class GridTooCoarse(PricingError):
    pass
