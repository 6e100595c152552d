class SqbaError(Exception):
    """Base class for every error raised by this package."""


class InputError(SqbaError, ValueError):
    pass


class FormatError(SqbaError):
    pass


class TrainingError(SqbaError):
    pass


class DataError(SqbaError):
    pass


class BudgetExhausted(SqbaError):
    """The oracle refused a query because the session budget is spent."""


class AttackFailed(SqbaError):
    pass


class InitFailed(AttackFailed):
    pass


class LineSearchFailed(SqbaError):
    pass


class DegenerateDirection(SqbaError):
    pass


class DegenerateGradient(SqbaError):
    pass


class NoAdversarialGradient(SqbaError):
    pass
