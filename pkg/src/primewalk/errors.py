"""Exception hierarchy shared by every module.

Each class carries the CLI exit code it maps to, so the front end never
needs a lookup table of its own.
"""


class PrimewalkError(Exception):
    exit_code = 1


class InvalidInputError(PrimewalkError, ValueError):
    exit_code = 3


class InvalidParameterError(InvalidInputError):
    pass


class NormalizationError(InvalidInputError):
    pass


class CommonDivisorError(InvalidInputError):
    pass


class OutOfRangeError(InvalidInputError, IndexError):
    pass


class DomainError(InvalidInputError):
    pass


class InsufficientDataError(InvalidInputError):
    pass


class UndefinedMomentError(InvalidInputError):
    pass


class SingularDesignError(InvalidInputError):
    pass


class ResourceError(PrimewalkError):
    exit_code = 4


class BudgetExceededError(ResourceError):
    pass


class RunawayError(ResourceError):
    pass


class HorizonExceededError(ResourceError):
    """Raised when the tail bound is not met within the allowed horizon.

    ``partial`` holds whatever was computed before giving up.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NumericalError(PrimewalkError):
    exit_code = 2


class ToleranceNotMetError(PrimewalkError):
    exit_code = 2
