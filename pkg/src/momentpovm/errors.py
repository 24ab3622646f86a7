"""Exception hierarchy shared by all modules."""


class MomentPovmError(Exception):
    """Base class for library errors."""


class InvalidInputError(MomentPovmError, ValueError):
    pass


class InvalidDensityError(InvalidInputError):
    pass


class InvalidObservableError(InvalidInputError):
    pass


class TruncationError(InvalidInputError):
    pass


class IncompleteFamilyError(InvalidInputError):
    pass


class NumericError(MomentPovmError, ArithmeticError):
    pass


class RankDeficiencyError(NumericError):
    """Hankel matrix is not strictly positive definite at ``order``."""

    def __init__(self, order, message=None):
        self.order = order
        super().__init__(message or f"Hankel matrix of order {order} is not positive definite")


class PositivityError(NumericError):
    pass


class UnderdeterminedError(NumericError):
    def __init__(self, message, labels=()):
        self.labels = tuple(labels)
        super().__init__(message)


class ConditioningError(NumericError):
    def __init__(self, message, labels=(), condition=None):
        self.labels = tuple(labels)
        self.condition = condition
        super().__init__(message)
