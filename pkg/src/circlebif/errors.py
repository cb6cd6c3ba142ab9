"""Exception hierarchy shared by every module."""


class CircleBifError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class ValidationError(CircleBifError):
    exit_code = 2


class NumericalError(CircleBifError):
    exit_code = 3


class PreconditionError(ValidationError):
    pass


class BasePointMismatch(ValidationError):
    pass


class CompositionBaseMismatch(ValidationError):
    pass


class DegenerateConstruction(ValidationError):
    pass


class NotDiffeomorphism(ValidationError):
    def __init__(self, message, at=None):
        super().__init__(message)
        self.at = at


class MonotonicityUnverified(ValidationError):
    pass


class RationalNotAttained(CircleBifError):
    pass


class NonIsolatedOrbits(CircleBifError):
    pass


class NonGenericFamily(CircleBifError):
    pass


class SingularSystem(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass
