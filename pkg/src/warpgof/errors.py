"""Exception hierarchy shared by all warpgof modules."""


class WarpGofError(Exception):
    """Base class for every error raised by this package."""


class DomainError(WarpGofError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class EmptySample(DomainError):
    pass


class NonFiniteValue(DomainError):
    pass


class EmptyCollection(DomainError):
    pass


class OracleTooLarge(DomainError):
    pass


class ParamOutOfBounds(DomainError):
    pass


class RangeError(DomainError):
    pass


class DensityError(DomainError):
    pass


class SingularPhi(WarpGofError, ArithmeticError):
    pass


class NoStartPoint(WarpGofError):
    pass


class EstimationFailed(WarpGofError):
    """The optimizer did not converge; ``best`` holds the best point found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class BootstrapUnstable(WarpGofError):
    pass


class SigmaDegenerate(WarpGofError):
    pass


class SigmaDegenerateWarning(UserWarning):
    pass


class FormatError(WarpGofError):
    pass


class ParseError(WarpGofError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class UsageError(WarpGofError):
    pass
