"""Exception types raised across the package."""


class LqgError(Exception):
    """Base class for all package errors."""


class InvalidInput(LqgError, ValueError):
    pass


class InvalidDimensions(InvalidInput):
    pass


class SingularCovariance(LqgError, ValueError):
    pass


class InvalidCost(LqgError, ValueError):
    pass


class NotStabilizable(LqgError, ArithmeticError):
    pass


class NotDetectable(LqgError, ArithmeticError):
    pass


class DegenerateInnovation(LqgError, ArithmeticError):
    pass


class UnstableClosedLoop(LqgError, ArithmeticError):
    pass


class DegenerateClosedLoop(LqgError, ArithmeticError):
    pass


class InvalidDelta(LqgError, ValueError):
    pass


class DivisionByZero(LqgError, ZeroDivisionError):
    pass


class NondegeneracyViolated(LqgError, ValueError):
    pass


class InvalidTheta(LqgError, ValueError):
    pass


class WrongMode(LqgError, ValueError):
    pass


class InvalidPrior(LqgError, ValueError):
    pass


class NotOveractuated(LqgError, ValueError):
    pass


class InvalidInstance(InvalidInput):
    """Malformed instance description (missing key, bad shape)."""
