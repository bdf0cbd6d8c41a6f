"""Exception hierarchy."""


class RelabcError(Exception):
    """Base class for all errors raised by this package."""


class InvalidStatisticError(RelabcError, ValueError):
    pass


class InvalidParameterError(RelabcError, ValueError):
    pass


class SupportError(RelabcError, ValueError):
    pass


class MomentUndefinedError(RelabcError, ArithmeticError):
    pass


class IncompleteMomentTableError(RelabcError, KeyError):
    pass


class DegenerateFormError(RelabcError, ValueError):
    pass


class DimensionMismatchError(RelabcError, ValueError):
    pass


class NonConvergenceError(RelabcError, RuntimeError):
    def __init__(self, message, iterations=None, last=None):
        super().__init__(message)
        self.iterations = iterations
        self.last = last


class BudgetExhaustedError(RelabcError, RuntimeError):
    """Raised when the proposal budget runs out; ``run`` holds the partial run."""

    def __init__(self, message, run=None):
        super().__init__(message)
        self.run = run


class EmptyRunError(RelabcError, ValueError):
    pass


class QuadratureError(RelabcError, RuntimeError):
    pass


class FixtureMissingError(RelabcError, FileNotFoundError):
    pass


class ConfigError(RelabcError, ValueError):
    pass


class MalformedCSVError(RelabcError, ValueError):
    pass
