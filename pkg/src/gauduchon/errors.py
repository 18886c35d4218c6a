"""Exception types shared across the package."""


class GauduchonError(Exception):
    """Base class for all errors raised by this package."""


class ArgumentError(GauduchonError, ValueError):
    """Invalid argument: bad index, incompatible shapes, wrong bidegree, ..."""


class SingularVolumeError(GauduchonError, ArithmeticError):
    """A volume form vanishes (or nearly vanishes) at some grid point."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NonConvergenceError(GauduchonError, RuntimeError):
    """An iterative procedure failed; ``history`` holds what was tried."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class IntegrabilityError(GauduchonError):
    """Structure equations of a coframe algebra are inconsistent."""

    def __init__(self, message, generator=None):
        super().__init__(message)
        self.generator = generator


class NotInvariantError(GauduchonError):
    """A ratio expected to be constant over a coframe algebra is not."""


class ParseError(GauduchonError, ValueError):
    """Syntax error in an expression or coframe definition."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)
        self.position = position


class EvaluationError(GauduchonError, ArithmeticError):
    """An expression could not be evaluated at some grid point."""
