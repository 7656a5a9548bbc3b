"""Exception types raised across the package."""


class FjrecError(Exception):
    """Base class for all package errors."""


class SingularMatrix(FjrecError):
    pass


class NotConverged(FjrecError):
    pass


class DimensionMismatch(FjrecError, ValueError):
    pass


class NotLambdaConnected(FjrecError):
    """The network (or reduced plant) has no unique stable equilibrium."""


class InvalidIndex(FjrecError, IndexError):
    pass


class InputOutOfRange(FjrecError, ValueError):
    pass


class QpFailure(FjrecError):
    """A QP solve ended without an optimal point."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class TerminalInfeasible(QpFailure):
    """The terminal equality of the MPC problem cannot be met from the current state."""


class GenerationFailed(FjrecError):
    pass
