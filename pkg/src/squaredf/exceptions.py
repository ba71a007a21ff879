"""Exception types raised by squaredf."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class PoleEvaluationError(ArithmeticError):
    """A transfer function was evaluated at (or numerically on) a pole."""


class NoUniqueSteadyStateError(ArithmeticError):
    """The periodic steady state is not unique (marginal or unstable system)."""


class SimulationFault(RuntimeError):
    """The time-domain simulation could not proceed (e.g. history underrun)."""


class DivergenceFault(SimulationFault):
    """The simulated state became non-finite."""


class InsufficientDataError(ValueError):
    """A time series is too short for the requested analysis."""


class InvalidBracketError(ValueError):
    """An onset bracket does not straddle the transition."""


class NoConvergenceError(RuntimeError):
    """An iterative search stopped without meeting its tolerance.

    Attributes
    ----------
    trace : list of tuple
        The iterates visited before giving up.
    """

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)
