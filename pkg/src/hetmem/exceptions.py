"""Exception types raised across hetmem."""


class HetMemError(Exception):
    """Base class for all hetmem errors."""


class ConfigError(HetMemError, ValueError):
    """A pool or workload document violates its schema or an invariant."""


class ParseError(ConfigError):
    """Malformed access or bound expression.

    ``position`` is the 0-based character offset of the offending token.
    """

    def __init__(self, message, text="", position=None):
        self.text = text
        self.position = position
        if position is not None:
            message = f"{message} at position {position} in {text!r}"
        super().__init__(message)


class UnknownVariableError(ParseError):
    pass


class NonAffineError(ParseError):
    pass


class BindingError(ConfigError):
    """A loop bound or dimension references an unbound parameter, or a
    loop has a negative trip count."""


class SolverDefect(HetMemError, RuntimeError):
    """The allocator produced something it never should (e.g. infeasible)."""


class InstanceTooLarge(HetMemError, ValueError):
    pass


class SimulationError(HetMemError, RuntimeError):
    """Trace generation or hierarchy simulation failed."""


class RoutingError(SimulationError):
    """An address maps to no memory module."""
