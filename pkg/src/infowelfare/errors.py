"""Exception hierarchy shared by the library and the CLI."""


class ModelError(ValueError):
    """Base class for invalid model inputs."""


class InfeasibleParameters(ModelError):
    """gamma*(1 + v0*T) - v0*T is not strictly positive."""


class LogGammaUnsupported(ModelError):
    """A power-utility formula was requested at gamma == 1."""


class NonpositiveWealth(ModelError):
    pass


class TimeOutOfRange(ModelError):
    pass


class ZeroHorizon(ModelError):
    """Annual costs divide by the horizon and are undefined at T == 0."""


class UnsupportedLimit(ModelError):
    pass


class ConsistencyError(RuntimeError):
    """A computed quantity violates a property guaranteed by the theory."""
