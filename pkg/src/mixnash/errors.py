"""Exception hierarchy shared by all modules."""


class MixNashError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(MixNashError, ValueError):
    pass


class InvalidGraph(MixNashError, ValueError):
    pass


class DisconnectedGraph(InvalidGraph):
    pass


class NotPositiveDefinite(MixNashError, ValueError):
    pass


class SingularSystem(MixNashError, ValueError):
    pass


class NotStronglyMonotone(MixNashError, ValueError):
    pass


class CapViolated(MixNashError, ValueError):
    pass


class WrongOrder(MixNashError, ValueError):
    pass


class NoKnownEquilibrium(MixNashError):
    pass


class NonFiniteDerivative(MixNashError, FloatingPointError):
    def __init__(self, index, value):
        self.index = int(index)
        self.value = value
        super().__init__(f"non-finite derivative component {self.index}: {value!r}")


class NonFiniteState(MixNashError, FloatingPointError):
    def __init__(self, t, max_abs, index=None):
        self.t = float(t)
        self.max_abs = max_abs
        self.index = index
        super().__init__(
            f"state blew up at t={self.t:.6g} (max |component| = {max_abs!r}, index {index})"
        )


class ConfigError(MixNashError, ValueError):
    """Bad scenario configuration. ``field`` is a dotted path into the config."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
