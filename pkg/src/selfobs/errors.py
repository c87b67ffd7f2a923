"""Exception hierarchy shared by all modules."""


class SelfObsError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(SelfObsError, ValueError):
    pass


class DimensionMismatchError(SelfObsError, ValueError):
    pass


class NotHermitianError(SelfObsError, ValueError):
    pass


class EigenConvergenceError(SelfObsError, RuntimeError):
    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class ZeroNormError(SelfObsError, ValueError):
    pass


class ImpossibleOutcomeError(SelfObsError, ValueError):
    pass


class DivergenceError(SelfObsError, RuntimeError):
    """Raised when a propagated state blows up; ``step`` is the offending step index."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class SingularReconstructionError(SelfObsError, ValueError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConfigError(SelfObsError, ValueError):
    """Invalid run configuration. ``key`` names the offending entry when known."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
