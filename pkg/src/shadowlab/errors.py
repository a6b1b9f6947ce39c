"""Exception hierarchy shared by every module."""


class ShadowLabError(Exception):
    pass


class InvalidInput(ShadowLabError, ValueError):
    pass


class ConfigError(InvalidInput):
    """Bad experiment configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ResourceLimit(ShadowLabError, RuntimeError):
    pass


class UnsupportedOperation(ShadowLabError, NotImplementedError):
    pass


class CertificationError(ShadowLabError):
    """A stored certificate failed re-verification.

    ``witness`` carries the offending ``(k, point)``.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ConvergenceError(ShadowLabError, ArithmeticError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class OrbitExit(ShadowLabError):
    """A point left a chart that the map does not preserve."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
