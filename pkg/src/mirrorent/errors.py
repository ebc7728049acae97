"""Exception types raised across the package."""


class MirrorEntError(Exception):
    """Base class for package errors."""


class InvalidParams(MirrorEntError, ValueError):
    pass


class Unstable(MirrorEntError):
    """The linearized dynamics has no stationary state."""


class SingularSystem(MirrorEntError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class UnequalMirrors(MirrorEntError, ValueError):
    pass


class WrongBasis(MirrorEntError, ValueError):
    pass


class NonPhysicalCM(MirrorEntError, ValueError):
    pass


class NoRealRoot(MirrorEntError):
    pass


class PSDRepairExceeded(MirrorEntError):
    pass


class ConfigError(MirrorEntError, ValueError):
    pass
