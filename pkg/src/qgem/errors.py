"""Exception hierarchy shared by all qgem modules."""


class QgemError(Exception):
    """Base class for every error raised by qgem."""


class UnitError(QgemError, ValueError):
    """Malformed quantity text or a unit outside the whitelist."""


class DimensionError(QgemError, ValueError):
    """Operation between quantities with incompatible dimensions."""


class ConfigError(QgemError, ValueError):
    """Invalid experiment configuration or parameter path."""


class InfeasibleError(QgemError):
    """The requested physical quantity does not exist for these inputs."""
