"""Exception types shared across the package."""


class DepthMotionError(Exception):
    """Base class; ``category`` is reported by the CLI on failure."""

    category = "error"


class ConfigError(DepthMotionError, ValueError):
    category = "config"


class ContractViolation(DepthMotionError, ValueError):
    category = "contract"


class OrderingError(DepthMotionError, ValueError):
    category = "ordering"


class PartialCoverageError(DepthMotionError):
    category = "coverage"


class NotReadyError(DepthMotionError):
    category = "not-ready"
