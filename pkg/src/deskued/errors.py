"""Exception types raised across the package."""


class DeskUEDError(Exception):
    pass


class InvalidLevel(DeskUEDError, ValueError):
    pass


class EpisodeDone(DeskUEDError, RuntimeError):
    pass


class GenerationFailed(DeskUEDError, RuntimeError):
    pass


class InvalidEdit(DeskUEDError, ValueError):
    pass


class DimensionMismatch(DeskUEDError, ValueError):
    pass


class NonFiniteLoss(DeskUEDError, FloatingPointError):
    pass


class MissingDistributions(DeskUEDError, ValueError):
    pass


class MissingMaxReturn(DeskUEDError, ValueError):
    pass


class EmptyBuffer(DeskUEDError, LookupError):
    pass


class DoubleCount(DeskUEDError, ValueError):
    pass


class StateSyncFailure(DeskUEDError, RuntimeError):
    pass


class NoEquilibriumFound(DeskUEDError, RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class BoundViolated(DeskUEDError, AssertionError):
    def __init__(self, message, player=None, margin=None):
        super().__init__(message)
        self.player = player
        self.margin = margin


class InvalidEpsilon(DeskUEDError, ValueError):
    pass


class EmptySequence(DeskUEDError, ValueError):
    pass


class ConfigInvalid(DeskUEDError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class IoError(DeskUEDError, OSError):
    """A run directory, checkpoint or config file could not be read or written."""

    def __init__(self, message, path=None):
        super().__init__(message if path is None else f"{message}: {path}")
        self.path = None if path is None else str(path)
