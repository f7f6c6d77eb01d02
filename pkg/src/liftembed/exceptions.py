"""Exception hierarchy shared by every liftembed module."""


class LiftEmbedError(Exception):
    """Base class for all package errors."""


class ConfigurationError(LiftEmbedError, ValueError):
    """Invalid network, optimizer, or run configuration."""


class UsageError(LiftEmbedError, ValueError):
    """A call violated an operation's preconditions (shapes, domains, modes)."""


class DegeneratePointError(UsageError):
    """Query at a point where sheet limits are not defined (e.g. a merge instant)."""


class TrainingError(LiftEmbedError, RuntimeError):
    """Training produced a non-finite or diverging quantity.

    ``epoch`` and ``term`` are attached when known so the caller can report
    where the failure happened.
    """

    def __init__(self, message, epoch=None, term=None):
        parts = [message]
        if epoch is not None:
            parts.append(f"epoch={epoch}")
        if term is not None:
            parts.append(f"term={term}")
        super().__init__(" | ".join(parts))
        self.epoch = epoch
        self.term = term


class DivergedInferenceError(TrainingError):
    """An inferred shock curve left the spatial domain."""

    def __init__(self, message, exit_time=None, epoch=None):
        super().__init__(message, epoch=epoch, term="shock_curve")
        self.exit_time = exit_time


class UndefinedMetricError(LiftEmbedError, ArithmeticError):
    """Relative error requested against an identically zero reference."""


class CheckpointError(LiftEmbedError, IOError):
    """Missing, truncated, or corrupt checkpoint file."""
