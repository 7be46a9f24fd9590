"""Exception hierarchy shared across the toolkit."""


class LipcertError(Exception):
    """Base class for all toolkit errors."""


class UsageError(LipcertError):
    """Caller violated a precondition (bad shapes, indices, parameters)."""


class ParseError(LipcertError):
    """A file did not match its expected format."""


class IntegrityError(LipcertError):
    """Input data violates a structural assumption (e.g. duplicate point
    carrying two different labels)."""


class CapacityError(LipcertError):
    """Requested an exact computation beyond the configured size limit."""


class NumericError(LipcertError):
    """An iterative numeric routine failed to converge.

    Carries the best estimate reached so far in ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class TrainingError(LipcertError):
    """Optimization diverged. ``last_stable_epoch`` is the final epoch with a
    finite loss; ``history`` holds the records up to that point."""

    def __init__(self, message, last_stable_epoch=None, history=None):
        super().__init__(message)
        self.last_stable_epoch = last_stable_epoch
        self.history = history or []
