"""Exception types raised across the package."""


class InvalidArgument(ValueError):
    pass


class CalibrationFailed(RuntimeError):
    """The line-length scan saw no clicks above the dark floor."""


class SyncNotFound(RuntimeError):
    """Visibility is flat over the scanned edge delays."""


class UndefinedQber(ZeroDivisionError):
    """Arrival probability is zero, so QBER has no value."""
