"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array dimensions do not match what an operation requires."""


class ConfigError(ValueError):
    """A configuration value is outside its legal range."""


class DataError(ValueError):
    """A dataset cannot support the requested operation."""


class FormatError(ValueError):
    """A binary file does not conform to its format; carries the byte offset."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UsageError(RuntimeError):
    """An API was called out of order, e.g. backward before forward."""
