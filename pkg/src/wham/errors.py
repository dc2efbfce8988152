"""Exception types raised across the package."""


class WhamError(Exception):
    """Base class for all package errors."""


class DimensionError(WhamError, ValueError):
    """Code lengths or weight lengths disagree."""


class ValidationError(WhamError, ValueError):
    """An input value is malformed (non-finite weight, out-of-range code)."""


class CapacityError(WhamError, ValueError):
    """A layout was asked to hold more than it supports."""


class ConfigurationError(WhamError, ValueError):
    """Inconsistent index or benchmark configuration."""


class ParseError(WhamError, ValueError):
    """A binary file could not be parsed.

    ``offset`` is the byte position of the offending record or field.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
