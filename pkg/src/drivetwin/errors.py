"""Exception hierarchy shared by all drivetwin modules."""

from __future__ import annotations


class DriveTwinError(Exception):
    """Base class for every error raised by this package."""


class SchemaError(DriveTwinError):
    """A required column or field is missing."""


class ParseError(DriveTwinError):
    """A value could not be parsed."""


class OrderingError(DriveTwinError):
    """Timestamps are not strictly increasing."""


class StateError(DriveTwinError):
    """An object was used before it was fitted."""


class ConfigError(DriveTwinError):
    """Invalid configuration value or unknown key."""

    def __init__(self, message: str, section: str | None = None, key: str | None = None):
        super().__init__(message)
        self.section = section
        self.key = key


class ShapeError(DriveTwinError, ValueError):
    """Array dimensions do not match what a model expects."""


class ModelFormatError(DriveTwinError):
    """A model file is malformed, tampered with or of an unsupported version."""


class ThresholdError(DriveTwinError):
    """A monitoring threshold cannot be calibrated."""


class ArtifactError(DriveTwinError):
    """An upstream file or directory a command depends on does not exist."""

    def __init__(self, message: str, path: str | None = None):
        super().__init__(message)
        self.path = path
