class LanewatchError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(LanewatchError):
    """Invalid configuration: bad parameters, lane geometry or missing files."""


class InputError(LanewatchError):
    """Malformed or unusable input data (detections, frames)."""


class EvaluationError(LanewatchError):
    """Reports and ground truth cannot be compared."""
