"""Exception hierarchy. Each category carries the CLI exit code it maps to."""


class ManError(Exception):
    """Base class for kit errors."""

    exit_code = 1


class ConfigError(ManError, ValueError):
    """Invalid model, training or run configuration."""

    exit_code = 1


class ShapeError(ManError, ValueError):
    """Tensor shapes or parameters are inconsistent with an operation."""

    exit_code = 1


class TapeError(ManError, RuntimeError):
    """Misuse of the autodiff tape."""

    exit_code = 1


class DataError(ManError):
    """Unreadable, missing or inconsistent image data."""

    exit_code = 2


class WeightFormatError(DataError):
    """Malformed or incompatible weight/checkpoint file."""


class NumericError(ManError, ArithmeticError):
    """Non-finite values, diverged training or failed gradient checks."""

    exit_code = 3
