"""Exception types shared across the pipeline."""


class LexjudgeError(Exception):
    """Base class for all package errors."""


class ConfigError(LexjudgeError):
    """Invalid or missing configuration (CLI exit code 2)."""


class DataError(LexjudgeError):
    """Malformed or unusable input data (CLI exit code 3)."""


class DivergenceError(LexjudgeError):
    """Training produced a non-finite loss or gradient (CLI exit code 4)."""


class NotFittedError(LexjudgeError):
    """An estimator was used before ``fit`` completed."""
