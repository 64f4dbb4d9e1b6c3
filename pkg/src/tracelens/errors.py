"""Exception hierarchy.

Each class carries the process exit code the CLI reports for it, so callers
can tell parse problems from configuration mistakes and from data shortages.
"""


class TraceLensError(Exception):
    exit_code = 1


class SpanParseError(TraceLensError):
    exit_code = 3

    def __init__(self, path, line, reason):
        self.path = str(path)
        self.line = line
        self.reason = reason
        super().__init__(f"{self.path}:{line}: {reason}")


class ConfigError(TraceLensError):
    exit_code = 4


class OrderEstimationError(ConfigError):
    """No client-layer events to derive the model order from."""


class FaultSpecError(ConfigError):
    pass


class DataError(TraceLensError):
    exit_code = 5


class EmptyTraceError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class UndefinedSimilarityError(DataError):
    """nLCS requested for an empty sequence."""


class EncodingError(DataError):
    """Symbol id outside the model alphabet."""
