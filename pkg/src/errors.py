class PolaritonLabError(Exception):
    """Base class of the errors raised by polariton-lab."""


class ConfigError(PolaritonLabError, ValueError):
    """Invalid run configuration; the message names the key and the line."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        location = f"line {line}: " if line is not None else ""
        super().__init__(f"{location}{message}")


class ConsistencyError(PolaritonLabError, RuntimeError):
    """Two independent evaluations of the same quantity disagree."""


class DegenerateSteadyStateError(PolaritonLabError, RuntimeError):
    """The Liouvillian null space is not one-dimensional."""


class ResourceLimitError(PolaritonLabError, MemoryError):
    """A requested matrix exceeds the configured size cap."""
