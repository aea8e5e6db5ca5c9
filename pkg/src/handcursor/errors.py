"""Exception types shared across the package."""


class HandCursorError(Exception):
    """Base class for errors raised by this package."""


class ModelFormatError(HandCursorError):
    """A model file exists but cannot be parsed as a supported format."""


class UnsupportedOperatorError(ModelFormatError):
    """A model file references an operator the runtime cannot execute."""


class ShapeMismatchError(HandCursorError, ValueError):
    """A tensor does not match the declared spec."""


class ModelContractError(HandCursorError):
    """A model's outputs violate the names/shapes the caller relies on."""


class MissingClassError(HandCursorError, ValueError):
    """A per-class operation received no samples for one of the classes."""

    def __init__(self, class_name):
        self.class_name = class_name
        super().__init__(f"no samples for class {class_name!r}")


class ReferenceFileError(HandCursorError):
    """References file is missing fields, truncated, or not JSON."""


class VersionMismatchError(ReferenceFileError):
    """References file was written by an incompatible schema version."""


class BackendUnavailableError(HandCursorError):
    """No way to inject cursor events on this host (e.g. no display)."""


class SourceUnavailableError(HandCursorError):
    """Camera or replay directory cannot be opened."""


class InsufficientEventsError(HandCursorError, ValueError):
    """Not enough telemetry events to compute a statistic."""
