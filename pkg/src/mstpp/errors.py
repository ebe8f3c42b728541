"""Exception types shared across the package."""


class MstppError(Exception):
    """Base class for all package-specific errors."""


class GridFormatError(MstppError):
    """A raster file violates the ASCII grid format; message names the line."""


class TrackFormatError(MstppError):
    """A telemetry CSV violates the track format; message names the row."""


class OutOfDomainError(MstppError):
    """A position falls outside the raster extent."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class NoDataError(MstppError):
    """A position falls on a nodata cell in at least one layer."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class DegenerateLayerError(MstppError):
    """A raster layer cannot be standardized (constant or too few cells)."""


class NonPositiveSelectionError(MstppError):
    """A linear-family selection value w'theta was not strictly positive."""

    def __init__(self, message, step=None, slot=None):
        super().__init__(message)
        self.step = step
        self.slot = slot


class EnumerationTooLargeError(MstppError):
    """The brute-force one-hot enumeration guard (J <= 20) was exceeded."""


class RejectionExhaustedError(MstppError):
    """A rejection sampler exceeded its proposal budget."""


class NonFiniteTrajectoryError(MstppError):
    """A leapfrog trajectory produced a non-finite position, velocity, or energy."""


class InitializationError(MstppError):
    """The sampler could not start (non-finite posterior at theta_init)."""


class NoValidCellsError(MstppError):
    """No non-nodata cells were found in the requested neighborhood."""


class ConfigError(MstppError):
    """A run configuration is invalid or incomplete."""
