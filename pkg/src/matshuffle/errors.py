"""Exception hierarchy. The CLI maps each class to a distinct exit code."""


class MatShuffleError(Exception):
    """Base class for all errors raised by matshuffle."""


class LayoutError(MatShuffleError, ValueError):
    """A layout, grid or storage descriptor violates its invariants."""


class ParseError(MatShuffleError, ValueError):
    """An input file could not be read or decoded."""


class ExtentMismatchError(MatShuffleError, ValueError):
    """Two matrices (or layouts) do not have compatible extents."""


class VerificationError(MatShuffleError):
    """A distributed result differs from the dense reference."""

    def __init__(self, message, coord=None):
        super().__init__(message)
        self.coord = coord


class ResourceGuardError(MatShuffleError):
    """A request exceeds a hard resource limit (e.g. brute-force size)."""
