"""Exception types shared across the package."""


class BlockPermError(Exception):
    """Base class for all package-specific errors."""


class SwapOrientationError(BlockPermError, ValueError):
    """A cross-swap (i, j) was requested where i is not A-labeled or j not B-labeled."""


class DisjointnessError(BlockPermError, ValueError):
    """A swap set touches the same index twice."""


class DegenerateGroupError(BlockPermError, ValueError):
    """A group is too small for the requested statistic (unbiased MMD needs >= 2 per group)."""


class RepresentativeSetTooSmallError(BlockPermError, ValueError):
    """floor(rho * N) < 2, leaving no room for even a single cross-swap."""


class EmptySwapSetError(BlockPermError, RuntimeError):
    """The admissible swap set is empty for the given design and labeling."""


class DesignError(BlockPermError, RuntimeError):
    """No usable block design could be constructed (e.g. empty swap set after retries)."""


class DegenerateDiagnosticsError(BlockPermError, ValueError):
    """Diagnostics are undefined, e.g. variance ratio r <= 0."""
