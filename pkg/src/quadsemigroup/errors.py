"""Exception hierarchy shared by all modules."""


class QuadError(Exception):
    """Base class for every error raised by this package."""


class InputError(QuadError, ValueError):
    """Rejected input: non-finite entries, bad file content, bad flags."""


class ShapeError(QuadError, ValueError):
    """Array dimensions do not match the phase-space dimension."""


class ConsistencyError(QuadError, RuntimeError):
    """Two independent computational routes disagree beyond tolerance."""


class DegenerateDirectionError(QuadError, ValueError):
    """A zero direction was supplied where a nonzero one is required."""


class NotApplicableError(QuadError, ValueError):
    """The requested quantity is not defined for this input."""


class ResourceError(QuadError, MemoryError):
    """The requested discretization exceeds the configured size cap."""
