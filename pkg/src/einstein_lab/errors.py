"""Exception types shared across the package."""


class GraphFormatError(ValueError):
    """Malformed graph text file or invalid graph data."""


class MarginError(Exception):
    """A ball required by a computation does not fit inside the host graph."""


class ConvergenceError(Exception):
    """An iterative solver failed to reach its residual tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class UnreachableError(Exception):
    """Source and sink carry no current (disconnected within the host).

    Raised instead of returning a float infinity so callers can tell a
    genuinely unreachable sink apart from numeric overflow.
    """
