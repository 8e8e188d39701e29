"""Exception hierarchy shared by all modules."""


class NCGKError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(NCGKError, ValueError):
    """Array dimensions do not agree."""


class DomainError(NCGKError, ValueError):
    """An input lies outside the domain an operation accepts."""


class IngestError(NCGKError, ValueError):
    """A file or serialized object could not be parsed."""


class ResourceError(NCGKError, RuntimeError):
    """An enumeration or work budget would be exceeded."""


class ConvergenceError(NCGKError, RuntimeError):
    """The conic solver stopped before reaching the requested accuracy.

    Attributes
    ----------
    lower : float
        Best primal objective seen.
    upper : float
        Best certified dual objective seen.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message, lower=float("nan"), upper=float("nan"), iterations=0):
        super().__init__(message)
        self.lower = lower
        self.upper = upper
        self.iterations = iterations
