"""
Exception hierarchy for the closure toolkit

All errors derive from ClosureError so callers can separate toolkit
failures from built-in exceptions. The CLI maps each class to an exit code
through ``exit_code``.
"""

from typing import List, Optional, Tuple


class ClosureError(Exception):
    """Base class for every error raised by closure_modules"""
    exit_code = 2


class DimensionError(ClosureError):
    """Raised when matrix or vector shapes do not fit together"""
    exit_code = 1


class ConvergenceError(ClosureError):
    """Raised when an iteration does not converge.

    The ``block`` attribute names the trailing block (row range) that was
    still active when the iteration budget ran out.
    """

    def __init__(self, message: str, block: Optional[Tuple[int, int]] = None):
        super().__init__(message)
        self.block = block


class StructureError(ClosureError):
    """Raised when a matrix violates the unreduced lower Hessenberg structure"""

    def __init__(self, message: str, entry: Optional[Tuple[int, int]] = None):
        super().__init__(message)
        self.entry = entry


class RangeError(ClosureError):
    """Raised when a polynomial degree is outside the supported range"""


class DegenerateInputError(ClosureError):
    """Raised for degenerate inputs (zero leading coefficient, zero norm, zero speed)"""


class UnsupportedOrderError(ClosureError):
    """Raised for closures of order N = 0"""
    exit_code = 1


class UsageError(ClosureError):
    """Raised for invalid usage: empty batches, unknown names, bad config keys"""
    exit_code = 1


class ModelFormatError(ClosureError):
    """Raised when a model file cannot be parsed; ``location`` points at the problem"""
    exit_code = 1

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{message} (at {location})" if location else message)
        self.location = location


class FormatVersionError(ClosureError):
    """Raised for unknown head tags or file format versions"""
    exit_code = 1


class IntegrityError(ClosureError):
    """Raised when dataset files disagree with their manifest"""


class QuadratureExactnessError(ClosureError):
    """Raised when a moment order exceeds what the quadrature integrates exactly"""
    exit_code = 1


class NumericError(ClosureError):
    """Raised for non-finite closure output or negative intensities"""


class BlowUpError(ClosureError):
    """Raised when a time integration produces a non-finite state.

    Attributes:
        time: simulation time of the failed step
        location: grid index of the first non-finite value
        history: list of (t, L-infinity of m_0 or f) pairs up to the failure
        partial: whatever the solver had produced before failing (may be None)
    """
    exit_code = 3

    def __init__(self, message: str, time: float, location: int = -1,
                 history: Optional[List[Tuple[float, float]]] = None, partial=None):
        super().__init__(message)
        self.time = time
        self.location = location
        self.history = history or []
        self.partial = partial
