"""Custom exceptions for the rpositive library.

Errors fall into three families that the command line maps onto exit codes:
input validation (3), undetermined verdicts (2) and numeric failures (4).
"""


class RPositiveError(Exception):
    """Base exception for all rpositive library errors."""
    exit_code = 4


class ValidationError(RPositiveError):
    """Raised when an input violates a documented precondition."""
    exit_code = 3


class NumericError(RPositiveError):
    """Raised when a computation cannot be completed in floating point."""
    exit_code = 4


class UndeterminedError(RPositiveError):
    """Raised when finite data cannot settle a verdict."""
    exit_code = 2


class NonPositiveEntry(ValidationError):
    """Raised when a sequence entry that must be positive is not.

    Attributes:
        index: Position of the offending entry
        value: The offending value
    """
    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"Entry {index} must be strictly positive, got {value!r}")


class ShiftBeyondDomain(ValidationError):
    """Raised when a prefix-only sequence is shifted past its last entry."""
    def __init__(self, shift: int, length: int):
        self.shift = shift
        self.length = length
        super().__init__(f"Cannot shift by {shift}: sequence is defined on {length} entries only")


class OutOfDomain(ValidationError):
    """Raised when a prefix-only sequence is queried past its last entry."""
    def __init__(self, index: int, length: int):
        self.index = index
        self.length = length
        super().__init__(f"Index {index} is outside the domain [0, {length})")


class DepthExceeded(ValidationError):
    """Raised when an index lies beyond the computed depth of a chain."""
    def __init__(self, index: int, depth: int):
        self.index = index
        self.depth = depth
        super().__init__(f"Index {index} exceeds computed depth {depth}")


class ModelValidationError(ValidationError):
    """Raised when a model file or run configuration fails validation.

    Attributes:
        source: File name or configuration key that failed validation
        message: Detailed error message
    """
    def __init__(self, source: str, message: str):
        self.source = source
        self.message = message
        super().__init__(f"Model validation error in {source}: {message}")


class IndexOutOfWindow(ValidationError):
    """Raised when a block does not sit strictly inside a window."""
    def __init__(self, k: int, l: int, i: int, j: int):
        self.block = (k, l)
        self.window = (i, j)
        super().__init__(f"Block [{k}, {l}] is not strictly inside window [{i}, {j}]")


class WindowTooLarge(ValidationError):
    """Raised when exhaustive enumeration is requested on a wide window."""
    def __init__(self, width: int, limit: int):
        self.width = width
        self.limit = limit
        super().__init__(f"Window width {width} exceeds the enumeration limit {limit}")


class EmptyEnsemble(ValidationError):
    """Raised when no admissible path joins the boundary heights."""
    def __init__(self, message: str = ""):
        self.message = message
        if message:
            super().__init__(f"Empty path ensemble: {message}")
        else:
            super().__init__("Empty path ensemble")


class RelationViolated(ValidationError):
    """Raised when alpha_x + alpha_{x+1} = b_x + c_x fails at some site."""
    def __init__(self, index: int, residual: float):
        self.index = index
        self.residual = residual
        super().__init__(f"Site/edge relation violated at x={index} (residual {residual:.3e})")


class LengthMismatch(ValidationError):
    """Raised when a requested range exceeds the data available."""
    def __init__(self, requested: int, available: int):
        self.requested = requested
        self.available = available
        super().__init__(f"Requested index {requested} but only {available} entries are available")


class GapRequired(ValidationError):
    """Raised when an operation needs xi but the ladder shows no gap."""
    def __init__(self, s_m: float, s_m1: float):
        self.s_m = s_m
        self.s_m1 = s_m1
        super().__init__(f"No gap between s*={s_m!r} and s*={s_m1!r}; xi is undefined")


class NotInteriorScale(ValidationError):
    """Raised when an extension is requested at a scale that is not below s*."""
    def __init__(self, s: float, s_star: float):
        self.s = s
        self.s_star = s_star
        super().__init__(f"Scale {s!r} is not strictly inside (0, s*={s_star!r})")


class DomainError(NumericError):
    """Raised when phi is evaluated at a non-positive argument."""
    def __init__(self, omega: float):
        self.omega = omega
        super().__init__(f"phi requires omega > 0, got {omega!r}")


class SingularContinuant(NumericError):
    """Raised when a backward continued-fraction step hits a value >= 1."""
    def __init__(self, omega: float, index: int = None):
        self.omega = omega
        self.index = index
        where = f" at x={index}" if index is not None else ""
        super().__init__(f"Singular continuant{where}: value {omega!r} >= 1")


class NonConvergence(NumericError):
    """Raised when an iterative method stalls."""
    def __init__(self, iterations: int, message: str = ""):
        self.iterations = iterations
        self.message = message
        suffix = f": {message}" if message else ""
        super().__init__(f"No convergence after {iterations} iterations{suffix}")


class OmegaCollapse(NumericError):
    """Raised when the chain recursion leaves (0, 1]; r is too large."""
    def __init__(self, index: int, omega: float):
        self.index = index
        self.omega = omega
        super().__init__(f"omega_{index} = {omega!r} is not positive; r exceeds the critical scale")


class NotPositiveRecurrent(NumericError):
    """Raised when stationary weights are not summable."""
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"Chain is not positive recurrent: {reason}")


class NoTailUndetermined(UndeterminedError):
    """Raised when a prefix-only sequence leaves s* undetermined."""
    def __init__(self, depth: int):
        self.depth = depth
        super().__init__(f"Sequence without tail is undetermined at both bracket ends (depth {depth})")


class EmptyLadder(UndeterminedError):
    """Raised when a prefix-only sequence is too short to give any s*^[m]."""
    def __init__(self, prefix_length: int):
        self.prefix_length = prefix_length
        super().__init__(f"Sequence without tail has {prefix_length} entries; no shift has a critical scale")
