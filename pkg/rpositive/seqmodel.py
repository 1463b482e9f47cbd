"""Sequence and matrix data model for the rpositive library.

A sequence is a finite prefix followed by a tail descriptor: either a constant
repeated forever or nothing at all (the sequence then ends with its prefix).
Nearest-neighbor matrices keep their off-diagonal entries as log-values so
that edge rewards of any size can be stored without overflow.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Tuple, Union

import numpy as np

from .exceptions import NonPositiveEntry, OutOfDomain, ShiftBeyondDomain

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConstantTail:
    """Tail repeating ``value`` at every index past the prefix."""
    value: float

    def __post_init__(self):
        object.__setattr__(self, 'value', float(self.value))
        if not math.isfinite(self.value):
            raise ValueError(f"Tail value must be finite, got {self.value!r}")


@dataclass(frozen=True)
class NoTail:
    """Marks a sequence that is only defined on its prefix."""


Tail = Union[ConstantTail, NoTail]
TailLike = Union[ConstantTail, NoTail, float, int, None]


def as_tail(tail: TailLike) -> Tail:
    """Normalize a tail descriptor (a Tail, a bare number, or None)."""
    if isinstance(tail, (ConstantTail, NoTail)):
        return tail
    if tail is None:
        return NoTail()
    if isinstance(tail, bool):
        raise ValueError(f"Invalid tail descriptor: {tail!r}")
    if isinstance(tail, (int, float)):
        return ConstantTail(float(tail))
    raise ValueError(f"Invalid tail descriptor: {tail!r}")


@dataclass(frozen=True)
class RealSequence:
    """Real sequence given as prefix + tail; entries may have any sign."""
    prefix: Tuple[float, ...]
    tail: Tail

    def __post_init__(self):
        values = tuple(float(v) for v in self.prefix)
        for index, value in enumerate(values):
            if not math.isfinite(value):
                raise ValueError(f"Entry {index} is not finite: {value!r}")
        object.__setattr__(self, 'prefix', values)
        object.__setattr__(self, 'tail', as_tail(self.tail))

    @property
    def prefix_length(self) -> int:
        return len(self.prefix)

    @property
    def has_constant_tail(self) -> bool:
        return isinstance(self.tail, ConstantTail)

    @property
    def domain_length(self) -> Optional[int]:
        """Number of defined entries, or None when the domain is all of Z+."""
        return None if self.has_constant_tail else len(self.prefix)

    def covers(self, n: int) -> bool:
        """True when entries 0..n-1 are all defined."""
        return self.has_constant_tail or n <= len(self.prefix)

    def value_at(self, x: int) -> float:
        """Entry at index x."""
        if x < 0:
            raise OutOfDomain(x, len(self.prefix))
        if x < len(self.prefix):
            return self.prefix[x]
        if isinstance(self.tail, ConstantTail):
            return self.tail.value
        raise OutOfDomain(x, len(self.prefix))

    def values(self, n: int) -> np.ndarray:
        """First n entries as a float array."""
        if n < 0:
            raise ValueError(f"n must be non-negative, got {n}")
        if n > len(self.prefix):
            if not isinstance(self.tail, ConstantTail):
                raise OutOfDomain(n - 1, len(self.prefix))
            head = np.asarray(self.prefix, dtype=float)
            return np.concatenate([head, np.full(n - len(self.prefix), self.tail.value)])
        return np.asarray(self.prefix[:n], dtype=float)

    def shift(self, m: int):
        """Sequence x -> self[x + m], of the same class."""
        if m < 0:
            raise ValueError(f"Shift must be non-negative, got {m}")
        if not self.has_constant_tail and m >= len(self.prefix):
            raise ShiftBeyondDomain(m, len(self.prefix))
        return type(self)(self.prefix[m:], self.tail)

    def map(self, func: Callable[[float], float]) -> "RealSequence":
        """Apply func entrywise, tail included."""
        tail = ConstantTail(func(self.tail.value)) if self.has_constant_tail else NoTail()
        return RealSequence(tuple(func(v) for v in self.prefix), tail)


@dataclass(frozen=True)
class PositiveSequence(RealSequence):
    """Strictly positive sequence; the object scanned for allowed-ness."""

    def __post_init__(self):
        super().__post_init__()
        for index, value in enumerate(self.prefix):
            if not value > 0:
                raise NonPositiveEntry(index, value)
        if isinstance(self.tail, ConstantTail) and not self.tail.value > 0:
            raise NonPositiveEntry(len(self.prefix), self.tail.value)


def make_sequence(prefix: Iterable[float], tail: TailLike = None) -> PositiveSequence:
    """Build a positive sequence from a prefix and a tail descriptor.

    Args:
        prefix: Values a_0..a_{P-1}
        tail: ConstantTail, NoTail, a bare positive number, or None for no tail

    Returns:
        PositiveSequence with value_at total on its domain

    Raises:
        NonPositiveEntry: If any value is <= 0; a bad tail reports index P

    Example:
        >>> make_sequence([2], ConstantTail(0.25)).value_at(3)
        0.25
    """
    return PositiveSequence(tuple(prefix), as_tail(tail))


def make_real_sequence(prefix: Iterable[float], tail: TailLike = None) -> RealSequence:
    """Build a sign-unrestricted sequence (rewards, log-entries)."""
    return RealSequence(tuple(prefix), as_tail(tail))


def shift(seq: RealSequence, m: int) -> RealSequence:
    """Shifted sequence a^[m]: value_at(x) = seq.value_at(x + m)."""
    return seq.shift(m)


def _combine(first: RealSequence, second: RealSequence,
             op: Callable[[float, float], float]) -> Tuple[Tuple[float, ...], Tail]:
    """Entrywise combination of two sequences on their common domain."""
    if first.has_constant_tail and second.has_constant_tail:
        n = max(first.prefix_length, second.prefix_length)
        tail: Tail = ConstantTail(op(first.tail.value, second.tail.value))
    else:
        n = min(d for d in (first.domain_length, second.domain_length) if d is not None)
        tail = NoTail()
    prefix = tuple(op(u, v) for u, v in zip(first.values(n), second.values(n)))
    return prefix, tail


@dataclass(frozen=True)
class NearestNeighborMatrix:
    """Matrix on Z+ with positive entries exactly on the two off-diagonals.

    ``log_up[x]`` is log q_{x,x+1} and ``log_down[x]`` is log q_{x+1,x}.
    ``split`` records how the entries were obtained: "edge" for edge
    rewards, "symmetric" for the sqrt(a) split of a product sequence.
    """
    log_up: RealSequence
    log_down: RealSequence
    split: str = "explicit"

    @property
    def up(self) -> PositiveSequence:
        seq = self.log_up.map(math.exp)
        return PositiveSequence(seq.prefix, seq.tail)

    @property
    def down(self) -> PositiveSequence:
        seq = self.log_down.map(math.exp)
        return PositiveSequence(seq.prefix, seq.tail)

    @property
    def has_constant_tail(self) -> bool:
        return self.log_up.has_constant_tail and self.log_down.has_constant_tail

    def log_product_sequence(self) -> RealSequence:
        """log a_x = log q_{x,x+1} + log q_{x+1,x}."""
        prefix, tail = _combine(self.log_up, self.log_down, lambda u, v: u + v)
        return RealSequence(prefix, tail)

    def product_sequence(self) -> PositiveSequence:
        """a_x = q_{x,x+1} q_{x+1,x}; constant tail iff both factors have one."""
        prefix, tail = _combine(self.log_up, self.log_down, lambda u, v: math.exp(u + v))
        return PositiveSequence(prefix, tail)

    def log_q(self, x: int, y: int) -> float:
        """log q_{x,y}; -inf off the two off-diagonals."""
        if y == x + 1:
            return self.log_up.value_at(x)
        if x == y + 1:
            return self.log_down.value_at(y)
        return -math.inf

    def q(self, x: int, y: int) -> float:
        return math.exp(self.log_q(x, y))

    def shift(self, m: int) -> "NearestNeighborMatrix":
        """Q^[m], the restriction to states >= m, re-based at 0."""
        return NearestNeighborMatrix(self.log_up.shift(m), self.log_down.shift(m), self.split)


def matrix_from_edge_rewards(b: RealSequence, c: RealSequence) -> NearestNeighborMatrix:
    """Transfer matrix of the edge-reward Hamiltonian: q_{x,x+1}=e^{b_x}, q_{x+1,x}=e^{c_x}."""
    return NearestNeighborMatrix(log_up=b, log_down=c, split="edge")


def matrix_from_product(a: PositiveSequence) -> NearestNeighborMatrix:
    """Symmetric split q_{x,x+1} = q_{x+1,x} = sqrt(a_x)."""
    half_log = a.map(lambda v: 0.5 * math.log(v))
    return NearestNeighborMatrix(log_up=half_log, log_down=half_log, split="symmetric")


def alpha_from_bc(b: RealSequence, c: RealSequence, alpha0: float, horizon: int) -> RealSequence:
    """Site rewards alpha with alpha_x + alpha_{x+1} = b_x + c_x up to ``horizon``.

    Returns a prefix-only sequence alpha_0..alpha_horizon.

    Example:
        >>> alpha_from_bc(make_real_sequence([], 1.0), make_real_sequence([], 0.0), 0.0, 3).prefix
        (0.0, 1.0, 0.0, 1.0)
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    sums = b.values(horizon) + c.values(horizon)
    alpha = [float(alpha0)]
    for total in sums:
        alpha.append(float(total) - alpha[-1])
    return RealSequence(tuple(alpha), NoTail())


@dataclass(frozen=True)
class SiteRewards:
    """Hamiltonian awarding alpha_x per visit to height x."""
    alpha: RealSequence


@dataclass(frozen=True)
class EdgeRewards:
    """Hamiltonian awarding b_x per step x->x+1 and c_x per step x+1->x."""
    b: RealSequence
    c: RealSequence


HamiltonianSpec = Union[SiteRewards, EdgeRewards]


def edge_rewards_from_matrix(mat: NearestNeighborMatrix) -> EdgeRewards:
    """Edge rewards whose transfer matrix is ``mat``."""
    return EdgeRewards(b=mat.log_up, c=mat.log_down)


def edge_rewards_from_sites(alpha: RealSequence) -> EdgeRewards:
    """Edge form of a site Hamiltonian: b_x = alpha_{x+1}, c_x = alpha_x.

    Each step between x and x+1 then carries alpha_x + alpha_{x+1} in total.
    """
    return EdgeRewards(b=alpha.shift(1), c=alpha)
