"""Continued-fraction machinery behind allowed sequences.

phi_a(w) = 1 - a/w drives the forward recursion w_0 = 1, w_{x+1} = 1 - s a_x / w_x.
Its inverse a/(1 - w) composed backward from 0 gives the truncations
h(s; x, y), and their limit h(s; x, inf) is the continued fraction
s a_x / (1 - s a_{x+1} / (1 - ...)).
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from .config import DEFAULT_DEPTH
from .exceptions import DepthExceeded, DomainError, OutOfDomain, SingularContinuant
from .seqmodel import ConstantTail, PositiveSequence

logger = logging.getLogger(__name__)

# Relative distance at which a tail orbit is snapped onto a fixed point.
FIXED_POINT_SNAP = 1e-13

# Modified Lentz guard against zero denominators.
LENTZ_TINY = 1e-30


def phi(a: float, omega: float) -> float:
    """phi_a(omega) = 1 - a/omega, strictly increasing in omega.

    Raises:
        DomainError: If omega <= 0

    Example:
        >>> phi(0.25, 1.0)
        0.75
    """
    if not omega > 0:
        raise DomainError(omega)
    return 1.0 - a / omega


def phi_inv(a: float, omega: float) -> float:
    """Inverse map a/(1 - omega).

    Raises:
        SingularContinuant: If omega >= 1
    """
    if not omega < 1:
        raise SingularContinuant(omega)
    return a / (1.0 - omega)


def tail_fixed_points(c: float) -> Optional[Tuple[float, float]]:
    """Fixed points (w-, w+) of w -> 1 - c/w, or None when c > 1/4.

    w- is the repelling point and equals the smaller root of h^2 - h + c = 0.
    """
    if c > 0.25:
        return None
    disc = math.sqrt(max(0.0, 1.0 - 4.0 * c))
    # 2c/(1+disc) avoids the cancellation in (1-disc)/2
    return 2.0 * c / (1.0 + disc), 0.5 * (1.0 + disc)


@dataclass(frozen=True, eq=False)
class OmegaTrace:
    """Forward orbit w_0..w_D of the recursion at scale s.

    Attributes:
        s: Scaling applied to the sequence
        values: w_0..w_D; a failing value is stored as the last entry
        first_failure: Smallest x with w_x <= 0, if reached
        tail_entered: Index where the constant-tail regime begins
        stationary_from: Index from which the orbit sits on a fixed point
    """
    s: float
    values: np.ndarray
    first_failure: Optional[int] = None
    tail_entered: Optional[int] = None
    stationary_from: Optional[int] = None

    @property
    def depth(self) -> int:
        return len(self.values) - 1

    @property
    def positive(self) -> bool:
        return self.first_failure is None

    def value_at(self, x: int) -> float:
        """w_x, extending a stationary orbit past the computed depth."""
        if x < 0:
            raise OutOfDomain(x, len(self.values))
        if x < len(self.values):
            return float(self.values[x])
        if self.stationary_from is not None:
            return float(self.values[-1])
        raise DepthExceeded(x, self.depth)

    def values_through(self, n: int) -> np.ndarray:
        """w_0..w_{n-1} as an array."""
        if n <= len(self.values):
            return self.values[:n].copy()
        if self.stationary_from is None:
            raise DepthExceeded(n - 1, self.depth)
        pad = np.full(n - len(self.values), self.values[-1])
        return np.concatenate([self.values, pad])


def omega_trace(a: PositiveSequence, s: float, depth: int = DEFAULT_DEPTH) -> OmegaTrace:
    """Run w_0 = 1, w_{x+1} = 1 - s a_x / w_x for x < depth.

    Stops at the first non-positive value, or once a constant-tail orbit
    lands on a fixed point of w -> 1 - c/w (c = s * a_tail). For
    prefix-only sequences the orbit ends at index P.

    Example:
        >>> trace = omega_trace(make_sequence([2], 0.25), 0.5, 10)
        >>> trace.first_failure
        1
    """
    if not s > 0:
        raise ValueError(f"s must be positive, got {s!r}")
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")

    prefix_length = a.prefix_length
    limit = depth if a.has_constant_tail else min(depth, prefix_length)
    values = [1.0]
    omega = 1.0

    for x in range(min(limit, prefix_length)):
        omega = 1.0 - s * a.prefix[x] / omega
        values.append(omega)
        if omega <= 0:
            logger.debug(f"omega_trace: failure at x={x + 1} (s={s!r})")
            return OmegaTrace(s, np.asarray(values), first_failure=x + 1)

    if not isinstance(a.tail, ConstantTail) or limit < prefix_length:
        return OmegaTrace(s, np.asarray(values))

    c = s * a.tail.value
    fixed = tail_fixed_points(c)
    stationary_from = None
    x = prefix_length
    while True:
        if fixed is not None and x > 0:
            for point in fixed:
                if abs(omega - point) <= FIXED_POINT_SNAP * point:
                    omega = point
                    values[-1] = point
                    stationary_from = x
                    break
            if stationary_from is not None:
                break
        if x >= limit:
            break
        nxt = 1.0 - c / omega
        values.append(nxt)
        x += 1
        if nxt <= 0:
            logger.debug(f"omega_trace: tail failure at x={x} (s={s!r})")
            return OmegaTrace(s, np.asarray(values), first_failure=x, tail_entered=prefix_length)
        if nxt == omega:
            stationary_from = x - 1
            values.pop()
            break
        omega = nxt

    return OmegaTrace(s, np.asarray(values), tail_entered=prefix_length,
                      stationary_from=stationary_from)


class VerdictKind(str, Enum):
    """Outcome of an allowed-ness test."""
    ALLOWED = "Allowed"
    NOT_ALLOWED = "NotAllowed"
    UNDETERMINED = "Undetermined"


class Certificate(str, Enum):
    """Why an Allowed verdict holds."""
    CLOSED_FORM_TAIL = "ClosedFormTail"
    DEPTH_EXHAUSTED_POSITIVE = "DepthExhaustedPositive"


@dataclass(frozen=True)
class AllowedVerdict:
    """Allowed / NotAllowed / Undetermined verdict for s*a."""
    kind: VerdictKind
    certificate: Optional[Certificate] = None
    first_failure: Optional[int] = None
    depth: Optional[int] = None

    @property
    def is_allowed(self) -> bool:
        return self.kind is VerdictKind.ALLOWED

    @property
    def is_not_allowed(self) -> bool:
        return self.kind is VerdictKind.NOT_ALLOWED

    @property
    def is_undetermined(self) -> bool:
        return self.kind is VerdictKind.UNDETERMINED

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        result = {'kind': self.kind.value}
        if self.certificate is not None:
            result['certificate'] = self.certificate.value
        if self.first_failure is not None:
            result['first_failure'] = self.first_failure
        if self.depth is not None:
            result['depth'] = self.depth
        return result


def _prefix_orbit(a: PositiveSequence, s: float, steps: int) -> Tuple[float, Optional[int]]:
    """Run the recursion through ``steps`` prefix entries; return (w_steps, failure)."""
    omega = 1.0
    prefix = a.prefix
    for x in range(steps):
        omega = 1.0 - s * prefix[x] / omega
        if omega <= 0:
            return omega, x + 1
    return omega, None


def _verdict(a: PositiveSequence, s: float, depth: int, locate_failure: bool = True) -> AllowedVerdict:
    prefix_length = a.prefix_length

    if isinstance(a.tail, ConstantTail):
        omega, failure = _prefix_orbit(a, s, prefix_length)
        if failure is not None:
            return AllowedVerdict(VerdictKind.NOT_ALLOWED, first_failure=failure)
        c = s * a.tail.value
        fixed = tail_fixed_points(c)
        # exact comparison: no epsilon at the repelling point
        if fixed is not None and omega >= fixed[0]:
            return AllowedVerdict(VerdictKind.ALLOWED, certificate=Certificate.CLOSED_FORM_TAIL)
        if not locate_failure:
            return AllowedVerdict(VerdictKind.NOT_ALLOWED)
        trace = omega_trace(a, s, max(depth, prefix_length + 1))
        return AllowedVerdict(VerdictKind.NOT_ALLOWED, first_failure=trace.first_failure)

    scanned = min(depth, prefix_length)
    omega, failure = _prefix_orbit(a, s, scanned)
    if failure is not None:
        return AllowedVerdict(VerdictKind.NOT_ALLOWED, first_failure=failure)
    if scanned < prefix_length:
        return AllowedVerdict(VerdictKind.UNDETERMINED, depth=scanned)
    return AllowedVerdict(VerdictKind.ALLOWED, certificate=Certificate.DEPTH_EXHAUSTED_POSITIVE,
                          depth=scanned)


def is_allowed(a: PositiveSequence, s: float, depth: int = DEFAULT_DEPTH) -> AllowedVerdict:
    """Decide whether s*a is allowed.

    Constant tails are decided in closed form once the prefix is consumed:
    allowed forever iff c = s*a_tail <= 1/4 and the entering w >= w-(c).
    Prefix-only sequences are scanned up to ``depth``; a fully positive scan
    gives Allowed(DepthExhaustedPositive), a truncated scan Undetermined.
    A NotAllowed verdict for a constant tail locates its failure within
    ``depth`` steps; first_failure is None when the orbit survives longer.
    """
    if not s > 0:
        raise ValueError(f"s must be positive, got {s!r}")
    verdict = _verdict(a, s, depth)
    logger.debug(f"is_allowed(s={s!r}) -> {verdict.kind.value}")
    return verdict


def h_finite(a: PositiveSequence, s: float, x: int, y: int) -> float:
    """Truncation h(s; x, y) = phi_inv(s a_x) o ... o phi_inv(s a_y)(0).

    Evaluated backward from y. The returned value itself is not checked
    against 1; only intermediate values are.

    Raises:
        SingularContinuant: If an intermediate value is >= 1
    """
    if not 0 <= x <= y:
        raise ValueError(f"Require 0 <= x <= y, got x={x}, y={y}")
    h = s * a.value_at(y)
    for z in range(y - 1, x - 1, -1):
        if not h < 1:
            raise SingularContinuant(h, z + 1)
        h = s * a.value_at(z) / (1.0 - h)
    return h


def h_truncations(a: PositiveSequence, s: float, x: int, y_max: int) -> np.ndarray:
    """All truncations h(s; x, y) for y = x..y_max in one forward pass.

    Uses the modified Lentz recursion on s a_x / (1 - s a_{x+1} / (1 - ...)).
    Entries after a pole are meaningless; callers stop at the first value
    outside (0, 1).
    """
    if not 0 <= x <= y_max:
        raise ValueError(f"Require 0 <= x <= y_max, got x={x}, y_max={y_max}")
    terms = s * a.values(y_max + 1)[x:]
    out = np.empty(len(terms))
    # f_0 = b_0 = 0 is replaced by tiny, the usual Lentz start
    f = LENTZ_TINY
    C = f
    D = 0.0
    for j, term in enumerate(terms):
        a_j = term if j == 0 else -term
        D = 1.0 + a_j * D
        if D == 0:
            D = LENTZ_TINY
        C = 1.0 + a_j / C
        if C == 0:
            C = LENTZ_TINY
        D = 1.0 / D
        f *= C * D
        out[j] = f
    return out


@dataclass(frozen=True)
class HLimit:
    """Limit h(s; x, inf), or the Exceeded marker.

    Attributes:
        value: Limit value; inf when no finite limit below a pole exists
        exceeded: Some truncation surpassed 1 (s*a not allowed from x)
        truncation_depth: Backward steps or forward terms used
        converged: Last truncation step moved less than tol (closed form: True)
    """
    value: float
    exceeded: bool
    truncation_depth: int
    converged: bool

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return {
            'value': self.value if math.isfinite(self.value) else None,
            'exceeded': self.exceeded,
            'truncation_depth': self.truncation_depth,
            'converged': self.converged,
        }


def h_limit(a: PositiveSequence, s: float, x: int = 0, tol: float = 1e-12,
            depth: int = DEFAULT_DEPTH) -> HLimit:
    """Continued fraction h(s; x, inf).

    For a constant tail with c = s*a_tail <= 1/4 the tail contributes the
    smaller root of h^2 - h + c = 0 exactly; backward steps through the
    prefix finish the job. Prefix-only sequences return the last truncation
    within the horizon.

    Example:
        >>> h_limit(make_sequence([], 0.25), 1.0).value
        0.5
    """
    if not (s > 0 and tol > 0):
        raise ValueError(f"s and tol must be positive, got s={s!r}, tol={tol!r}")

    if isinstance(a.tail, ConstantTail):
        fixed = tail_fixed_points(s * a.tail.value)
        if fixed is None:
            return HLimit(math.inf, exceeded=True, truncation_depth=0, converged=True)
        h = fixed[0]
        steps = 0
        for z in range(a.prefix_length - 1, x - 1, -1):
            if not h < 1:
                logger.debug(f"h_limit: pole passed at x={z + 1}")
                return HLimit(math.inf, exceeded=True, truncation_depth=steps, converged=True)
            h = s * a.prefix[z] / (1.0 - h)
            steps += 1
        return HLimit(h, exceeded=h > 1, truncation_depth=steps, converged=True)

    if x >= a.prefix_length:
        raise OutOfDomain(x, a.prefix_length)
    y_max = min(a.prefix_length - 1, x + depth)
    truncs = h_truncations(a, s, x, y_max)
    bad = np.flatnonzero((truncs <= 0) | (truncs > 1))
    if bad.size:
        j = int(bad[0])
        return HLimit(float(truncs[j]), exceeded=True, truncation_depth=j + 1, converged=False)
    value = float(truncs[-1])
    converged = len(truncs) >= 2 and abs(truncs[-1] - truncs[-2]) < tol
    if not converged:
        logger.warning(f"h_limit: truncation at y={y_max} not converged to tol={tol}")
    return HLimit(value, exceeded=False, truncation_depth=len(truncs), converged=converged)
