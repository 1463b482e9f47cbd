"""Critical scalings, gap detection and R-classification.

s*^[m] = R(Q^[m])^2 is the right end of the interval of scalings s for which
s * a^[m] is allowed. A strict increase s*^[m] < s*^[m+1] (a gap) makes Q
R-positive; a flat ladder with a constant tail makes Q^[1] R-transient.
Two brute-force oracles (truncated Perron values and diagonal return sums)
cross-check R independently of the continued-fraction machinery.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.linalg import solve_banded

from .config import DEFAULT_DEPTH, DEFAULT_TOL, GAP_RELATIVE_THRESHOLD, get_max_workers
from .contfrac import HLimit, _verdict, h_limit, h_truncations
from .exceptions import (
    EmptyLadder,
    NoTailUndetermined,
    NonConvergence,
    NotInteriorScale,
    RPositiveError,
)
from .seqmodel import ConstantTail, NearestNeighborMatrix, PositiveSequence, make_sequence

logger = logging.getLogger(__name__)

MAX_BISECTION_STEPS = 2000
MAX_DOUBLINGS = 64
H_ONE_TOLERANCE = 1e-9
RECURRENCE_TERMS = 2000


class RadiusCertificate(str, Enum):
    """How an s* value was obtained."""
    CLOSED_FORM_TAIL = "ClosedFormTail"
    BISECTION = "Bisection"
    HORIZON_BOUNDED = "HorizonBounded"


class SStar(NamedTuple):
    """Critical scaling and its certificate."""
    value: float
    certificate: RadiusCertificate


def _bisect(seq: PositiveSequence, lo: float, hi: float, depth: int, stop_width: float) -> float:
    """Shrink [lo, hi] (lo allowed or 0, hi not allowed) and return lo."""
    for _ in range(MAX_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= stop_width:
            return lo
        verdict = _verdict(seq, mid, depth, locate_failure=False)
        if verdict.is_not_allowed:
            hi = mid
        else:
            lo = mid
    raise NonConvergence(MAX_BISECTION_STEPS, "bisection bracket did not close")


def s_star(a: PositiveSequence, m: int = 0, tol: float = DEFAULT_TOL,
           depth: int = DEFAULT_DEPTH) -> SStar:
    """sup{s : s * a^[m] allowed}.

    For a constant tail the verdict is exact, so bisection runs until the
    bracket cannot shrink in floating point; the tail ceiling 1/(4 a_tail)
    is tested first and returned exactly when it is itself allowed.
    Prefix-only sequences bisect to ``tol`` with Undetermined counted as
    allowed, giving a horizon-bounded value.

    Raises:
        NoTailUndetermined: If the bracket ends are both Undetermined

    Example:
        >>> s_star(make_sequence([2], 0.25), 0).value
        0.4375
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    seq = a.shift(m)

    if isinstance(seq.tail, ConstantTail):
        ceiling = 1.0 / (4.0 * seq.tail.value)
        if _verdict(seq, ceiling, depth, locate_failure=False).is_allowed:
            logger.debug(f"s_star(m={m}): closed-form tail ceiling {ceiling!r}")
            return SStar(ceiling, RadiusCertificate.CLOSED_FORM_TAIL)
        value = _bisect(seq, 0.0, ceiling, depth, stop_width=0.0)
        logger.debug(f"s_star(m={m}) = {value!r} by bisection")
        return SStar(value, RadiusCertificate.BISECTION)

    hi = 1.0 / seq.value_at(0)
    verdict = _verdict(seq, hi, depth, locate_failure=False)
    doublings = 0
    while not verdict.is_not_allowed:
        if doublings >= MAX_DOUBLINGS:
            low_verdict = _verdict(seq, tol, depth, locate_failure=False)
            if low_verdict.is_undetermined:
                raise NoTailUndetermined(depth)
            raise NonConvergence(doublings, "no NotAllowed upper bracket found")
        hi *= 2.0
        doublings += 1
        verdict = _verdict(seq, hi, depth, locate_failure=False)
    value = _bisect(seq, 0.0, hi, depth, stop_width=tol)
    logger.debug(f"s_star(m={m}) = {value!r} (horizon-bounded)")
    return SStar(value, RadiusCertificate.HORIZON_BOUNDED)


@dataclass(frozen=True)
class LemmaCheck:
    """h(s; m, inf) on both sides of a gap at m."""
    m: int
    h_at_critical: float
    h_at_next: float
    max_truncation_at_next: float
    critical_is_one: bool
    next_exceeds_one: bool
    next_below_one: bool

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return {
            'm': self.m,
            'h_at_critical': _finite_or_none(self.h_at_critical),
            'h_at_next': _finite_or_none(self.h_at_next),
            'max_truncation_at_next': _finite_or_none(self.max_truncation_at_next),
            'critical_is_one': self.critical_is_one,
            'next_exceeds_one': self.next_exceeds_one,
            'next_below_one': self.next_below_one,
        }


def _finite_or_none(value: Optional[float]) -> Optional[float]:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def gap_lemma_check(a: PositiveSequence, m: int, s_m: float, s_m1: float,
                    tol: float = DEFAULT_TOL, depth: int = DEFAULT_DEPTH,
                    truncations: int = 64) -> LemmaCheck:
    """Evaluate h(s*^[m]; m, inf) and h(s*^[m+1]; m, inf).

    At a gap the first is 1 and the second exceeds 1; both the "exceeds"
    and the "below" reading of the second inequality are reported.
    """
    seq = a.shift(m)
    at_critical = h_limit(seq, s_m, 0, tol, depth)
    at_next = h_limit(seq, s_m1, 0, tol, depth)
    y_max = truncations - 1
    if seq.domain_length is not None:
        y_max = min(y_max, seq.domain_length - 1)
    truncs = h_truncations(seq, s_m1, 0, y_max)
    # a pole flips the sign; everything after it is meaningless
    first_bad = np.flatnonzero(truncs <= 0)
    if first_bad.size:
        truncs = truncs[:int(first_bad[0])]
    max_trunc = float(truncs.max()) if truncs.size else math.inf
    next_value = at_next.value
    return LemmaCheck(
        m=m,
        h_at_critical=at_critical.value,
        h_at_next=next_value,
        max_truncation_at_next=max_trunc,
        critical_is_one=abs(at_critical.value - 1.0) <= 1e-8,
        next_exceeds_one=at_next.exceeded or max_trunc > 1,
        next_below_one=not at_next.exceeded and next_value < 1,
    )


@dataclass(frozen=True)
class LadderEntry:
    m: int
    value: float
    certificate: RadiusCertificate


@dataclass(frozen=True)
class GapReport:
    """Ladder of s*^[m] with the first gap and its derived quantities.

    Attributes:
        s_star: Entries (m, s*^[m], certificate) for the scanned m
        gap_index: First m with a gap, or None
        xi: s*^[m] / s*^[m+1] at the first gap
        theta_bounds: (1/xi, 1/sqrt(xi)), the stated and the excursion-derived bound
        gaps: Every m in the scanned range with a gap
        propagation_counterexamples: k below some gap with no gap of its own
        lemma: h values on both sides of the first gap
        covers_tail: The scan reached the constant-tail regime
    """
    s_star: Tuple[LadderEntry, ...]
    gap_index: Optional[int] = None
    xi: Optional[float] = None
    theta_bounds: Optional[Tuple[float, float]] = None
    gaps: Tuple[int, ...] = ()
    propagation_counterexamples: Tuple[int, ...] = ()
    lemma: Optional[LemmaCheck] = None
    covers_tail: bool = False

    @property
    def values(self) -> List[float]:
        return [entry.value for entry in self.s_star]

    @property
    def propagation_holds(self) -> bool:
        return not self.propagation_counterexamples

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return {
            's_star': [
                {'m': e.m, 'value': e.value, 'certificate': e.certificate.value}
                for e in self.s_star
            ],
            'gap_index': self.gap_index,
            'xi': self.xi,
            'theta_bounds': list(self.theta_bounds) if self.theta_bounds else None,
            'gaps': list(self.gaps),
            'propagation_holds': self.propagation_holds,
            'propagation_counterexamples': list(self.propagation_counterexamples),
            'lemma': self.lemma.to_dict() if self.lemma else None,
            'covers_tail': self.covers_tail,
        }


def gap_threshold(s_m: float, tol: float) -> float:
    """Smallest ladder step counted as a gap."""
    return max(10.0 * tol, GAP_RELATIVE_THRESHOLD * s_m)


def gap_propagation(values: List[float], tol: float) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """Gapped indices and the indices below a gap that lack one."""
    gaps = tuple(
        m for m in range(len(values) - 1)
        if values[m + 1] - values[m] > gap_threshold(values[m], tol)
    )
    if not gaps:
        return gaps, ()
    top = max(gaps)
    counterexamples = tuple(k for k in range(top) if k not in gaps)
    return gaps, counterexamples


def gap_scan(a: PositiveSequence, m_max: int = 64, tol: float = DEFAULT_TOL,
             depth: int = DEFAULT_DEPTH) -> GapReport:
    """Fill the s*^[m] ladder and locate the first gap.

    Constant-tail sequences stop at m = P + 1, past which every shift is the
    same constant sequence. s_star calls for distinct m run on the worker
    pool capped by config.get_max_workers().

    Raises:
        NoTailUndetermined: Propagated from s_star
        EmptyLadder: If a prefix-only sequence has no shift to scan
    """
    if m_max < 1:
        raise ValueError(f"m_max must be >= 1, got {m_max}")
    if a.has_constant_tail:
        top = min(m_max, a.prefix_length + 1)
        covers_tail = m_max >= a.prefix_length
    else:
        top = min(m_max, a.prefix_length - 1)
        covers_tail = False
    ms = list(range(top + 1))
    if not ms:
        raise EmptyLadder(a.prefix_length)

    workers = min(get_max_workers(), len(ms))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda m: s_star(a, m, tol, depth), ms))
    else:
        results = [s_star(a, m, tol, depth) for m in ms]

    ladder = tuple(LadderEntry(m, r.value, r.certificate) for m, r in zip(ms, results))
    values = [entry.value for entry in ladder]
    for m in range(len(values) - 1):
        if values[m + 1] < values[m] - gap_threshold(values[m], tol):
            logger.warning(f"gap_scan: ladder decreases at m={m} ({values[m]!r} > {values[m + 1]!r})")

    gaps, counterexamples = gap_propagation(values, tol)
    if counterexamples:
        logger.warning(f"gap_scan: gaps {gaps} do not propagate down to {counterexamples}")
    if not gaps:
        logger.info(f"gap_scan: no gap over m=0..{top}")
        return GapReport(ladder, covers_tail=covers_tail)

    m = gaps[0]
    xi = values[m] / values[m + 1]
    lemma = gap_lemma_check(a, m, values[m], values[m + 1], tol, depth)
    logger.info(f"gap_scan: gap at m={m}, xi={xi!r}")
    return GapReport(
        ladder,
        gap_index=m,
        xi=xi,
        theta_bounds=(1.0 / xi, 1.0 / math.sqrt(xi)),
        gaps=gaps,
        propagation_counterexamples=counterexamples,
        lemma=lemma,
        covers_tail=covers_tail,
    )


def _log_diagonal_returns(mat: NearestNeighborMatrix, N_max: int) -> np.ndarray:
    """log q^{(2N)}_{0,0} for N = 0..N_max.

    A closed path of 2N steps from 0 stays at or below height N, so heights
    are capped there; prefix-only matrices are capped at their domain.
    """
    if N_max < 1:
        raise ValueError(f"N_max must be >= 1, got {N_max}")
    height = N_max
    log_a = mat.log_product_sequence()
    if log_a.domain_length is not None:
        height = min(height, log_a.domain_length)
    log_up = mat.log_up.values(height)
    log_down = mat.log_down.values(height)

    v = np.full(height + 1, -np.inf)
    v[0] = 0.0
    out = np.empty(N_max + 1)
    out[0] = 0.0
    for t in range(1, 2 * N_max + 1):
        new = np.full(height + 1, -np.inf)
        new[1:] = v[:-1] + log_up
        new[:-1] = np.logaddexp(new[:-1], v[1:] + log_down)
        v = new
        if t % 2 == 0:
            out[t // 2] = v[0]
    return out


@dataclass(frozen=True)
class RecurrenceSeries:
    """Partial sums of sum_N q^{(2N)}_{0,0} R^{2N} with R^2 = s.

    Attributes:
        s: Scale at which the series is summed
        terms: q^{(2N)}_{0,0} s^N for N = 0..N_max
        partial_sums: Cumulative sums of terms
    """
    s: float
    terms: np.ndarray
    partial_sums: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.terms) - 1

    @property
    def decay_exponent(self) -> float:
        """Slope of log(term) against log(N) between N_max/2 and N_max."""
        n = self.n_max
        half = max(n // 2, 1)
        if half == n or self.terms[n] <= 0 or self.terms[half] <= 0:
            return -math.inf
        return math.log(self.terms[n] / self.terms[half]) / math.log(n / half)

    @property
    def diverges(self) -> bool:
        """Terms decaying no faster than 1/N: the sum is infinite."""
        return self.decay_exponent > -1.0

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        exponent = self.decay_exponent
        return {
            's': self.s,
            'N': self.n_max,
            'last_term': float(self.terms[-1]),
            'partial_sum': float(self.partial_sums[-1]),
            'decay_exponent': exponent if math.isfinite(exponent) else None,
            'diverges': self.diverges,
        }


def r_recurrence_series(mat: NearestNeighborMatrix, s: float, N_max: int) -> RecurrenceSeries:
    """Sum q^{(2N)}_{0,0} R^{2N} at R = sqrt(s) up to N_max.

    Q is R-recurrent when the full series diverges. At the critical scale
    the terms tend to a positive limit for an R-positive matrix, decay like
    N^{-1/2} in the null case and like N^{-3/2} for the transient walks of
    constant tails.

    Example:
        >>> r_recurrence_series(matrix_from_product(make_sequence([], 1.0)), 0.25, 2).terms.tolist()
        [1.0, 0.25, 0.125]
    """
    if not s > 0:
        raise ValueError(f"s must be positive, got {s!r}")
    logs = _log_diagonal_returns(mat, N_max)
    terms = np.exp(logs + np.arange(N_max + 1) * math.log(s))
    return RecurrenceSeries(s=s, terms=terms, partial_sums=np.cumsum(terms))


class Verdict(str, Enum):
    R_POSITIVE = "RPositive"
    TAIL_R_TRANSIENT = "TailRTransient"
    UNDETERMINED = "Undetermined"


class GibbsLabel(str, Enum):
    UNIQUE = "UniqueTIGibbsState"
    NONE = "NoTIGibbsState"
    UNKNOWN = "Unknown"


class BaseChain(str, Enum):
    """Behavior of the h-transformed chain on all of Z+."""
    POSITIVE = "positive"
    RECURRENT = "recurrent"
    TRANSIENT = "transient"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Classification:
    """R-classification of a nearest-neighbor matrix.

    h_levels holds (x, h(s*^[0]; x, inf)) for x = 1..P, which covers every
    shift since those from P on are the same constant sequence.
    shifted_chains is set without a gap: the chains X^[k], k >= 1, are
    transient when every level is below one.
    """
    verdict: Verdict
    gibbs_label: GibbsLabel
    h_at_critical: Optional[HLimit] = None
    gap_index: Optional[int] = None
    xi: Optional[float] = None
    reason: Optional[str] = None
    base_chain: BaseChain = BaseChain.UNKNOWN
    report: Optional[GapReport] = None
    h_levels: Tuple[Tuple[int, HLimit], ...] = ()
    shifted_chains: Optional[BaseChain] = None
    recurrence: Optional[RecurrenceSeries] = None

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        report = self.report.to_dict() if self.report else {}
        h = self.h_at_critical
        return {
            's_star': report.get('s_star', []),
            'gap_index': self.gap_index,
            'xi': self.xi,
            'verdict': self.verdict.value,
            'h_at_critical': _finite_or_none(h.value) if h else None,
            'h_converged': h.converged if h else None,
            'h_levels': [{'x': x, 'h': _finite_or_none(level.value)} for x, level in self.h_levels],
            'shifted_chains': self.shifted_chains.value if self.shifted_chains else None,
            'r_recurrence': self.recurrence.to_dict() if self.recurrence else None,
            'gibbs_label': self.gibbs_label.value,
            'base_chain': self.base_chain.value,
            'reason': self.reason,
            'gap_report': report or None,
        }


def _h_levels(a: PositiveSequence, s: float, top: int, tol: float,
              depth: int) -> Tuple[Tuple[int, HLimit], ...]:
    levels = []
    for x in range(1, top + 1):
        try:
            levels.append((x, h_limit(a, s, x, tol, depth)))
        except RPositiveError as exc:
            logger.warning(f"classify: h at level {x} failed: {exc}")
            break
    return tuple(levels)


def classify(mat: NearestNeighborMatrix, m_max: int = 64, tol: float = DEFAULT_TOL,
             depth: int = DEFAULT_DEPTH, series_terms: int = RECURRENCE_TERMS) -> Classification:
    """Classify Q as RPositive, TailRTransient or Undetermined.

    TailRTransient requires a constant tail and a ladder scanned into the
    tail. The no-gap case also reports h(s*; 0, inf): below one the chain
    on all of Z+ is transient; at one it cannot be classified. Constant-tail
    matrices also get the partial R-recurrence series at R^2 = s*^[0]
    (series_terms = 0 skips it).
    """
    a = mat.product_sequence()
    try:
        report = gap_scan(a, m_max, tol, depth)
    except RPositiveError as exc:
        logger.warning(f"classify: ladder failed: {exc}")
        return Classification(Verdict.UNDETERMINED, GibbsLabel.UNKNOWN, reason=type(exc).__name__)

    s0 = report.s_star[0].value
    try:
        h_crit = h_limit(a, s0, 0, tol, depth)
    except RPositiveError as exc:
        logger.warning(f"classify: h at critical scale failed: {exc}")
        h_crit = None

    if not a.has_constant_tail:
        return Classification(Verdict.UNDETERMINED, GibbsLabel.UNKNOWN, h_at_critical=h_crit,
                              reason="NoTailUndetermined", report=report)

    levels = _h_levels(a, s0, min(max(a.prefix_length, 1), m_max), tol, depth)
    recurrence = r_recurrence_series(mat, s0, series_terms) if series_terms > 0 else None
    found = dict(h_at_critical=h_crit, report=report, h_levels=levels, recurrence=recurrence)

    if report.gap_index is not None:
        return Classification(Verdict.R_POSITIVE, GibbsLabel.UNIQUE, gap_index=report.gap_index,
                              xi=report.xi, base_chain=BaseChain.POSITIVE, **found)

    if not report.covers_tail:
        return Classification(Verdict.UNDETERMINED, GibbsLabel.UNKNOWN,
                              reason="ladder does not reach the constant tail", **found)

    if h_crit is not None and abs(h_crit.value - 1.0) <= H_ONE_TOLERANCE:
        base, label = BaseChain.RECURRENT, GibbsLabel.UNKNOWN
    else:
        base, label = BaseChain.TRANSIENT, GibbsLabel.NONE
    below_one = bool(levels) and all(level.value < 1.0 - H_ONE_TOLERANCE for _, level in levels)
    shifted = BaseChain.TRANSIENT if below_one else BaseChain.UNKNOWN
    if not below_one:
        logger.warning("classify: flat ladder but h(s*; x, inf) reaches one for some x >= 1")
    return Classification(Verdict.TAIL_R_TRANSIENT, label, base_chain=base,
                          shifted_chains=shifted, **found)


def _symmetric_offdiagonal(mat: NearestNeighborMatrix, n: int) -> np.ndarray:
    """sqrt(q_{x,x+1} q_{x+1,x}) for x < n, the similar symmetric form."""
    return np.exp(0.5 * mat.log_product_sequence().values(n))


def truncated_radius_oracle(mat: NearestNeighborMatrix, L: int, tol: float = DEFAULT_TOL,
                            max_iter: int = 10_000) -> float:
    """Perron value of the (L+1)x(L+1) finite section of Q.

    Shifted inverse power iteration on the symmetrized tridiagonal form;
    the shift is the Gershgorin bound, which lies strictly above the Perron
    value, so the iteration converges to it from any positive start.

    Raises:
        NonConvergence: If the Rayleigh quotient fails to settle in max_iter steps
    """
    if L < 2:
        raise ValueError(f"L must be >= 2, got {L}")
    e = _symmetric_offdiagonal(mat, L)
    n = L + 1
    row_sums = np.zeros(n)
    row_sums[:-1] += e
    row_sums[1:] += e
    shift = row_sums.max() * (1.0 + 1e-12)

    # banded (shift*I - T): upper, main, lower
    ab = np.zeros((3, n))
    ab[0, 1:] = -e
    ab[1, :] = shift
    ab[2, :-1] = -e

    v = np.full(n, 1.0 / math.sqrt(n))
    lam = 0.0
    for iteration in range(1, max_iter + 1):
        w = solve_banded((1, 1), ab, v)
        v = w / np.linalg.norm(w)
        tv = np.zeros(n)
        tv[:-1] += e * v[1:]
        tv[1:] += e * v[:-1]
        new_lam = float(v @ tv)
        if iteration > 1 and abs(new_lam - lam) <= tol * abs(new_lam):
            logger.debug(f"truncated_radius_oracle(L={L}) converged in {iteration} steps")
            return new_lam
        lam = new_lam
    raise NonConvergence(max_iter, f"Perron value of L={L} section")


def oracle_table(mat: NearestNeighborMatrix, Ls: Iterable[int],
                 tol: float = DEFAULT_TOL) -> List[Tuple[int, float]]:
    """(L, lambda_L) pairs for several truncation sizes."""
    return [(L, truncated_radius_oracle(mat, L, tol)) for L in Ls]


def diagonal_power_series(mat: NearestNeighborMatrix, N_max: int) -> np.ndarray:
    """(q^{(2N)}_{0,0})^{1/2N} for N = 1..N_max.

    Exact log-space path sums over the capped height range.

    Example:
        >>> diagonal_power_series(matrix_from_product(make_sequence([], 1.0)), 2)[1]  # 2**0.25
        1.189207115002721
    """
    logs = _log_diagonal_returns(mat, N_max)[1:]
    return np.exp(logs / (2.0 * np.arange(1, N_max + 1)))


def extend_to_gap(a: PositiveSequence, s: float, tol: float = DEFAULT_TOL,
                  depth: int = DEFAULT_DEPTH) -> PositiveSequence:
    """Prepend a_{-1} = (1 - h(s; 0, inf)) / s so the result has a gap at 0.

    The new sequence has s*^[0] = s < s*^[1] = s*^[0](a).

    Raises:
        NotInteriorScale: If s is not strictly inside (0, s*^[0](a))
    """
    critical = s_star(a, 0, tol, depth).value
    if not 0 < s < critical:
        raise NotInteriorScale(s, critical)
    h = h_limit(a, s, 0, tol, depth)
    if h.exceeded or not h.value < 1:
        raise NotInteriorScale(s, critical)
    head = (1.0 - h.value) / s
    logger.debug(f"extend_to_gap: a_-1 = {head!r} at s={s!r}")
    return make_sequence((head,) + a.prefix, a.tail)
