"""The h-transformed birth-death chain P^(r) reflected at its base state.

For a base m and scale r, w_m = 1 and w_{x+1} = 1 - r^2 a_x / w_x give the
up-probabilities p_{x,x+1} = w_x and down-probabilities p_{x,x-1} = 1 - w_x.
The positive eigenvector f of Q f = f / r follows from the same orbit.
"""

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.special import logsumexp
from scipy.stats import linregress

from .config import DEFAULT_DEPTH, DEFAULT_TOL, LOG_SPACE_K_THRESHOLD, get_max_workers
from .contfrac import OmegaTrace, omega_trace
from .exceptions import (
    DepthExceeded,
    GapRequired,
    LengthMismatch,
    NotPositiveRecurrent,
    OmegaCollapse,
    OutOfDomain,
)
from .radius import gap_threshold, s_star
from .seqmodel import NearestNeighborMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BirthDeathChain:
    """P^(r) on {base, base+1, ...}.

    Attributes:
        base: Reflecting state m
        r: Scale; the orbit runs at s = r^2 unless built with an explicit s
        trace: Orbit of the shifted sequence, trace.values[i] = w_{base+i}
        depth: Requested depth of the orbit
    """
    base: int
    r: float
    trace: OmegaTrace
    depth: int

    @property
    def s(self) -> float:
        return self.trace.s

    def omega(self, x: int) -> float:
        if x < self.base:
            raise OutOfDomain(x, self.base)
        return self.trace.value_at(x - self.base)

    def up_prob(self, x: int) -> float:
        return self.omega(x)

    def down_prob(self, x: int) -> float:
        return 1.0 - self.omega(x)

    def omega_values(self, n: int) -> np.ndarray:
        """w_base..w_{base+n-1}."""
        return self.trace.values_through(n)

    def transition_matrix(self, n_states: int) -> sparse.spmatrix:
        """Finite section on base..base+n_states-1.

        The last state keeps its up-probability as a self-loop so that rows
        stay stochastic.
        """
        if n_states < 2:
            raise ValueError(f"n_states must be >= 2, got {n_states}")
        p = self.omega_values(n_states)
        q = 1.0 - p
        diagonal = np.zeros(n_states)
        diagonal[-1] = p[-1]
        return sparse.diags([q[1:], diagonal, p[:-1]], [-1, 0, 1], format='csr')


def build_chain(mat: NearestNeighborMatrix, m: int, r: float, depth: int = DEFAULT_DEPTH,
                s: Optional[float] = None) -> BirthDeathChain:
    """Build P^(r) reflected at m from the product sequence of ``mat``.

    Args:
        mat: Nearest-neighbor matrix
        m: Base state
        r: Scale, r^2 <= s*^[m]
        depth: Orbit depth
        s: Scale for the orbit; defaults to r*r

    Raises:
        OmegaCollapse: If w_x <= 0 within depth (r too large)
    """
    if not r > 0:
        raise ValueError(f"r must be positive, got {r!r}")
    a_m = mat.product_sequence().shift(m)
    trace = omega_trace(a_m, r * r if s is None else s, depth)
    if trace.first_failure is not None:
        raise OmegaCollapse(m + trace.first_failure, float(trace.values[-1]))
    logger.debug(f"build_chain(m={m}, r={r!r}): orbit depth {trace.depth}, "
                 f"stationary_from={trace.stationary_from}")
    return BirthDeathChain(m, r, trace, depth)


def critical_chain(mat: NearestNeighborMatrix, m: int, tol: float = DEFAULT_TOL,
                   depth: int = DEFAULT_DEPTH) -> BirthDeathChain:
    """Chain at r = sqrt(s*^[m]), the h-transform at the convergence radius."""
    value = s_star(mat.product_sequence(), m, tol, depth).value
    return build_chain(mat, m, math.sqrt(value), depth, s=value)


@dataclass(frozen=True, eq=False)
class EigenvectorTable:
    """log f_x for x = base..base+len-1, normalized to log f_base = 0."""
    base: int
    r: float
    log_f: np.ndarray

    def row_residuals(self, mat: NearestNeighborMatrix) -> np.ndarray:
        """r (q_{x,x-1} f_{x-1} + q_{x,x+1} f_{x+1}) / f_x - 1 for each row with f_{x+1}.

        The base row has no q_{x,x-1} term (restriction to states >= base).
        """
        lf = self.log_f
        n = len(lf)
        if n < 2:
            return np.zeros(0)
        log_r = math.log(self.r)
        log_up = mat.log_up.values(self.base + n - 1)[self.base:]
        log_down = mat.log_down.values(self.base + n - 1)[self.base:]
        term_up = np.exp(log_r + log_up + lf[1:] - lf[:-1])
        residual = term_up - 1.0
        if n > 2:
            term_down = np.exp(log_r + log_down[:-1] + lf[:-2] - lf[1:-1])
            residual[1:] += term_down
        return residual

    def max_residual(self, mat: NearestNeighborMatrix) -> float:
        res = self.row_residuals(mat)
        return float(np.max(np.abs(res))) if res.size else 0.0


def eigenvector_log(chain: BirthDeathChain, mat: NearestNeighborMatrix,
                    n: Optional[int] = None) -> EigenvectorTable:
    """log f with f_{x+1} = f_x w_x / (r q_{x,x+1}).

    Args:
        chain: Chain built from ``mat``
        mat: The matrix
        n: Number of steps; defaults to the chain depth for a stationary
           orbit and to the computed orbit otherwise
    """
    trace = chain.trace
    if n is None:
        n = chain.depth if trace.stationary_from is not None else trace.depth
    omega = chain.omega_values(n)
    log_up = mat.log_up.values(chain.base + n)[chain.base:]
    increments = np.log(omega) - math.log(chain.r) - log_up
    log_f = np.concatenate([[0.0], np.cumsum(increments)])
    return EigenvectorTable(chain.base, chain.r, log_f)


@dataclass(frozen=True, eq=False)
class ReturnTimeDistribution:
    """P(tau_x = 2k) for k = 1..k_max; odd return times are impossible.

    Attributes:
        state: The state x
        pmf: pmf[k-1] = P(tau_x = 2k)
        log_pmf: Natural log of pmf, kept finite past float underflow
        mass_accounted: Sum of pmf
        boundary_return: Two-step return through x-1, (1 - w_x) w_{x-1}
        log_space: The scaled recursion was used
    """
    state: int
    pmf: np.ndarray
    log_pmf: np.ndarray
    mass_accounted: float
    boundary_return: float
    log_space: bool = False

    @property
    def k_max(self) -> int:
        return len(self.pmf)

    def prob(self, k: int) -> float:
        if not 1 <= k <= self.k_max:
            raise LengthMismatch(k, self.k_max)
        return float(self.pmf[k - 1])

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.pmf)

    def truncated_mean(self) -> float:
        ks = np.arange(1, self.k_max + 1)
        return math.fsum(2.0 * ks * self.pmf)

    def tail_mean_bound(self, rate: float) -> float:
        """Bound on sum_{k > k_max} 2k P(2k) when P(2k+2) <= rate P(2k) past k_max."""
        if not 0 < rate < 1:
            return math.inf
        last = float(self.pmf[-1])
        K = self.k_max
        return 2.0 * last * (K * rate / (1.0 - rate) + rate / (1.0 - rate) ** 2)

    def tail_mass_bound(self, rate: float) -> float:
        if not 0 < rate < 1:
            return math.inf
        return float(self.pmf[-1]) * rate / (1.0 - rate)

    def to_rows(self) -> List[Tuple[int, float, float]]:
        """CSV rows (k, p, cumulative)."""
        cumulative = self.cumulative()
        return [(k + 1, float(self.pmf[k]), float(cumulative[k])) for k in range(self.k_max)]

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return {
            'state': self.state,
            'k_max': self.k_max,
            'mass_accounted': self.mass_accounted,
            'boundary_return': self.boundary_return,
            'log_space': self.log_space,
            'pmf': [float(p) for p in self.pmf],
        }


def return_time_pmf(chain: BirthDeathChain, x: int, k_max: int) -> ReturnTimeDistribution:
    """Exact first-return law of x at even times by dynamic programming.

    Paths that return by time 2 k_max never leave [base, x + k_max], so the
    recursion on that window has no truncation error. Above k_max = 300
    the state vector is renormalized each step and logs are kept.

    Example:
        gap model at r = sqrt(7)/4, x = 1: P(tau = 2) = 63/64, P(tau = 4) = 49/4096
    """
    if x < chain.base:
        raise ValueError(f"x must be >= base {chain.base}, got {x}")
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")

    n = x + k_max - chain.base + 1
    up = chain.omega_values(n)
    down = 1.0 - up
    idx = x - chain.base
    log_space = k_max > LOG_SPACE_K_THRESHOLD

    v = np.zeros(n)
    v[idx] = 1.0
    pmf = np.zeros(k_max)
    log_pmf = np.full(k_max, -np.inf)
    log_scale = 0.0
    for t in range(1, 2 * k_max + 1):
        new = np.zeros(n)
        new[1:] += v[:-1] * up[:-1]
        new[:-1] += v[1:] * down[1:]
        if t % 2 == 0:
            hit = new[idx]
            if log_space:
                log_pmf[t // 2 - 1] = math.log(hit) + log_scale if hit > 0 else -math.inf
            else:
                pmf[t // 2 - 1] = hit
        new[idx] = 0.0
        if log_space:
            total = new.sum()
            if total <= 0:
                break
            new /= total
            log_scale += math.log(total)
        v = new

    if log_space:
        pmf = np.exp(log_pmf)
    else:
        with np.errstate(divide='ignore'):
            log_pmf = np.log(pmf)

    boundary = chain.down_prob(x) * chain.up_prob(x - 1) if x > chain.base else 0.0
    mass = math.fsum(pmf)
    logger.debug(f"return_time_pmf(x={x}, k_max={k_max}): mass {mass!r}")
    return ReturnTimeDistribution(x, pmf, log_pmf, mass, boundary, log_space)


def verify_excursion_identity(chain_m: BirthDeathChain, chain_m1: BirthDeathChain, x_max: int,
                              tol: float = DEFAULT_TOL) -> float:
    """max_x |w^[m]_x (1 - w^[m]_{x+1}) - xi w^[m+1]_x (1 - w^[m+1]_{x+1})| over base+1..x_max.

    Raises:
        GapRequired: If the two scales show no gap (xi undefined)
    """
    if chain_m1.base != chain_m.base + 1:
        raise ValueError(f"Chains must have bases m and m+1, got {chain_m.base} and {chain_m1.base}")
    if x_max <= chain_m.base:
        raise ValueError(f"x_max must exceed base {chain_m.base}, got {x_max}")
    s_m, s_m1 = chain_m.s, chain_m1.s
    if s_m1 - s_m <= gap_threshold(s_m, tol):
        raise GapRequired(s_m, s_m1)
    xi = s_m / s_m1
    w0 = chain_m.omega_values(x_max + 2 - chain_m.base)[1:]
    w1 = chain_m1.omega_values(x_max + 2 - chain_m1.base)
    lhs = w0[:-1] * (1.0 - w0[1:])
    rhs = xi * w1[:-1] * (1.0 - w1[1:])
    return float(np.max(np.abs(lhs - rhs)))


def verify_scaling(pmf_m: ReturnTimeDistribution, pmf_m1: ReturnTimeDistribution,
                   xi: float, k_range: Iterable[int]) -> Dict[int, float]:
    """Relative residuals of P^[m](2k) = xi^k P^[m+1](2k).

    For k = 1 the boundary two-step return is added on the right:
    P^[m](2) = (1 - w^[m]_{m+1}) + xi P^[m+1](2).

    Raises:
        LengthMismatch: If some k exceeds either pmf
    """
    ks = list(k_range)
    available = min(pmf_m.k_max, pmf_m1.k_max)
    for k in ks:
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if k > available:
            raise LengthMismatch(k, available)
    floor = np.finfo(float).tiny
    residuals = {}
    for k in ks:
        observed = float(pmf_m.pmf[k - 1])
        if k == 1:
            expected = pmf_m.boundary_return + xi * float(pmf_m1.pmf[0])
        else:
            expected = xi ** k * float(pmf_m1.pmf[k - 1])
        residuals[k] = abs(observed - expected) / max(observed, floor)
    return residuals


class MomentVerdict(str, Enum):
    FINITE = "Finite"
    DIVERGES = "DivergesAtTheta"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class MomentEstimate:
    """Truncated E theta^tau with a fitted geometric tail."""
    theta: float
    truncated_sum: float
    tail_rate: Optional[float]
    tail_rate_uncertainty: Optional[float]
    verdict: MomentVerdict
    critical_theta: Optional[float] = None
    theta_bounds: Optional[Tuple[float, float]] = None

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return {
            'theta': self.theta,
            'truncated_sum': self.truncated_sum if math.isfinite(self.truncated_sum) else None,
            'tail_rate': self.tail_rate,
            'tail_rate_uncertainty': self.tail_rate_uncertainty,
            'verdict': self.verdict.value,
            'critical_theta': self.critical_theta,
            'theta_bounds': list(self.theta_bounds) if self.theta_bounds else None,
        }


def exp_moment(pmf: ReturnTimeDistribution, theta: float,
               xi: Optional[float] = None) -> MomentEstimate:
    """E theta^tau truncated at 2 k_max, with a verdict from the tail fit.

    The tail rate is exp(slope) of a least-squares line through log P(2k)
    over the last third of k; the uncertainty is twice the slope standard
    error. theta^2 * rate below 1 - uncertainty is Finite, above
    1 + uncertainty DivergesAtTheta.
    """
    if not theta > 1:
        raise ValueError(f"theta must be > 1, got {theta!r}")
    ks = np.arange(1, pmf.k_max + 1)
    log_terms = 2.0 * ks * math.log(theta) + pmf.log_pmf
    finite = np.isfinite(log_terms)
    truncated_sum = float(np.exp(logsumexp(log_terms[finite]))) if finite.any() else 0.0
    bounds = (1.0 / xi, 1.0 / math.sqrt(xi)) if xi else None

    start = pmf.k_max - max(pmf.k_max // 3, 3)
    sel = np.arange(max(start, 0), pmf.k_max)
    sel = sel[np.isfinite(pmf.log_pmf[sel])]
    if sel.size < 3:
        logger.warning(f"exp_moment: only {sel.size} usable tail points")
        return MomentEstimate(theta, truncated_sum, None, None, MomentVerdict.INCONCLUSIVE,
                              theta_bounds=bounds)

    fit = linregress(ks[sel], pmf.log_pmf[sel])
    slope, stderr = float(fit.slope), float(fit.stderr)
    uncertainty = 2.0 * stderr
    criterion = 2.0 * math.log(theta) + slope
    if criterion < -uncertainty:
        verdict = MomentVerdict.FINITE
    elif criterion > uncertainty:
        verdict = MomentVerdict.DIVERGES
    else:
        verdict = MomentVerdict.INCONCLUSIVE
    return MomentEstimate(
        theta=theta,
        truncated_sum=truncated_sum,
        tail_rate=math.exp(slope),
        tail_rate_uncertainty=uncertainty,
        verdict=verdict,
        critical_theta=math.exp(-0.5 * slope),
        theta_bounds=bounds,
    )


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    """Normalized birth-death weights pi_x, x >= base.

    ``ratio`` is the geometric ratio of the weights past the computed
    orbit; ``certified`` is False when that ratio is the last observed one
    rather than a fixed-point value.
    """
    base: int
    log_weights: np.ndarray
    log_total: float
    ratio: float
    certified: bool

    def pi(self, x: int) -> float:
        idx = x - self.base
        if idx < 0:
            raise OutOfDomain(x, self.base)
        last = len(self.log_weights) - 1
        if idx <= last:
            return math.exp(self.log_weights[idx] - self.log_total)
        return math.exp(self.log_weights[-1] + (idx - last) * math.log(self.ratio) - self.log_total)

    def probabilities(self, n: int) -> np.ndarray:
        return np.array([self.pi(self.base + i) for i in range(n)])

    def mean_return_time(self, x: int) -> float:
        return 1.0 / self.pi(x)

    def to_dict(self, n: int = 10) -> dict:
        """Convert to dictionary."""
        return {
            'base': self.base,
            'pi': [float(p) for p in self.probabilities(n)],
            'ratio': self.ratio,
            'certified': self.certified,
            'mean_return_time_base': self.mean_return_time(self.base),
        }


def stationary_distribution(chain: BirthDeathChain, tol: float = DEFAULT_TOL) -> StationaryDistribution:
    """Detailed-balance weights pi_{x+1} = pi_x p_x / q_{x+1}, normalized.

    p_x = omega_x is the up probability at x and q_{x+1} = 1 - omega_{x+1}
    the down probability at x+1; the unnormalized weights start at
    pi_base = 1. A stationary orbit contributes its geometric tail
    p/(1 - p) in closed form.

    Raises:
        NotPositiveRecurrent: If the weights are not summable
    """
    omega = chain.trace.values
    if len(omega) < 2:
        raise NotPositiveRecurrent("orbit too short to build weights")
    log_ratio = np.log(omega[:-1]) - np.log1p(-omega[1:])
    log_w = np.concatenate([[0.0], np.cumsum(log_ratio)])

    if chain.trace.stationary_from is not None:
        w_star = float(omega[-1])
        ratio = w_star / (1.0 - w_star)
        certified = True
    else:
        ratio = float(np.exp(log_ratio[-1]))
        certified = False
    if ratio >= 1.0 - tol:
        raise NotPositiveRecurrent(f"weight ratio {ratio!r} does not decay below 1")
    if not certified:
        logger.warning(f"stationary_distribution: tail ratio {ratio!r} is not certified")

    log_tail = log_w[-1] + math.log(ratio) - math.log1p(-ratio)
    log_total = float(np.logaddexp(logsumexp(log_w), log_tail))
    return StationaryDistribution(chain.base, log_w, log_total, ratio, certified)


@dataclass(frozen=True)
class EscapeProbability:
    """Probability of never returning to base after the first step up."""
    value: float
    certified: bool
    terms: int

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return {'value': self.value, 'certified': self.certified, 'terms': self.terms}


def escape_probability(chain: BirthDeathChain) -> EscapeProbability:
    """1 / (1 + sum_{y > base} prod_{base < z <= y} (1 - w_z) / w_z).

    Exact through a geometric tail when the orbit is stationary; otherwise
    the sum is truncated at the orbit depth and the value is an upper bound.
    """
    omega = chain.trace.values[1:]
    if omega.size == 0:
        raise DepthExceeded(chain.base + 1, chain.base)
    log_terms = np.cumsum(np.log1p(-omega) - np.log(omega))
    log_sum = float(np.logaddexp(0.0, logsumexp(log_terms)))
    if chain.trace.stationary_from is not None:
        w_star = float(omega[-1])
        kappa = (1.0 - w_star) / w_star
        if kappa >= 1.0:
            return EscapeProbability(0.0, certified=True, terms=len(omega))
        log_tail = log_terms[-1] + math.log(kappa) - math.log1p(-kappa)
        log_sum = float(np.logaddexp(log_sum, log_tail))
        return EscapeProbability(math.exp(-log_sum), certified=True, terms=len(omega))
    return EscapeProbability(math.exp(-log_sum), certified=False, terms=len(omega))


@dataclass(frozen=True)
class Steps:
    """Run one path of n steps from x0."""
    n: int


@dataclass(frozen=True)
class ReturnsTo:
    """Collect ``count`` return times to x, each censored at ``cap`` steps."""
    x: int
    count: int
    cap: int


SimulationMode = Union[Steps, ReturnsTo]

DEFAULT_THETA_GRID = (1.1, 1.2, 1.4, 1.6)
RNG_NAME = "numpy.random.Philox"


def replica_generator(seed: int, replica: int) -> np.random.Generator:
    """Counter-based generator for one replica, keyed by seed XOR replica."""
    return np.random.Generator(np.random.Philox(seed ^ replica))


@dataclass(frozen=True, eq=False)
class SimulationReport:
    """Monte Carlo summary, merged across replicas by replica index.

    Attributes:
        return_times: Uncensored return times
        censored: Number of returns cut off at the cap
        initial_hitting_times: Steps from x0 to the target per replica (None if censored)
        occupation: Visit counts per state (Steps mode)
    """
    mode: str
    seed: int
    replicas: int
    x0: int
    target: int
    return_times: np.ndarray
    censored: int
    theta_grid: Tuple[float, ...]
    initial_hitting_times: Tuple[Optional[int], ...] = ()
    occupation: Optional[np.ndarray] = None
    rng: str = RNG_NAME
    numpy_version: str = field(default_factory=lambda: np.__version__)

    @property
    def samples(self) -> int:
        return int(self.return_times.size) + self.censored

    @property
    def returned_fraction(self) -> float:
        return self.return_times.size / self.samples if self.samples else 0.0

    @property
    def mean_return_time(self) -> Optional[float]:
        return float(self.return_times.mean()) if self.return_times.size else None

    @property
    def mean_standard_error(self) -> Optional[float]:
        n = self.return_times.size
        if n < 2:
            return None
        return float(self.return_times.std(ddof=1) / math.sqrt(n))

    def theta_moments(self) -> Dict[float, Optional[float]]:
        """Empirical E theta^tau over the uncensored returns."""
        result = {}
        for theta in self.theta_grid:
            if not self.return_times.size:
                result[theta] = None
                continue
            logs = self.return_times * math.log(theta)
            result[theta] = float(np.exp(logsumexp(logs) - math.log(logs.size)))
        return result

    def empirical_pmf(self, k_max: int) -> np.ndarray:
        """Fraction of all samples (censored included) with tau = 2k, k = 1..k_max."""
        counts = np.bincount(self.return_times.astype(np.int64), minlength=2 * k_max + 1)
        return counts[2:2 * k_max + 1:2] / max(self.samples, 1)

    def to_rows(self, k_max: int) -> List[Tuple[int, float, float]]:
        """CSV rows (k, p, cumulative)."""
        pmf = self.empirical_pmf(k_max)
        cumulative = np.cumsum(pmf)
        return [(k + 1, float(pmf[k]), float(cumulative[k])) for k in range(k_max)]

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        moments = self.theta_moments()
        return {
            'mode': self.mode,
            'seed': self.seed,
            'replicas': self.replicas,
            'x0': self.x0,
            'target': self.target,
            'samples': self.samples,
            'returned': int(self.return_times.size),
            'censored': self.censored,
            'returned_fraction': self.returned_fraction,
            'mean_return_time': self.mean_return_time,
            'mean_standard_error': self.mean_standard_error,
            'theta_moments': [{'theta': t, 'mean': moments[t]} for t in self.theta_grid],
            'initial_hitting_times': list(self.initial_hitting_times),
            'rng': self.rng,
            'numpy_version': self.numpy_version,
        }

    def to_json(self, indent: Optional[int] = None) -> str:
        """Convert to JSON string."""
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def to_csv(self, k_max: int) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(['k', 'p', 'cumulative'])
        writer.writerows(self.to_rows(k_max))
        return buffer.getvalue()


def _hitting_time(rng: np.random.Generator, omega: np.ndarray, base: int,
                  start: int, target: int, cap: int) -> Optional[int]:
    if start == target:
        return 0
    pos = start
    for t in range(1, cap + 1):
        pos += 1 if rng.random() < omega[pos - base] else -1
        if pos == target:
            return t
    return None


def _excursions(rng: np.random.Generator, omega: np.ndarray, base: int, x: int,
                count: int, cap: int) -> Tuple[np.ndarray, int]:
    """Independent return times to x, vectorized over walkers."""
    pos = np.full(count, x, dtype=np.int64)
    times = np.full(count, -1, dtype=np.int64)
    active = np.arange(count)
    for t in range(1, cap + 1):
        if not active.size:
            break
        p = omega[pos[active] - base]
        u = rng.random(active.size)
        pos[active] += np.where(u < p, 1, -1)
        back = pos[active] == x
        times[active[back]] = t
        active = active[~back]
    returned = times[times >= 0]
    return returned, count - returned.size


def _path(rng: np.random.Generator, omega: np.ndarray, base: int, x0: int,
          n: int) -> Tuple[np.ndarray, int, np.ndarray]:
    """One path of n steps: return times to x0, censored tail, occupation."""
    u = rng.random(n)
    pos = x0
    last_visit = 0
    returns = []
    occupation = np.zeros(len(omega), dtype=np.int64)
    occupation[x0 - base] += 1
    for t in range(1, n + 1):
        pos += 1 if u[t - 1] < omega[pos - base] else -1
        occupation[pos - base] += 1
        if pos == x0:
            returns.append(t - last_visit)
            last_visit = t
    censored = 1 if last_visit < n else 0
    return np.asarray(returns, dtype=np.int64), censored, occupation


def _split(total: int, replicas: int) -> List[int]:
    return [total // replicas + (1 if r < total % replicas else 0) for r in range(replicas)]


def simulate(chain: BirthDeathChain, x0: int, mode: SimulationMode, seed: int,
             replicas: int = 1, theta_grid: Sequence[float] = DEFAULT_THETA_GRID) -> SimulationReport:
    """Monte Carlo run of the chain, deterministic given seed and replicas.

    ReturnsTo first walks from x0 to the target (one walk per replica,
    reported as initial hitting times) and then draws i.i.d. excursions
    from the target; by the strong Markov property they have the law of
    consecutive returns. Steps runs one path per replica and records the
    returns to x0 along it.
    """
    if x0 < chain.base:
        raise ValueError(f"x0 must be >= base {chain.base}, got {x0}")
    if replicas < 1:
        raise ValueError(f"replicas must be >= 1, got {replicas}")
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed!r}")

    if isinstance(mode, ReturnsTo):
        if mode.x < chain.base:
            raise ValueError(f"target must be >= base {chain.base}, got {mode.x}")
        top = max(x0, mode.x) + mode.cap
        omega = chain.omega_values(top - chain.base + 2)
        counts = _split(mode.count, replicas)

        def run(replica: int):
            rng = replica_generator(seed, replica)
            hit = _hitting_time(rng, omega, chain.base, x0, mode.x, mode.cap)
            times, censored = _excursions(rng, omega, chain.base, mode.x, counts[replica], mode.cap)
            return hit, times, censored
        target, label = mode.x, "returns"
    elif isinstance(mode, Steps):
        omega = chain.omega_values(x0 + mode.n - chain.base + 2)
        lengths = [mode.n] * replicas

        def run(replica: int):
            rng = replica_generator(seed, replica)
            return _path(rng, omega, chain.base, x0, lengths[replica])
        target, label = x0, "steps"
    else:
        raise TypeError(f"Unknown simulation mode: {mode!r}")

    workers = min(get_max_workers(), replicas)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(replicas)))
    else:
        results = [run(r) for r in range(replicas)]

    if label == "returns":
        hits = tuple(h for h, _, _ in results)
        times = np.concatenate([t for _, t, _ in results])
        censored = sum(c for _, _, c in results)
        occupation = None
    else:
        hits = ()
        times = np.concatenate([t for t, _, _ in results])
        censored = sum(c for _, c, _ in results)
        occupation = np.sum([o for _, _, o in results], axis=0)

    logger.info(f"simulate: {times.size} returns, {censored} censored (seed={seed}, replicas={replicas})")
    return SimulationReport(
        mode=label,
        seed=seed,
        replicas=replicas,
        x0=x0,
        target=target,
        return_times=times,
        censored=censored,
        theta_grid=tuple(theta_grid),
        initial_hitting_times=hits,
        occupation=occupation,
    )
