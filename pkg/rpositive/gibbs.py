"""Finite-volume Gibbs measures of nonnegative unit-step trajectories.

On a window [i, j] with boundary heights w_{i-1} and w_{j+1} every admissible
interior path is weighted by exp(H). Both Hamiltonians reduce to per-step
log-weights, so partition functions are entries of transfer-matrix powers,
computed here as forward and backward log-space messages.
"""

import csv
import io
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from .config import MAX_ENUMERATION_WIDTH, get_max_workers
from .exceptions import EmptyEnsemble, IndexOutOfWindow, RelationViolated, WindowTooLarge
from .seqmodel import EdgeRewards, HamiltonianSpec, RealSequence, SiteRewards

logger = logging.getLogger(__name__)

RELATION_TOLERANCE = 1e-12


@dataclass(frozen=True)
class TrajectoryBlock:
    """Heights w_k..w_l of a trajectory, k = start_index."""
    start_index: int
    heights: Tuple[int, ...]

    def __post_init__(self):
        heights = tuple(int(h) for h in self.heights)
        if not heights:
            raise ValueError("A block needs at least one height")
        for t, h in enumerate(heights):
            if h < 0:
                raise ValueError(f"Negative height {h} at index {self.start_index + t}")
        for t in range(len(heights) - 1):
            if abs(heights[t + 1] - heights[t]) != 1:
                raise ValueError(
                    f"Non-unit step {heights[t]} -> {heights[t + 1]} at index {self.start_index + t}"
                )
        object.__setattr__(self, 'heights', heights)

    @property
    def end_index(self) -> int:
        return self.start_index + len(self.heights) - 1

    def __len__(self) -> int:
        return len(self.heights)


def make_block(heights: Iterable[int], start_index: int = 0) -> TrajectoryBlock:
    """Block starting at ``start_index``."""
    return TrajectoryBlock(start_index, tuple(heights))


def visit_counts(block: TrajectoryBlock) -> Dict[int, int]:
    """N_x: number of visits to height x.

    Example:
        >>> visit_counts(make_block([0, 1, 0, 1, 2]))
        {0: 2, 1: 2, 2: 1}
    """
    return dict(Counter(block.heights))


def edge_counts(block: TrajectoryBlock) -> Dict[Tuple[int, int], int]:
    """N_{x,y}: number of directed steps x -> y."""
    return dict(Counter(zip(block.heights[:-1], block.heights[1:])))


def hamiltonian_sites(alpha: RealSequence, block: TrajectoryBlock) -> float:
    """sum_x alpha_x N_x over a block covering [i, j+1]."""
    return math.fsum(alpha.value_at(x) * n for x, n in visit_counts(block).items())


def hamiltonian_edges(b: RealSequence, c: RealSequence, block: TrajectoryBlock) -> float:
    """sum_x b_x N_{x,x+1} + c_x N_{x+1,x} over a block covering [i-1, j+1]."""
    terms = []
    for (x, y), n in edge_counts(block).items():
        terms.append(n * (b.value_at(x) if y == x + 1 else c.value_at(y)))
    return math.fsum(terms)


@dataclass(frozen=True)
class Window:
    """Closed window [i, j] with heights w_{i-1} = left and w_{j+1} = right."""
    i: int
    j: int
    left_boundary: int
    right_boundary: int

    def __post_init__(self):
        if self.j < self.i:
            raise ValueError(f"Window needs j >= i, got [{self.i}, {self.j}]")
        if self.left_boundary < 0 or self.right_boundary < 0:
            raise ValueError(
                f"Boundary heights must be >= 0, got ({self.left_boundary}, {self.right_boundary})"
            )

    @property
    def width(self) -> int:
        """Number of interior sites."""
        return self.j - self.i + 1

    @property
    def steps(self) -> int:
        """Steps from w_{i-1} to w_{j+1}."""
        return self.j - self.i + 2

    @property
    def height_cap(self) -> int:
        """No admissible path goes above this height."""
        return max(self.left_boundary, self.right_boundary) + self.steps

    @property
    def is_nonempty(self) -> bool:
        gap = abs(self.left_boundary - self.right_boundary)
        return gap <= self.steps and (self.steps - gap) % 2 == 0

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return {
            'i': self.i,
            'j': self.j,
            'left_boundary': self.left_boundary,
            'right_boundary': self.right_boundary,
        }


def _step_log_weights(hamiltonian: HamiltonianSpec, cap: int) -> Tuple[np.ndarray, np.ndarray]:
    """(up, down): up[x] is the log-weight of x -> x+1, down[x] of x+1 -> x."""
    if isinstance(hamiltonian, EdgeRewards):
        return hamiltonian.b.values(cap), hamiltonian.c.values(cap)
    if isinstance(hamiltonian, SiteRewards):
        # each step is charged the reward of the site it lands on
        alpha = hamiltonian.alpha.values(cap + 1)
        return alpha[1:], alpha[:-1]
    raise TypeError(f"Unknown Hamiltonian: {hamiltonian!r}")


def _messages(start: int, up: np.ndarray, down: np.ndarray, steps: int,
              backward: bool) -> np.ndarray:
    """Row t holds the log partition sums of t-step paths pinned at ``start``."""
    out = np.full((steps + 1, len(up) + 1), -np.inf)
    out[0, start] = 0.0
    for t in range(1, steps + 1):
        prev, cur = out[t - 1], out[t]
        if backward:
            cur[:-1] = prev[1:] + up
            cur[1:] = np.logaddexp(cur[1:], prev[:-1] + down)
        else:
            cur[1:] = prev[:-1] + up
            cur[:-1] = np.logaddexp(cur[:-1], prev[1:] + down)
    return out


def _path_dtype(cap: int):
    return np.int16 if cap < np.iinfo(np.int16).max else np.int32


def _extend(paths: np.ndarray, log_w: np.ndarray, up: np.ndarray, down: np.ndarray,
            cap: int) -> Tuple[np.ndarray, np.ndarray]:
    last = paths[:, -1]
    rise = last < cap
    fall = last > 0
    up_paths = np.column_stack([paths[rise], last[rise] + 1])
    down_paths = np.column_stack([paths[fall], last[fall] - 1])
    new_w = np.concatenate([log_w[rise] + up[last[rise]], log_w[fall] + down[last[fall] - 1]])
    new_paths = np.vstack([up_paths, down_paths]).astype(paths.dtype)
    keep = np.isfinite(new_w)
    return new_paths[keep], new_w[keep]


class FiniteVolumeMeasure:
    """mu_{[i,j]}^H(w) through transfer-matrix messages.

    For sigma on [k, l] with i < k <= l < j,

        mu(sigma) = (Q^{k-i+1})(w_{i-1}, sigma_k)
                    * prod_t Q(sigma_t, sigma_{t+1})
                    * (Q^{j-l+1})(sigma_l, w_{j+1}) / (Q^{j-i+2})(w_{i-1}, w_{j+1})

    with every factor kept as a logarithm.

    Raises:
        EmptyEnsemble: If no admissible path joins the boundary heights
    """

    def __init__(self, hamiltonian: HamiltonianSpec, window: Window):
        if not window.is_nonempty:
            raise EmptyEnsemble(
                f"boundaries ({window.left_boundary}, {window.right_boundary}) "
                f"cannot be joined in {window.steps} steps"
            )
        self.hamiltonian = hamiltonian
        self.window = window
        self.cap = window.height_cap
        self._up, self._down = _step_log_weights(hamiltonian, self.cap)
        self._forward = _messages(window.left_boundary, self._up, self._down, window.steps, False)
        self._backward = _messages(window.right_boundary, self._up, self._down, window.steps, True)
        self.log_Z = float(self._forward[window.steps, window.right_boundary])
        if not math.isfinite(self.log_Z):
            raise EmptyEnsemble(f"log Z = {self.log_Z!r}")
        logger.debug(f"FiniteVolumeMeasure[{window.i}, {window.j}]: log Z = {self.log_Z!r}")

    def log_forward(self, t: int) -> np.ndarray:
        """Log partition sums over w_{i-1}..w_t, indexed by w_t."""
        return self._forward[t - (self.window.i - 1)]

    def log_backward(self, t: int) -> np.ndarray:
        """Log partition sums over w_t..w_{j+1}, indexed by w_t."""
        return self._backward[(self.window.j + 1) - t]

    def _check_block(self, k: int, l: int) -> None:
        if not self.window.i < k <= l < self.window.j:
            raise IndexOutOfWindow(k, l, self.window.i, self.window.j)

    def log_prob(self, sigma: TrajectoryBlock) -> float:
        k, l = sigma.start_index, sigma.end_index
        self._check_block(k, l)
        h = np.asarray(sigma.heights)
        if h.max() > self.cap:
            return -math.inf
        total = self.log_forward(k)[h[0]] + self.log_backward(l)[h[-1]]
        if len(h) > 1:
            lower = np.minimum(h[1:], h[:-1])
            steps = np.where(h[1:] > h[:-1], self._up[lower], self._down[lower])
            total += float(np.sum(steps))
        return float(total) - self.log_Z

    def prob(self, sigma: TrajectoryBlock) -> float:
        return math.exp(self.log_prob(sigma))

    def block_distribution(self, k: int, l: int) -> Dict[Tuple[int, ...], float]:
        """Every sigma on [k, l] with positive probability, in lexicographic order."""
        self._check_block(k, l)
        start = self.log_forward(k)
        heights = np.flatnonzero(np.isfinite(start)).astype(_path_dtype(self.cap))
        paths = heights[:, None]
        log_w = start[heights]
        for _ in range(l - k):
            paths, log_w = _extend(paths, log_w, self._up, self._down, self.cap)
        log_w = log_w + self.log_backward(l)[paths[:, -1]]
        keep = np.isfinite(log_w)
        paths, log_w = paths[keep], log_w[keep]
        order = np.lexsort(paths.T[::-1])
        probs = np.exp(log_w[order] - self.log_Z)
        return {tuple(int(h) for h in paths[n]): float(p) for n, p in zip(order, probs)}

    def site_marginal(self, t: int) -> np.ndarray:
        """P(w_t = x) for x = 0..cap."""
        self._check_block(t, t)
        return np.exp(self.log_forward(t) + self.log_backward(t) - self.log_Z)

    def parity_averaged_marginal(self, t: int) -> np.ndarray:
        """Mean of the site marginals at t and t+1.

        A single site only sees heights of one parity; the average of two
        neighbors is the quantity with a translation-invariant limit.
        """
        return 0.5 * (self.site_marginal(t) + self.site_marginal(t + 1))


def finite_volume_prob(hamiltonian: HamiltonianSpec, window: Window, sigma: TrajectoryBlock) -> float:
    """mu_{[i,j]}^H(w)(sigma).

    Raises:
        IndexOutOfWindow: Unless i < k <= l < j
        EmptyEnsemble: If the boundaries admit no path
    """
    return FiniteVolumeMeasure(hamiltonian, window).prob(sigma)


def _direct_hamiltonian(hamiltonian: HamiltonianSpec, full: np.ndarray, cap: int) -> np.ndarray:
    """H of each row of ``full`` (w_{i-1}..w_{j+1}) from its visit or edge counts."""
    if isinstance(hamiltonian, SiteRewards):
        alpha = hamiltonian.alpha.values(cap + 1)
        return alpha[full[:, 1:]].sum(axis=1)
    if isinstance(hamiltonian, EdgeRewards):
        b = hamiltonian.b.values(cap)
        c = hamiltonian.c.values(cap)
        here, there = full[:, :-1], full[:, 1:]
        return np.where(there > here, b[here], c[there]).sum(axis=1)
    raise TypeError(f"Unknown Hamiltonian: {hamiltonian!r}")


def _enumerate_branch(window: Window, first: int) -> np.ndarray:
    """All full paths w_{i-1}..w_{j+1} whose first interior height is ``first``."""
    dtype = _path_dtype(window.height_cap)
    target = window.right_boundary
    paths = np.array([[window.left_boundary, first]], dtype=dtype)
    for remaining in range(window.steps - 2, 0, -1):
        last = paths[:, -1].astype(np.int64)
        grown = np.vstack([
            np.column_stack([paths, last + 1]),
            np.column_stack([paths, last - 1]),
        ]).astype(dtype)
        tip = grown[:, -1].astype(np.int64)
        paths = grown[(tip >= 0) & (np.abs(tip - target) <= remaining)]
    return np.column_stack([paths, np.full(len(paths), target)]).astype(dtype)


def _enumerate_paths(window: Window) -> np.ndarray:
    left, target = window.left_boundary, window.right_boundary
    firsts = [x for x in (left - 1, left + 1) if x >= 0 and abs(x - target) <= window.steps - 1]
    workers = min(get_max_workers(), len(firsts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            branches = list(pool.map(lambda x: _enumerate_branch(window, x), firsts))
    else:
        branches = [_enumerate_branch(window, x) for x in firsts]
    dtype = _path_dtype(window.height_cap)
    if not branches:
        return np.zeros((0, window.steps + 1), dtype=dtype)
    return np.vstack(branches)


@dataclass(frozen=True, eq=False)
class EnumeratedMeasure:
    """Exhaustive distribution over interior paths w_i..w_j.

    Attributes:
        window: The window
        paths: One row per admissible interior path
        log_probs: Normalized log-probabilities of the rows
        log_Z: Log partition function
    """
    window: Window
    paths: np.ndarray
    log_probs: np.ndarray
    log_Z: float

    def _columns(self, k: int, l: int) -> slice:
        if not self.window.i <= k <= l <= self.window.j:
            raise IndexOutOfWindow(k, l, self.window.i, self.window.j)
        return slice(k - self.window.i, l - self.window.i + 1)

    def marginal(self, k: int, l: int) -> Dict[Tuple[int, ...], float]:
        """Distribution of w_k..w_l, in lexicographic order."""
        sub = self.paths[:, self._columns(k, l)]
        unique, inverse = np.unique(sub, axis=0, return_inverse=True)
        probs = np.bincount(inverse.ravel(), weights=np.exp(self.log_probs), minlength=len(unique))
        return {tuple(int(h) for h in row): float(p) for row, p in zip(unique, probs)}

    def prob(self, sigma: TrajectoryBlock) -> float:
        cols = self._columns(sigma.start_index, sigma.end_index)
        match = np.all(self.paths[:, cols] == np.asarray(sigma.heights), axis=1)
        return float(np.exp(self.log_probs[match]).sum())

    def distribution(self) -> Dict[Tuple[int, ...], float]:
        return self.marginal(self.window.i, self.window.j)


def enumerate_measure(hamiltonian: HamiltonianSpec, window: Window) -> EnumeratedMeasure:
    """Brute-force mu_{[i,j]}^H(w) by listing every admissible interior path.

    Raises:
        WindowTooLarge: If the window has more than 22 sites
        EmptyEnsemble: If the boundaries admit no path
    """
    if window.width > MAX_ENUMERATION_WIDTH:
        raise WindowTooLarge(window.width, MAX_ENUMERATION_WIDTH)
    if not window.is_nonempty:
        raise EmptyEnsemble(
            f"boundaries ({window.left_boundary}, {window.right_boundary}) "
            f"cannot be joined in {window.steps} steps"
        )
    full = _enumerate_paths(window)
    if not len(full):
        raise EmptyEnsemble("no admissible path")
    energies = _direct_hamiltonian(hamiltonian, full, window.height_cap)
    log_Z = float(logsumexp(energies))
    logger.debug(f"enumerate_measure[{window.i}, {window.j}]: {len(full)} paths")
    return EnumeratedMeasure(window, full[:, 1:-1], energies - log_Z, log_Z)


def check_site_edge_relation(alpha: RealSequence, b: RealSequence, c: RealSequence,
                             cap: int, tol: float = RELATION_TOLERANCE) -> float:
    """max_x |alpha_x + alpha_{x+1} - b_x - c_x| over x < cap.

    Raises:
        RelationViolated: At the first x where the residual exceeds tol
    """
    a = alpha.values(cap + 1)
    total = b.values(cap) + c.values(cap)
    residual = np.abs(a[:-1] + a[1:] - total)
    bad = np.flatnonzero(residual > tol * np.maximum(1.0, np.abs(total)))
    if bad.size:
        index = int(bad[0])
        raise RelationViolated(index, float(residual[index]))
    return float(residual.max()) if residual.size else 0.0


def verify_site_edge_equivalence(alpha: RealSequence, b: RealSequence, c: RealSequence,
                                 window: Window, k: int, l: int) -> float:
    """Largest |mu^{H^{b,c}}(sigma) - mu^{H^alpha}(sigma)| over sigma on [k, l].

    Raises:
        RelationViolated: If alpha_x + alpha_{x+1} != b_x + c_x at a reachable x
    """
    check_site_edge_relation(alpha, b, c, window.height_cap)
    site = FiniteVolumeMeasure(SiteRewards(alpha), window).block_distribution(k, l)
    edge = FiniteVolumeMeasure(EdgeRewards(b, c), window).block_distribution(k, l)
    diff = max(abs(site.get(key, 0.0) - edge.get(key, 0.0)) for key in set(site) | set(edge))
    logger.info(f"site/edge equivalence on [{k}, {l}]: max difference {diff!r}")
    return diff


@dataclass(frozen=True)
class HamiltonianOffsets:
    """Range of H^{b,c}(w) - H^alpha(w) over the admissible paths of a window."""
    minimum: float
    maximum: float
    expected: float
    paths: int

    @property
    def spread(self) -> float:
        return self.maximum - self.minimum

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return {
            'minimum': self.minimum,
            'maximum': self.maximum,
            'expected': self.expected,
            'spread': self.spread,
            'paths': self.paths,
        }


def hamiltonian_offsets(alpha: RealSequence, b: RealSequence, c: RealSequence,
                        window: Window) -> HamiltonianOffsets:
    """H^{b,c} - H^alpha on every path of the window.

    The offset depends on the boundary heights only: with
    d_x = b_x - alpha_{x+1} it equals sum_{x < right} d_x - sum_{x < left} d_x.
    """
    if window.width > MAX_ENUMERATION_WIDTH:
        raise WindowTooLarge(window.width, MAX_ENUMERATION_WIDTH)
    if not window.is_nonempty:
        raise EmptyEnsemble("no admissible path")
    cap = window.height_cap
    full = _enumerate_paths(window)
    offsets = (_direct_hamiltonian(EdgeRewards(b, c), full, cap)
               - _direct_hamiltonian(SiteRewards(alpha), full, cap))
    d = b.values(cap) - alpha.values(cap + 1)[1:]
    potential = np.concatenate([[0.0], np.cumsum(d)])
    expected = float(potential[window.right_boundary] - potential[window.left_boundary])
    return HamiltonianOffsets(float(offsets.min()), float(offsets.max()), expected, len(full))


def dump_distribution_csv(distribution: Mapping[Tuple[int, ...], float]) -> str:
    """CSV with columns heights (comma-joined) and probability, sorted by heights."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['heights', 'probability'])
    for heights in sorted(distribution):
        writer.writerow([",".join(str(h) for h in heights), repr(float(distribution[heights]))])
    return buffer.getvalue()
