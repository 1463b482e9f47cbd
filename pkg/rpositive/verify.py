"""Property suite over the bundled models.

Each check computes one measured quantity, compares it with its bound and
records pass/fail. Random instances are drawn from a generator seeded by the
suite seed, so identical seeds give identical reports.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from .chain import (
    MomentVerdict,
    ReturnsTo,
    critical_chain,
    exp_moment,
    return_time_pmf,
    simulate,
    stationary_distribution,
    verify_excursion_identity,
    verify_scaling,
)
from .config import DEFAULT_DEPTH, DEFAULT_K_MAX, DEFAULT_SAMPLES, DEFAULT_SEED, DEFAULT_TOL
from .exceptions import RPositiveError
from .gibbs import (
    FiniteVolumeMeasure,
    Window,
    enumerate_measure,
    hamiltonian_offsets,
    verify_site_edge_equivalence,
)
from .model_loader import load_builtin_model
from .radius import (
    BaseChain,
    Verdict,
    classify,
    diagonal_power_series,
    extend_to_gap,
    gap_scan,
    s_star,
    truncated_radius_oracle,
)
from .seqmodel import (
    EdgeRewards,
    alpha_from_bc,
    make_real_sequence,
    make_sequence,
    matrix_from_product,
)

logger = logging.getLogger(__name__)

GIBBS_INSTANCES = 100
EQUIVALENCE_INSTANCES = 50
MAX_SUITE_WIDTH = 22


class SuiteProfile(NamedTuple):
    """Random-instance counts and the widest enumerated window."""
    gibbs_instances: int
    equivalence_instances: int
    max_width: int


FULL_PROFILE = SuiteProfile(GIBBS_INSTANCES, EQUIVALENCE_INSTANCES, MAX_SUITE_WIDTH)
QUICK_PROFILE = SuiteProfile(20, 10, 12)


@dataclass(frozen=True)
class CheckResult:
    """One invariant: measured value against its bound."""
    name: str
    passed: bool
    measured: Optional[float] = None
    bound: Optional[float] = None
    detail: str = ""

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return {
            'name': self.name,
            'passed': self.passed,
            'measured': self.measured,
            'bound': self.bound,
            'detail': self.detail,
        }


def _within(name: str, measured: float, expected: float, bound: float, detail: str = "") -> CheckResult:
    error = abs(measured - expected)
    return CheckResult(name, bool(error <= bound), float(error), bound,
                       detail or f"measured {measured!r}, expected {expected!r}")


@dataclass
class SuiteContext:
    seed: int
    samples: int
    tol: float
    depth: int
    k_max: int
    profile: SuiteProfile = FULL_PROFILE
    cache: Dict[str, object] = field(default_factory=dict)

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])

    def gap_chains(self):
        """Critical chains P^[0] and P^[1] of the gap model."""
        if 'gap_chains' not in self.cache:
            mat = load_builtin_model('gap').matrix
            self.cache['gap_chains'] = (critical_chain(mat, 0, self.tol, self.depth),
                                        critical_chain(mat, 1, self.tol, self.depth))
        return self.cache['gap_chains']


def check_radius(ctx: SuiteContext) -> List[CheckResult]:
    cases = [
        ('s_star_unit', 'unit', 0, 0.25),
        ('s_star_quarter', 'critical_quarter', 0, 1.0),
        ('s_star_gap_m0', 'gap', 0, 0.4375),
        ('s_star_gap_m1', 'gap', 1, 1.0),
    ]
    results = []
    for name, model, m, expected in cases:
        a = load_builtin_model(model).product_sequence
        results.append(_within(name, s_star(a, m, ctx.tol, ctx.depth).value, expected, 1e-9))
    return results


def check_oracles(ctx: SuiteContext) -> List[CheckResult]:
    mat = load_builtin_model('unit').matrix
    perron = truncated_radius_oracle(mat, 4000, ctx.tol)
    roots = diagonal_power_series(mat, 500)
    monotone = bool(np.all(np.diff(roots) >= -1e-15))
    relative = abs(roots[-1] - 2.0) / 2.0
    return [
        _within('perron_oracle_unit', perron, 2.0, 1e-3),
        CheckResult('diagonal_series_unit', bool(relative <= 0.02 and monotone), float(relative), 0.02,
                    f"final value {roots[-1]!r}, monotone={monotone}"),
    ]


def check_gap_lemma(ctx: SuiteContext) -> List[CheckResult]:
    report = gap_scan(load_builtin_model('gap').product_sequence, 4, ctx.tol, ctx.depth)
    lemma = report.lemma
    if lemma is None:
        return [CheckResult('gap_lemma', False, detail="no gap found")]
    return [
        _within('gap_lemma_h_at_critical', lemma.h_at_critical, 1.0, 1e-8),
        CheckResult('gap_lemma_exceeds_at_next', lemma.next_exceeds_one,
                    _finite(lemma.max_truncation_at_next), 1.0, "a truncation at s*^[1] passes 1"),
        _within('gap_xi', report.xi, 0.4375, 1e-9),
    ]


def check_excursions(ctx: SuiteContext) -> List[CheckResult]:
    chain0, chain1 = ctx.gap_chains()
    residual = verify_excursion_identity(chain0, chain1, 1000, ctx.tol)
    pmf0 = return_time_pmf(chain0, 1, 40)
    pmf1 = return_time_pmf(chain1, 1, 40)
    xi = chain0.s / chain1.s
    scaling = verify_scaling(pmf0, pmf1, xi, range(2, 41))
    boundary = verify_scaling(pmf0, pmf1, xi, [1])[1]
    exact = abs(pmf0.prob(2) - 49 / 4096) / (49 / 4096)
    return [
        CheckResult('excursion_identity', residual <= 1e-12, residual, 1e-12),
        CheckResult('return_pmf_tau4', exact <= 1e-14, exact, 1e-14, "P(tau_1 = 4) = 49/4096"),
        CheckResult('xi_scaling', max(scaling.values()) <= 1e-12, max(scaling.values()), 1e-12, "k = 2..40"),
        CheckResult('xi_scaling_boundary', boundary <= 1e-14, boundary, 1e-14, "k = 1"),
    ]


def check_moments(ctx: SuiteContext) -> List[CheckResult]:
    chain0, _ = ctx.gap_chains()
    pmf = return_time_pmf(chain0, 1, ctx.k_max)
    finite = exp_moment(pmf, 1.2, xi=0.4375)
    diverging = exp_moment(pmf, 1.6, xi=0.4375)
    rate = finite.tail_rate if finite.tail_rate is not None else math.nan
    theta = finite.critical_theta if finite.critical_theta is not None else math.nan
    expected_theta = math.sqrt(16 / 7)
    return [
        _within('tail_rate', rate, 0.4375, 0.02 * 0.4375),
        CheckResult('moment_finite_1.2', finite.verdict is MomentVerdict.FINITE, None, None,
                    finite.verdict.value),
        CheckResult('moment_diverges_1.6', diverging.verdict is MomentVerdict.DIVERGES, None, None,
                    diverging.verdict.value),
        _within('critical_theta', theta, expected_theta, 0.03 * expected_theta),
    ]


def check_recurrence(ctx: SuiteContext) -> List[CheckResult]:
    chain0, _ = ctx.gap_chains()
    pi = stationary_distribution(chain0, ctx.tol)
    mean = return_time_pmf(chain0, 0, ctx.k_max).truncated_mean()
    sim = simulate(chain0, 0, ReturnsTo(0, ctx.samples, 10_000), ctx.seed)
    sigma = sim.mean_standard_error or math.inf
    mc_error = abs((sim.mean_return_time or math.inf) - 7 / 3)
    return [
        _within('stationary_pi0', pi.pi(0), 3 / 7, 1e-9),
        _within('mean_return_time_dp', mean, 7 / 3, 1e-6),
        CheckResult('mean_return_time_mc', mc_error <= 3 * sigma, mc_error, 3 * sigma,
                    f"{sim.samples} returns, seed {ctx.seed}"),
    ]


def check_classification(ctx: SuiteContext) -> List[CheckResult]:
    quarter = classify(load_builtin_model('critical_quarter').matrix, 8, ctx.tol, ctx.depth)
    h = quarter.h_at_critical.value if quarter.h_at_critical else math.nan
    gap = classify(load_builtin_model('gap').matrix, 8, ctx.tol, ctx.depth)
    levels_below_one = quarter.shifted_chains is BaseChain.TRANSIENT
    # period two: R^{2N} q^{(2N)}_{0,0} -> 2 pi_0 = 6/7
    gap_term = float(gap.recurrence.terms[-1]) if gap.recurrence else math.nan
    quarter_sum = float(quarter.recurrence.partial_sums[-1]) if quarter.recurrence else math.nan
    return [
        CheckResult('classify_quarter', quarter.verdict is Verdict.TAIL_R_TRANSIENT, None, None,
                    quarter.verdict.value),
        _within('quarter_h_at_critical', h, 0.5, 1e-9),
        CheckResult('quarter_shifted_chains_transient', levels_below_one, None, None,
                    f"h levels {[round(level.value, 12) for _, level in quarter.h_levels]}"),
        CheckResult('quarter_r_transient_series', quarter_sum < 2.0, quarter_sum, 2.0),
        CheckResult('classify_gap', gap.verdict is Verdict.R_POSITIVE, None, None, gap.verdict.value),
        _within('gap_r_recurrent_term', gap_term, 6 / 7, 1e-6),
    ]


def check_extension(ctx: SuiteContext) -> List[CheckResult]:
    a = make_sequence([], 0.25)
    extended = extend_to_gap(a, 0.8, ctx.tol, ctx.depth)
    verdict = classify(matrix_from_product(extended), 8, ctx.tol, ctx.depth).verdict
    return [
        _within('extension_head', extended.value_at(0), (1 - (1 - math.sqrt(0.2)) / 2) / 0.8, 1e-6),
        _within('extension_s_star', s_star(extended, 0, ctx.tol, ctx.depth).value, 0.8, 1e-9),
        CheckResult('extension_classified', verdict is Verdict.R_POSITIVE, None, None, verdict.value),
    ]


def random_window(rng: np.random.Generator, max_width: int) -> Window:
    """Window [0, w-1] with w >= 3 and boundaries joined by some path."""
    width = int(rng.integers(3, max_width + 1))
    steps = width + 1
    left = int(rng.integers(0, 4))
    offsets = [d for d in range(-steps, steps + 1, 2) if left + d >= 0]
    right = left + int(rng.choice(offsets))
    return Window(0, width - 1, left, right)


def random_rewards(rng: np.random.Generator, window: Window):
    cap = window.height_cap
    b = make_real_sequence(rng.uniform(-1.0, 1.0, cap))
    c = make_real_sequence(rng.uniform(-1.0, 1.0, cap))
    return b, c


def random_block(rng: np.random.Generator, window: Window) -> Tuple[int, int]:
    k = int(rng.integers(window.i + 1, window.j))
    l = int(rng.integers(k, window.j))
    return k, l


def check_gibbs(ctx: SuiteContext) -> List[CheckResult]:
    rng = ctx.rng(1)
    worst, worst_norm = 0.0, 0.0
    profile = ctx.profile
    for _ in range(profile.gibbs_instances):
        window = random_window(rng, profile.max_width)
        b, c = random_rewards(rng, window)
        k, l = random_block(rng, window)
        hamiltonian = EdgeRewards(b, c)
        transfer = FiniteVolumeMeasure(hamiltonian, window).block_distribution(k, l)
        brute = enumerate_measure(hamiltonian, window).marginal(k, l)
        keys = set(transfer) | set(brute)
        worst = max(worst, max(abs(transfer.get(s, 0.0) - brute.get(s, 0.0)) for s in keys))
        worst_norm = max(worst_norm, abs(math.fsum(transfer.values()) - 1.0))

    rng = ctx.rng(2)
    worst_equiv, worst_spread = 0.0, 0.0
    for _ in range(profile.equivalence_instances):
        window = random_window(rng, profile.max_width)
        b, c = random_rewards(rng, window)
        alpha = alpha_from_bc(b, c, float(rng.uniform(-1.0, 1.0)), window.height_cap)
        k, l = random_block(rng, window)
        worst_equiv = max(worst_equiv, verify_site_edge_equivalence(alpha, b, c, window, k, l))
        worst_spread = max(worst_spread, hamiltonian_offsets(alpha, b, c, window).spread)

    return [
        CheckResult('gibbs_transfer_vs_enumeration', worst <= 1e-12, worst, 1e-12,
                    f"{profile.gibbs_instances} random windows up to width {profile.max_width}"),
        CheckResult('gibbs_normalization', worst_norm <= 1e-10, worst_norm, 1e-10),
        CheckResult('gibbs_site_edge_equivalence', worst_equiv <= 1e-12, worst_equiv, 1e-12,
                    f"{profile.equivalence_instances} random (b, c, alpha_0)"),
        CheckResult('gibbs_constant_offset', worst_spread <= 1e-9, worst_spread, 1e-9),
    ]


def check_gibbs_limit(ctx: SuiteContext) -> List[CheckResult]:
    model = load_builtin_model('edge_rewards')
    measure = FiniteVolumeMeasure(model.hamiltonian, Window(-200, 200, 0, 0))
    marginal = measure.parity_averaged_marginal(0)
    pi = stationary_distribution(critical_chain(model.matrix, 0, ctx.tol, ctx.depth), ctx.tol)
    n = 40
    diff = float(np.max(np.abs(marginal[:n] - pi.probabilities(n))))
    return [CheckResult('gibbs_center_marginal', diff <= 1e-3, diff, 1e-3,
                        "sites 0 and 1 of window [-200, 200] against the stationary law")]


def _finite(value: float) -> Optional[float]:
    return float(value) if value is not None and math.isfinite(value) else None


CHECKS: Tuple[Tuple[str, Callable[[SuiteContext], List[CheckResult]]], ...] = (
    ('radius', check_radius),
    ('oracles', check_oracles),
    ('gap_lemma', check_gap_lemma),
    ('excursions', check_excursions),
    ('moments', check_moments),
    ('recurrence', check_recurrence),
    ('classification', check_classification),
    ('extension', check_extension),
    ('gibbs', check_gibbs),
    ('gibbs_limit', check_gibbs_limit),
)


@dataclass(frozen=True)
class SuiteReport:
    """All check results of one suite run."""
    seed: int
    samples: int
    checks: Tuple[CheckResult, ...]
    profile: SuiteProfile = FULL_PROFILE

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return {
            'seed': self.seed,
            'samples': self.samples,
            'profile': self.profile._asdict(),
            'passed': self.passed,
            'total': len(self.checks),
            'failures': self.failures,
            'checks': [check.to_dict() for check in self.checks],
        }


def run_property_suite(seed: int = DEFAULT_SEED, samples: int = DEFAULT_SAMPLES, tol: float = DEFAULT_TOL,
                       depth: int = DEFAULT_DEPTH, k_max: int = DEFAULT_K_MAX,
                       only: Optional[List[str]] = None,
                       profile: SuiteProfile = FULL_PROFILE) -> SuiteReport:
    """Run the checks (all, or the groups named in ``only``).

    The full profile enumerates 100 random windows up to width 22 and 50
    site/edge pairs; QUICK_PROFILE is a smaller smoke run. A group that
    raises is recorded as one failed check carrying the error.
    """
    ctx = SuiteContext(seed=seed, samples=samples, tol=tol, depth=depth, k_max=k_max, profile=profile)
    results: List[CheckResult] = []
    for group, check in CHECKS:
        if only is not None and group not in only:
            continue
        try:
            results.extend(check(ctx))
        except RPositiveError as exc:
            logger.warning(f"Check group {group} failed: {exc}")
            results.append(CheckResult(group, False, detail=f"{type(exc).__name__}: {exc}"))
    report = SuiteReport(seed, samples, tuple(results), profile)
    if report.passed:
        logger.info(f"Property suite passed ({len(results)} checks)")
    else:
        logger.warning(f"Property suite failures: {', '.join(report.failures)}")
    return report
