"""Command-line front end.

    rpositive analyze --model builtin:gap --out report.json
    rpositive chain --model path/to/model.json --k-max 400 --seed 7 --out chain.json
    rpositive verify --seed 0 --out verify.json

Exit codes: 0 success, 2 undetermined verdict, 3 validation error,
4 numeric failure. Error reports go to standard error (and to --out).
"""

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .chain import (
    DEFAULT_THETA_GRID,
    ReturnsTo,
    critical_chain,
    escape_probability,
    exp_moment,
    return_time_pmf,
    simulate,
    stationary_distribution,
    verify_excursion_identity,
    verify_scaling,
)
from .config import COMMANDS, MAX_ENUMERATION_WIDTH, RunConfig
from .exceptions import ModelValidationError, NotPositiveRecurrent, RPositiveError
from .gibbs import (
    FiniteVolumeMeasure,
    Window,
    dump_distribution_csv,
    enumerate_measure,
    finite_volume_prob,
    hamiltonian_offsets,
    make_block,
    verify_site_edge_equivalence,
)
from .model_loader import Model, get_model_loader
from .radius import Verdict, classify, diagonal_power_series, gap_scan, oracle_table
from .report_schema import (
    ExitCode,
    build_error_report,
    build_report,
    format_csv,
    side_file,
    write_json_atomic,
    write_text_atomic,
)
from .seqmodel import HamiltonianSpec, RealSequence, SiteRewards, alpha_from_bc, edge_rewards_from_sites
from .verify import FULL_PROFILE, QUICK_PROFILE, run_property_suite

logger = logging.getLogger(__name__)

ORACLE_SIZES = (100, 1000, 4000)
DIAGONAL_STEPS = 500
SCALING_K = 40
DEFAULT_WINDOW = (-5, 5)
DEFAULT_BOUNDARY = (0, 0)
DEFAULT_BLOCK = (0, 0)
RETURN_CAP = 10_000


class Outcome:
    """Payload, exit code and side files of one command."""

    def __init__(self, payload: dict, exit_code: ExitCode = ExitCode.SUCCESS):
        self.payload = payload
        self.exit_code = exit_code
        self.side_files: List[Tuple[str, str, str]] = []

    def attach_csv(self, suffix: str, text: str) -> None:
        self.side_files.append((suffix, ".csv", text))

    def attach_json(self, suffix: str, text: str) -> None:
        self.side_files.append((suffix, ".json", text))


def _analyze(config: RunConfig, model: Model) -> Outcome:
    result = classify(model.matrix, config.m_max, config.tol, config.depth)
    payload = {'model': model.to_dict(), 'classification': result.to_dict()}
    exit_code = ExitCode.UNDETERMINED if result.verdict is Verdict.UNDETERMINED else ExitCode.SUCCESS
    logger.info(f"analyze: {model.name} -> {result.verdict.value}")
    return Outcome(payload, exit_code)


def _radius(config: RunConfig, model: Model) -> Outcome:
    a = model.product_sequence
    report = gap_scan(a, config.m_max, config.tol, config.depth)
    s0 = report.s_star[0].value
    predicted = 1.0 / math.sqrt(s0)
    sizes = [L for L in ORACLE_SIZES if a.covers(L)]
    if not sizes and a.domain_length and a.domain_length >= 2:
        sizes = [a.domain_length]
    oracle = [
        {'L': L, 'lambda': lam, 'predicted': predicted, 'relative_error': abs(lam - predicted) / predicted}
        for L, lam in oracle_table(model.matrix, sizes, config.tol)
    ]
    roots = diagonal_power_series(model.matrix, DIAGONAL_STEPS)
    payload = {
        'model': model.to_dict(),
        'ladder': report.to_dict(),
        'oracle': oracle,
        'diagonal_series': {
            'N': DIAGONAL_STEPS,
            'final': float(roots[-1]),
            'predicted': predicted,
            'monotone': bool(np.all(np.diff(roots) >= -1e-15)),
        },
    }
    return Outcome(payload)


def _chain(config: RunConfig, model: Model) -> Outcome:
    a = model.product_sequence
    report = gap_scan(a, config.m_max, config.tol, config.depth)
    m = report.gap_index if report.gap_index is not None else 0
    chain_m = critical_chain(model.matrix, m, config.tol, config.depth)
    x = m + 1
    pmf = return_time_pmf(chain_m, x, config.k_max)
    payload: Dict[str, object] = {
        'model': model.to_dict(),
        'base': m,
        'state': x,
        's': chain_m.s,
        'xi': report.xi,
        'pmf': {
            'mass_accounted': pmf.mass_accounted,
            'boundary_return': pmf.boundary_return,
            'log_space': pmf.log_space,
            'truncated_mean': pmf.truncated_mean(),
        },
        'moments': [exp_moment(pmf, theta, report.xi).to_dict() for theta in DEFAULT_THETA_GRID],
        'escape_probability': escape_probability(chain_m).to_dict(),
    }

    if report.gap_index is not None:
        chain_m1 = critical_chain(model.matrix, m + 1, config.tol, config.depth)
        pmf_m1 = return_time_pmf(chain_m1, x, config.k_max)
        ks = range(1, min(SCALING_K, config.k_max) + 1)
        residuals = verify_scaling(pmf, pmf_m1, report.xi, ks)
        payload['scaling_residuals'] = [{'k': k, 'residual': residuals[k]} for k in ks]
        payload['excursion_residual'] = verify_excursion_identity(chain_m, chain_m1, 1000, config.tol)
    else:
        payload['scaling_residuals'] = None
        payload['excursion_residual'] = None

    sim = None
    try:
        stationary = stationary_distribution(chain_m, config.tol)
        payload['stationary'] = stationary.to_dict()
        sim = simulate(chain_m, m, ReturnsTo(m, config.samples, RETURN_CAP), config.seed)
        payload['simulation'] = sim.to_dict()
        payload['simulation']['expected_mean'] = stationary.mean_return_time(m)
    except NotPositiveRecurrent as exc:
        logger.warning(f"chain: {exc}")
        payload['stationary'] = None
        payload['simulation'] = None

    outcome = Outcome(payload)
    rows = pmf.to_rows()
    outcome.attach_csv('pmf', format_csv(['k', 'p', 'cumulative'], rows))
    if sim is not None:
        # returns to the base m take 2k steps, k = 1..k_max
        outcome.attach_csv('simulation', sim.to_csv(config.k_max))
        outcome.attach_json('simulation', sim.to_json(indent=2))
    return outcome


def _reward_forms(hamiltonian: HamiltonianSpec, cap: int) -> Tuple[RealSequence, RealSequence, RealSequence]:
    """(alpha, b, c) describing the same Gibbs measure as ``hamiltonian``."""
    if isinstance(hamiltonian, SiteRewards):
        edges = edge_rewards_from_sites(hamiltonian.alpha)
        return hamiltonian.alpha, edges.b, edges.c
    return alpha_from_bc(hamiltonian.b, hamiltonian.c, 0.0, cap), hamiltonian.b, hamiltonian.c


def _gibbs(config: RunConfig, model: Model) -> Outcome:
    i, j = config.window or DEFAULT_WINDOW
    left, right = config.boundary or DEFAULT_BOUNDARY
    k, l = config.block or DEFAULT_BLOCK
    window = Window(i, j, left, right)
    hamiltonian = model.hamiltonian
    measure = FiniteVolumeMeasure(hamiltonian, window)
    distribution = measure.block_distribution(k, l)
    normalization = abs(math.fsum(distribution.values()) - 1.0)

    modal = max(sorted(distribution), key=distribution.get)
    modal_prob = finite_volume_prob(hamiltonian, window, make_block(modal, k))

    alpha, b, c = _reward_forms(hamiltonian, window.height_cap)
    equivalence = verify_site_edge_equivalence(alpha, b, c, window, k, l)

    payload: Dict[str, object] = {
        'model': model.to_dict(),
        'window': window.to_dict(),
        'block': [k, l],
        'log_Z': measure.log_Z,
        'support': len(distribution),
        'normalization_error': normalization,
        'modal_block': {'heights': list(modal), 'probability': modal_prob},
        'site_edge_max_difference': equivalence,
    }
    if window.width <= MAX_ENUMERATION_WIDTH:
        brute = enumerate_measure(hamiltonian, window).marginal(k, l)
        keys = set(distribution) | set(brute)
        payload['enumeration_max_difference'] = max(
            abs(distribution.get(key, 0.0) - brute.get(key, 0.0)) for key in keys
        )
        payload['hamiltonian_offsets'] = hamiltonian_offsets(alpha, b, c, window).to_dict()
    else:
        payload['enumeration_max_difference'] = None
        payload['hamiltonian_offsets'] = None

    outcome = Outcome(payload)
    outcome.attach_csv('distribution', dump_distribution_csv(distribution))
    return outcome


def _verify(config: RunConfig, model: Optional[Model]) -> Outcome:
    profile = QUICK_PROFILE if config.quick else FULL_PROFILE
    report = run_property_suite(seed=config.seed, samples=config.samples, tol=config.tol,
                                depth=config.depth, k_max=config.k_max, profile=profile)
    return Outcome(report.to_dict(), ExitCode.SUCCESS if report.passed else ExitCode.NUMERIC)


HANDLERS = {
    'analyze': _analyze,
    'radius': _radius,
    'chain': _chain,
    'gibbs': _gibbs,
    'verify': _verify,
}


def _model_bytes(ref: Optional[str]) -> bytes:
    if ref is None:
        return b""
    loader = get_model_loader()
    return loader.read_bytes(loader.model_path(ref))


def run(config: RunConfig) -> int:
    """Execute one command and write its report.

    Returns:
        Process exit code
    """
    config_hash = ""
    try:
        config_hash = config.config_hash(_model_bytes(config.model_path))
        model = None
        if config.command != 'verify':
            if config.model_path is None:
                raise ModelValidationError("config", f"--model is required for {config.command}")
            model = get_model_loader().resolve_model(config.model_path)
        outcome = HANDLERS[config.command](config, model)
    except (RPositiveError, ValueError) as exc:
        report = build_error_report(exc, config.command, __version__, config_hash)
        logger.debug(f"{config.command} failed", exc_info=True)
        sys.stderr.write(report.to_json())
        if config.output_path:
            write_json_atomic(config.output_path, report)
        return report.exit_code

    report = build_report(config.command, outcome.payload, __version__, config_hash)
    if config.output_path:
        write_json_atomic(config.output_path, report)
        for suffix, extension, text in outcome.side_files:
            write_text_atomic(side_file(config.output_path, suffix, extension), text)
    else:
        sys.stdout.write(report.to_json())
    return int(outcome.exit_code)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--model', dest='model_path', help="model file or builtin:<name>")
    common.add_argument('--tol', type=float)
    common.add_argument('--m-max', dest='m_max', type=int)
    common.add_argument('--depth', type=int)
    common.add_argument('--k-max', dest='k_max', type=int)
    common.add_argument('--seed', type=int)
    common.add_argument('--samples', type=int, help="Monte Carlo returns")
    common.add_argument('--out', dest='output_path', help="report path; CSV side files go next to it")
    common.add_argument('--config', dest='config_file', help="JSON file with RunConfig fields")
    common.add_argument('--window', nargs=2, type=int, metavar=('I', 'J'))
    common.add_argument('--boundary', nargs=2, type=int, metavar=('L', 'R'))
    common.add_argument('--block', nargs=2, type=int, metavar=('K', 'L'))
    common.add_argument('--quick', action='store_true', default=None,
                        help="verify: 20 Gibbs windows up to width 12 instead of 100 up to 22")
    common.add_argument('-v', '--verbose', action='store_true', default=None)

    parser = argparse.ArgumentParser(prog='rpositive',
                                     description="R-positivity of nearest-neighbor matrices")
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest='command', required=True)
    for command in COMMANDS:
        sub.add_parser(command, parents=[common])
    return parser


OVERRIDABLE = ('model_path', 'tol', 'm_max', 'depth', 'k_max', 'seed', 'samples',
               'output_path', 'window', 'boundary', 'block', 'quick', 'verbose')


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """RunConfig from a --config file overlaid with explicit flags.

    Raises:
        ModelValidationError: If the config file is unreadable or has unknown keys
    """
    data: dict = {}
    if args.config_file:
        path = Path(args.config_file)
        try:
            data = json.loads(path.read_text(encoding='utf-8'))
        except (OSError, json.JSONDecodeError) as e:
            raise ModelValidationError(path.name, f"cannot read config: {e}") from e
        if not isinstance(data, dict):
            raise ModelValidationError(path.name, "config must be a JSON object")
        data = dict(data)
    data['command'] = args.command
    for name in OVERRIDABLE:
        value = getattr(args, name)
        if value is not None:
            data[name] = tuple(value) if isinstance(value, list) else value
    for name in ('window', 'boundary', 'block'):
        if isinstance(data.get(name), list):
            data[name] = tuple(data[name])
    return RunConfig.from_mapping(data)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = config_from_args(args)
    except RPositiveError as exc:
        report = build_error_report(exc, args.command, __version__)
        sys.stderr.write(report.to_json())
        return report.exit_code
    return run(config)


if __name__ == '__main__':
    sys.exit(main())
