#!/usr/bin/env python3
"""Health report for the bundled models.

Checks that every model file parses and validates, then records its s*
ladder head and verdict so regressions in the numerics show up as changed
reports. Can be run standalone: python scripts/verify_model_health.py

Exit codes:
    0 - All checks passed
    1 - A model failed validation or could not be classified
    2 - Critical errors (models directory missing)
"""

import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional

from rpositive.exceptions import RPositiveError
from rpositive.model_loader import ModelLoader
from rpositive.radius import Verdict, classify
from rpositive.report_schema import dumps, write_text_atomic

M_MAX = 8


def model_entry(loader: ModelLoader, name: str) -> Dict:
    path = loader.models_dir / f"{name}.json"
    ok, message = loader.verify_model_integrity(path)
    entry = {'checksum': loader.get_file_checksum(path), 'valid': ok, 'issue': message}
    if not ok:
        return entry
    try:
        model = loader.load_model(path)
        result = classify(model.matrix, M_MAX)
    except RPositiveError as e:
        entry['issue'] = f"{type(e).__name__}: {e}"
        return entry
    entry.update({
        'split': model.split,
        'hamiltonian_form': model.hamiltonian_form,
        'verdict': result.verdict.value,
        'gibbs_label': result.gibbs_label.value,
        'gap_index': result.gap_index,
        'xi': result.xi,
        's_star': [e.value for e in result.report.s_star[:3]] if result.report else [],
    })
    return entry


def generate_health_report(models_dir: Path) -> Dict:
    """Per-model integrity and classification summary."""
    loader = ModelLoader(models_dir=models_dir)
    names = loader.list_builtin_models()
    report = {
        'summary': {'total_models': len(names), 'valid_models': 0, 'undetermined': 0},
        'models': {},
        'recommendations': [],
    }
    if not names:
        report['recommendations'].append(f"CRITICAL: no model files in {models_dir}")
        return report

    for name in names:
        entry = model_entry(loader, name)
        report['models'][name] = entry
        if entry['valid'] and entry['issue'] is None:
            report['summary']['valid_models'] += 1
        else:
            report['recommendations'].append(f"Fix {name}.json: {entry['issue']}")
        if entry.get('verdict') == Verdict.UNDETERMINED.value:
            report['summary']['undetermined'] += 1

    if report['summary']['valid_models'] == len(names):
        report['recommendations'].append("All bundled models load and classify")
    return report


def has_issues(report: Dict) -> bool:
    summary = report['summary']
    return summary['total_models'] == 0 or summary['valid_models'] < summary['total_models']


def print_report(report: Dict, verbose: bool = False) -> None:
    """Print report to console."""
    print("=" * 70)
    print("rpositive Model Health Report")
    print("=" * 70)
    print()

    summary = report['summary']
    print("SUMMARY")
    print("-" * 70)
    print(f"Total models: {summary['total_models']}")
    print(f"Valid models: {summary['valid_models']}")
    print(f"Undetermined verdicts: {summary['undetermined']}")
    print()

    print("MODELS")
    print("-" * 70)
    for name, entry in report['models'].items():
        verdict = entry.get('verdict', 'INVALID')
        print(f"{name}: {verdict}")
        if verbose and entry.get('s_star'):
            ladder = ", ".join(f"{s:.12g}" for s in entry['s_star'])
            print(f"  s*: {ladder}  gap: {entry['gap_index']}  xi: {entry['xi']}")
            print(f"  md5: {entry['checksum']}")
    print()

    print("RECOMMENDATIONS")
    print("-" * 70)
    for rec in report['recommendations']:
        print(f"  - {rec}")
    print()


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    parser = argparse.ArgumentParser(description='Verify the bundled rpositive models')
    parser.add_argument('--output', type=str, help='Output report to JSON file')
    parser.add_argument('--verbose', action='store_true', help='Show detailed information')
    parser.add_argument('--models-dir', type=str,
                        help='Path to models directory (default: rpositive/data/models)')
    args = parser.parse_args(argv)

    if args.models_dir:
        models_dir = Path(args.models_dir)
    else:
        models_dir = Path(__file__).parent.parent / 'rpositive' / 'data' / 'models'

    if not models_dir.exists():
        print(f"ERROR: Models directory not found: {models_dir}", file=sys.stderr)
        return 2

    report = generate_health_report(models_dir)
    print_report(report, verbose=args.verbose)

    if args.output:
        write_text_atomic(args.output, dumps(report))
        print(f"Report saved to: {args.output}")

    return 1 if has_issues(report) else 0


if __name__ == '__main__':
    sys.exit(main())
