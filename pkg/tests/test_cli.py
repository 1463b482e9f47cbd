"""Tests for the command-line front end."""

import json

import pytest

from rpositive import __version__
from rpositive.cli import build_parser, config_from_args, main
from rpositive.exceptions import ModelValidationError
from rpositive.report_schema import validate_report

FAST = ['--depth', '20000', '--m-max', '8']


def run_cli(args, tmp_path, name="report.json"):
    out = tmp_path / name
    code = main(list(args) + ['--out', str(out)])
    return code, json.loads(out.read_text(encoding='utf-8'))


class TestParser:
    """Test argument parsing and config assembly."""

    def test_defaults(self):
        """Test that unset flags fall back to RunConfig defaults."""
        args = build_parser().parse_args(['analyze', '--model', 'builtin:gap'])
        config = config_from_args(args)
        assert config.command == 'analyze'
        assert config.model_path == 'builtin:gap'
        assert config.tol == 1e-12
        assert config.window is None
        assert config.samples == 1_000_000
        assert config.quick is False

    def test_quick_flag(self):
        """Test that --quick selects the small verify profile."""
        config = config_from_args(build_parser().parse_args(['verify', '--quick']))
        assert config.quick is True

    def test_pairs_become_tuples(self):
        """Test that --window style flags become integer pairs."""
        args = build_parser().parse_args(['gibbs', '--model', 'builtin:gap', '--window', '-3', '3',
                                          '--boundary', '1', '1'])
        config = config_from_args(args)
        assert config.window == (-3, 3)
        assert config.boundary == (1, 1)

    def test_config_file_overlaid(self, tmp_path):
        """Test that explicit flags win over the config file."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({'seed': 5, 'k_max': 50, 'window': [-2, 2]}), encoding='utf-8')
        args = build_parser().parse_args(['chain', '--config', str(path), '--seed', '9'])
        config = config_from_args(args)
        assert config.seed == 9
        assert config.k_max == 50
        assert config.window == (-2, 2)

    def test_unknown_config_key(self, tmp_path):
        """Test that unknown config keys are rejected."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({'colour': 'blue'}), encoding='utf-8')
        args = build_parser().parse_args(['verify', '--config', str(path)])
        with pytest.raises(ModelValidationError):
            config_from_args(args)

    def test_version(self, capsys):
        """Test the --version flag."""
        with pytest.raises(SystemExit) as excinfo:
            main(['--version'])
        assert excinfo.value.code == 0
        assert __version__ in capsys.readouterr().out


class TestAnalyze:
    """Test the analyze command."""

    def test_gap_model(self, tmp_path):
        """Test that the gap model is R-positive."""
        code, report = run_cli(['analyze', '--model', 'builtin:gap'] + FAST, tmp_path)
        assert code == 0
        assert validate_report(report) == (True, None)
        classification = report['payload']['classification']
        assert classification['verdict'] == "RPositive"
        assert classification['gibbs_label'] == "UniqueTIGibbsState"
        assert classification['gap_index'] == 0
        assert classification['xi'] == pytest.approx(0.4375, abs=1e-12)

    def test_critical_quarter(self, tmp_path):
        """Test that a flat 1/4 tail is R-transient."""
        code, report = run_cli(['analyze', '--model', 'builtin:critical_quarter'] + FAST, tmp_path)
        assert code == 0
        classification = report['payload']['classification']
        assert classification['verdict'] == "TailRTransient"
        assert classification['h_at_critical'] == pytest.approx(0.5, abs=1e-9)
        assert classification['h_levels'] == [{'x': 1, 'h': pytest.approx(0.5, abs=1e-9)}]
        assert classification['shifted_chains'] == "transient"
        assert classification['r_recurrence']['diverges'] is False

    def test_prefix_only_is_undetermined(self, tmp_path):
        """Test exit code 2 for a model without a tail."""
        code, report = run_cli(['analyze', '--model', 'builtin:prefix_only'] + FAST, tmp_path)
        assert code == 2
        assert report['success'] is True
        assert report['payload']['classification']['verdict'] == "Undetermined"

    def test_stdout_without_out(self, capsys):
        """Test that the report goes to stdout when --out is absent."""
        code = main(['analyze', '--model', 'builtin:unit'] + FAST)
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report['command'] == 'analyze'
        assert report['metadata']['tool_version'] == __version__
        assert len(report['metadata']['config_hash']) == 64


class TestErrors:
    """Test error reports and exit codes."""

    def test_malformed_model(self, tmp_path, capsys):
        """Test exit code 3 and an error report on stderr."""
        path = tmp_path / "bad.json"
        path.write_text('{"matrix": {"a": {"prefix": [0.0], "tail": 1.0}}}', encoding='utf-8')
        code = main(['analyze', '--model', str(path)])
        assert code == 3
        report = json.loads(capsys.readouterr().err)
        assert report['success'] is False
        assert report['error_code'] == "VALIDATION_ERROR"
        assert validate_report(report) == (True, None)

    def test_error_report_also_written_to_out(self, tmp_path, capsys):
        """Test that --out receives the error report too."""
        code, report = run_cli(['analyze', '--model', str(tmp_path / "missing.json")], tmp_path)
        assert code == 3
        assert report['exit_code'] == 3
        assert capsys.readouterr().err

    def test_missing_model_flag(self, tmp_path):
        """Test that model-based commands need --model."""
        code, report = run_cli(['radius'], tmp_path)
        assert code == 3
        assert "--model" in report['message']

    def test_unknown_config_key(self, tmp_path, capsys):
        """Test exit code 3 for a bad config file."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({'unknown': 1}), encoding='utf-8')
        assert main(['analyze', '--config', str(path)]) == 3
        assert "unknown keys" in json.loads(capsys.readouterr().err)['message']

    def test_invalid_value(self, capsys):
        """Test that a non-positive tolerance is a validation error."""
        assert main(['analyze', '--model', 'builtin:gap', '--tol', '0']) == 3


class TestRadius:
    """Test the radius command."""

    def test_gap_ladder(self, tmp_path):
        """Test the s* ladder and the oracle table of the gap model."""
        code, report = run_cli(['radius', '--model', 'builtin:gap'] + FAST, tmp_path)
        assert code == 0
        payload = report['payload']
        ladder = payload['ladder']
        assert ladder['s_star'][0]['value'] == 0.4375
        assert ladder['s_star'][1]['value'] == pytest.approx(1.0)
        assert ladder['gaps'][0] == 0
        for row in payload['oracle']:
            assert row['relative_error'] < 0.01
        assert payload['diagonal_series']['monotone'] is True


class TestChain:
    """Test the chain command."""

    def test_gap_chain(self, tmp_path):
        """Test the return-time report and its CSV side file."""
        code, report = run_cli(['chain', '--model', 'builtin:gap', '--k-max', '60',
                                '--samples', '500', '--seed', '3'] + FAST, tmp_path)
        assert code == 0
        payload = report['payload']
        assert payload['base'] == 0
        assert payload['state'] == 1
        assert payload['stationary'] is not None
        assert payload['simulation']['samples'] == 500
        assert payload['excursion_residual'] <= 1e-12
        assert max(row['residual'] for row in payload['scaling_residuals']) <= 1e-10

        csv_path = tmp_path / "report_pmf.csv"
        lines = csv_path.read_text(encoding='utf-8').splitlines()
        assert lines[0] == "k,p,cumulative"
        assert len(lines) == 61
        k, p, _ = lines[2].split(",")
        assert k == "2"
        assert float(p) == pytest.approx(63 / 64, rel=1e-12)

        sim_lines = (tmp_path / "report_simulation.csv").read_text(encoding='utf-8').splitlines()
        assert sim_lines[0] == "k,p,cumulative"
        assert len(sim_lines) == 61
        assert float(sim_lines[-1].split(",")[2]) <= 1.0
        sim = json.loads((tmp_path / "report_simulation.json").read_text(encoding='utf-8'))
        assert sim['samples'] == 500
        assert sim['seed'] == 3
        assert sim['target'] == 0
        assert sim['returned'] + sim['censored'] == 500

    def test_recurrent_without_gap(self, tmp_path):
        """Test that a null-recurrent chain reports no stationary law."""
        code, report = run_cli(['chain', '--model', 'builtin:critical_quarter', '--k-max', '40',
                                '--samples', '100'] + FAST, tmp_path)
        assert code == 0
        payload = report['payload']
        assert payload['stationary'] is None
        assert payload['simulation'] is None
        assert payload['scaling_residuals'] is None
        assert not (tmp_path / "report_simulation.csv").exists()
        assert not (tmp_path / "report_simulation.json").exists()


class TestGibbs:
    """Test the gibbs command."""

    def test_default_window(self, tmp_path):
        """Test the transfer-matrix marginal against enumeration."""
        code, report = run_cli(['gibbs', '--model', 'builtin:edge_rewards'], tmp_path)
        assert code == 0
        payload = report['payload']
        assert payload['block'] == [0, 0]
        assert payload['normalization_error'] <= 1e-12
        assert payload['enumeration_max_difference'] <= 1e-12
        assert payload['site_edge_max_difference'] <= 1e-12

        lines = (tmp_path / "report_distribution.csv").read_text(encoding='utf-8').splitlines()
        assert lines[0] == "heights,probability"
        assert len(lines) == payload['support'] + 1

    def test_wide_window_skips_enumeration(self, tmp_path):
        """Test that enumeration is skipped past the width limit."""
        code, report = run_cli(['gibbs', '--model', 'builtin:gap', '--window', '-20', '20',
                                '--block', '0', '1'], tmp_path)
        assert code == 0
        assert report['payload']['enumeration_max_difference'] is None
        assert report['payload']['normalization_error'] <= 1e-10

    def test_site_hamiltonian_matches_edge_model(self, tmp_path):
        """Test that the gap model's site rewards give the edge model's law."""
        args = ['--window', '-4', '4', '--block', '-1', '1']
        code, site = run_cli(['gibbs', '--model', 'builtin:gap'] + args, tmp_path)
        assert code == 0
        site_csv = (tmp_path / "report_distribution.csv").read_text(encoding='utf-8')
        code, edge = run_cli(['gibbs', '--model', 'builtin:edge_rewards'] + args, tmp_path)
        assert code == 0
        edge_csv = (tmp_path / "report_distribution.csv").read_text(encoding='utf-8')

        assert site['payload']['model']['hamiltonian_form'] == "site"
        assert site['payload']['enumeration_max_difference'] <= 1e-12
        assert site['payload']['site_edge_max_difference'] <= 1e-12
        site_rows = dict(line.rsplit(",", 1) for line in site_csv.splitlines()[1:])
        edge_rows = dict(line.rsplit(",", 1) for line in edge_csv.splitlines()[1:])
        assert site_rows.keys() == edge_rows.keys()
        for key, value in site_rows.items():
            assert float(value) == pytest.approx(float(edge_rows[key]), abs=1e-12)

        modal = site['payload']['modal_block']
        assert len(modal['heights']) == 3
        assert modal['probability'] == pytest.approx(max(float(v) for v in site_rows.values()), rel=1e-12)
