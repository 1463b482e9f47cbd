"""Repeated runs give byte-identical reports."""

import pytest

from rpositive.cli import main
from rpositive.config import RunConfig, reset_max_workers, set_max_workers
from rpositive.model_loader import get_model_loader
from rpositive.verify import QUICK_PROFILE, run_property_suite


@pytest.fixture(autouse=True)
def restore_workers():
    yield
    reset_max_workers()


def _report_bytes(tmp_path, name, args):
    out = tmp_path / name
    main(list(args) + ['--out', str(out)])
    return out.read_bytes()


class TestReportDeterminism:
    """Test that reports depend only on the config and the model."""

    @pytest.mark.parametrize("args", [
        ['analyze', '--model', 'builtin:gap', '--m-max', '8'],
        ['radius', '--model', 'builtin:unit', '--m-max', '4'],
        ['chain', '--model', 'builtin:gap', '--k-max', '40', '--samples', '300', '--seed', '11',
         '--depth', '20000'],
        ['gibbs', '--model', 'builtin:edge_rewards', '--window', '-4', '4', '--block', '-1', '1'],
    ])
    def test_cli_twice(self, tmp_path, args):
        """Test that two runs write the same bytes."""
        first = _report_bytes(tmp_path, "first.json", args)
        second = _report_bytes(tmp_path, "second.json", args)
        assert first == second

    def test_side_files_twice(self, tmp_path):
        """Test that CSV side files are reproducible."""
        args = ['chain', '--model', 'builtin:gap', '--k-max', '30', '--samples', '200', '--depth', '20000']
        _report_bytes(tmp_path, "a.json", args)
        _report_bytes(tmp_path, "b.json", args)
        assert (tmp_path / "a_pmf.csv").read_bytes() == (tmp_path / "b_pmf.csv").read_bytes()
        assert (tmp_path / "a_simulation.csv").read_bytes() == (tmp_path / "b_simulation.csv").read_bytes()
        assert (tmp_path / "a_simulation.json").read_bytes() == (tmp_path / "b_simulation.json").read_bytes()

    def test_seed_changes_simulation(self, tmp_path):
        """Test that a different seed gives a different report."""
        base = ['chain', '--model', 'builtin:gap', '--k-max', '30', '--samples', '200', '--depth', '20000']
        first = _report_bytes(tmp_path, "s1.json", base + ['--seed', '1'])
        second = _report_bytes(tmp_path, "s2.json", base + ['--seed', '2'])
        assert first != second

    def test_workers_do_not_change_results(self):
        """Test that the suite is independent of the worker count."""
        set_max_workers(1)
        serial = run_property_suite(seed=4, samples=500, depth=20_000, only=['recurrence', 'gibbs'],
                                    profile=QUICK_PROFILE)
        set_max_workers(4)
        parallel = run_property_suite(seed=4, samples=500, depth=20_000, only=['recurrence', 'gibbs'],
                                      profile=QUICK_PROFILE)
        assert serial.to_dict() == parallel.to_dict()


class TestConfigHash:
    """Test the config hash."""

    def test_stable(self):
        """Test that equal configs hash equally."""
        model = get_model_loader().read_bytes(get_model_loader().model_path('builtin:gap'))
        first = RunConfig(command='analyze', model_path='builtin:gap').config_hash(model)
        second = RunConfig(command='analyze', model_path='builtin:gap').config_hash(model)
        assert first == second

    def test_model_bytes_matter(self):
        """Test that the model contents enter the hash."""
        config = RunConfig(command='analyze', model_path='builtin:gap')
        assert config.config_hash(b"{}") != config.config_hash(b"{ }")

    def test_parameters_matter(self):
        """Test that results-affecting fields enter the hash."""
        assert (RunConfig(command='chain', seed=1).config_hash()
                != RunConfig(command='chain', seed=2).config_hash())
