"""Performance tests for the numerical kernels."""

import time

import pytest

from rpositive import (
    FiniteVolumeMeasure,
    Window,
    critical_chain,
    gap_scan,
    load_builtin_model,
    return_time_pmf,
    s_star,
)
from rpositive.radius import diagonal_power_series, truncated_radius_oracle


class TestRadiusPerformance:
    """Test s* and oracle timings."""

    def test_s_star_under_50ms(self):
        """Test that one s* bisection is fast."""
        a = load_builtin_model('gap').product_sequence
        s_star(a, 0)

        start = time.perf_counter()
        result = s_star(a, 0)
        elapsed = (time.perf_counter() - start) * 1000

        assert elapsed < 50.0, f"s_star took {elapsed:.3f}ms (target: <50ms)"
        assert result.value == 0.4375

    def test_gap_scan_64_shifts_under_2_seconds(self):
        """Test the default ladder depth."""
        a = load_builtin_model('double_prefix').product_sequence

        start = time.perf_counter()
        gap_scan(a, 64)
        elapsed = time.perf_counter() - start

        assert elapsed < 2.0, f"gap_scan took {elapsed:.3f}s (target: <2s)"

    def test_oracle_4000_under_1_second(self):
        """Test the tridiagonal eigenvalue oracle at L = 4000."""
        mat = load_builtin_model('unit').matrix

        start = time.perf_counter()
        lam = truncated_radius_oracle(mat, 4000)
        elapsed = time.perf_counter() - start

        assert elapsed < 1.0, f"oracle took {elapsed:.3f}s (target: <1s)"
        assert lam == pytest.approx(2.0, rel=1e-5)

    def test_diagonal_series_500_under_1_second(self):
        """Test the log-space power series."""
        mat = load_builtin_model('unit').matrix

        start = time.perf_counter()
        diagonal_power_series(mat, 500)
        elapsed = time.perf_counter() - start

        assert elapsed < 1.0, f"diagonal series took {elapsed:.3f}s (target: <1s)"


class TestChainPerformance:
    """Test chain construction and return-time timings."""

    def test_critical_chain_default_depth_under_5_seconds(self):
        """Test building the slowly converging chain at full depth."""
        mat = load_builtin_model('critical_quarter').matrix

        start = time.perf_counter()
        critical_chain(mat, 0)
        elapsed = time.perf_counter() - start

        assert elapsed < 5.0, f"critical_chain took {elapsed:.3f}s (target: <5s)"

    def test_return_pmf_400_under_1_second(self):
        """Test the return-time recursion to k = 400."""
        chain = critical_chain(load_builtin_model('gap').matrix, 0)

        start = time.perf_counter()
        pmf = return_time_pmf(chain, 1, 400)
        elapsed = time.perf_counter() - start

        assert elapsed < 1.0, f"return_time_pmf took {elapsed:.3f}s (target: <1s)"
        assert pmf.mass_accounted == pytest.approx(1.0, abs=1e-9)


class TestGibbsPerformance:
    """Test transfer-matrix timings."""

    def test_window_401_under_5_seconds(self):
        """Test the long window used for the stationary comparison."""
        hamiltonian = load_builtin_model('edge_rewards').hamiltonian

        start = time.perf_counter()
        measure = FiniteVolumeMeasure(hamiltonian, Window(-200, 200, 0, 0))
        marginal = measure.parity_averaged_marginal(0)
        elapsed = time.perf_counter() - start

        assert elapsed < 5.0, f"window of 401 sites took {elapsed:.3f}s (target: <5s)"
        assert marginal.sum() == pytest.approx(1.0, abs=1e-10)
