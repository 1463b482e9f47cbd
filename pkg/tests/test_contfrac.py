"""Tests for the continued-fraction machinery: phi, omega orbits, allowed-ness and h."""

import math

import numpy as np
import pytest

from rpositive.contfrac import (
    Certificate,
    VerdictKind,
    h_finite,
    h_limit,
    h_truncations,
    is_allowed,
    omega_trace,
    phi,
    phi_inv,
    tail_fixed_points,
)
from rpositive.exceptions import DepthExceeded, DomainError, OutOfDomain, SingularContinuant
from rpositive.radius import s_star
from rpositive.seqmodel import PositiveSequence, make_sequence

GAP = make_sequence([2.0], 0.25)
QUARTER = make_sequence([], 0.25)
PREFIX_ONLY = make_sequence([1.0, 1.0, 1.0])


class TestPhi:
    """Test the map phi_a and its inverse."""

    def test_phi_value(self):
        """Test phi_a(w) = 1 - a/w."""
        assert phi(0.25, 1.0) == 0.75

    @pytest.mark.parametrize("omega", [0.0, -0.5])
    def test_phi_domain(self, omega):
        """Test that phi needs a positive argument."""
        with pytest.raises(DomainError):
            phi(0.25, omega)

    def test_phi_inv_value(self):
        """Test a/(1 - w)."""
        assert phi_inv(0.25, 0.5) == 0.5

    def test_phi_inv_singular(self):
        """Test that the inverse is singular at w >= 1."""
        with pytest.raises(SingularContinuant):
            phi_inv(0.25, 1.0)

    def test_inverse_pair(self):
        """Test phi_a(phi_inv_a(w)) = w on (0, 1)."""
        for omega in np.linspace(0.05, 0.95, 19):
            assert phi(0.3, phi_inv(0.3, omega)) == pytest.approx(omega, abs=1e-14)


class TestTailFixedPoints:
    """Test fixed points of w -> 1 - c/w."""

    def test_critical_double_root(self):
        """Test that c = 1/4 has the double root 1/2."""
        assert tail_fixed_points(0.25) == (0.5, 0.5)

    def test_two_roots(self):
        """Test c = 7/64 with roots 1/8 and 7/8."""
        low, high = tail_fixed_points(7 / 64)
        assert low == pytest.approx(0.125, abs=1e-15)
        assert high == pytest.approx(0.875, abs=1e-15)

    def test_no_roots_above_quarter(self):
        """Test that c > 1/4 has no real fixed point."""
        assert tail_fixed_points(0.3) is None

    def test_small_c_is_accurate(self):
        """Test that the small root keeps full precision for tiny c."""
        low, _ = tail_fixed_points(1e-12)
        assert low == pytest.approx(1e-12, rel=1e-9)


class TestOmegaTrace:
    """Test the forward recursion w_{x+1} = 1 - s a_x / w_x."""

    def test_first_failure(self):
        """Test that the orbit stops at the first non-positive value."""
        trace = omega_trace(GAP, 0.5, 10)
        assert trace.first_failure == 1
        assert not trace.positive

    def test_snaps_onto_repelling_point(self):
        """Test that the critical gap orbit is stationary on w- = 1/8."""
        trace = omega_trace(GAP, 7 / 16)
        assert trace.positive
        assert trace.stationary_from == 1
        assert trace.values.tolist() == [1.0, 0.125]
        assert trace.value_at(1000) == 0.125
        assert trace.values_through(4).tolist() == [1.0, 0.125, 0.125, 0.125]

    def test_critical_quarter_orbit(self):
        """Test w_x = (x+2)/(2(x+1)) for a = 1/4 at s = 1."""
        trace = omega_trace(QUARTER, 1.0, 100)
        assert trace.stationary_from is None
        assert trace.depth == 100
        for x in (1, 10, 100):
            assert trace.value_at(x) == pytest.approx((x + 2) / (2 * (x + 1)), rel=1e-12)

    def test_depth_exceeded(self):
        """Test that a non-stationary orbit cannot be read past its depth."""
        trace = omega_trace(QUARTER, 1.0, 100)
        with pytest.raises(DepthExceeded):
            trace.value_at(200)

    def test_prefix_only_orbit_ends_with_prefix(self):
        """Test that a prefix-only orbit has P + 1 entries."""
        trace = omega_trace(PREFIX_ONLY, 0.25)
        assert trace.depth == 3
        assert trace.positive

    def test_negative_index(self):
        """Test that negative indices are rejected."""
        with pytest.raises(OutOfDomain):
            omega_trace(GAP, 0.25, 5).value_at(-1)

    @pytest.mark.parametrize("s,depth", [(0.0, 10), (-1.0, 10), (0.5, 0)])
    def test_invalid_arguments(self, s, depth):
        """Test that s must be positive and depth at least 1."""
        with pytest.raises(ValueError):
            omega_trace(GAP, s, depth)


class TestIsAllowed:
    """Test allowed-ness verdicts."""

    def test_gap_at_critical_scale(self):
        """Test that the gap model is allowed exactly at s = 7/16."""
        verdict = is_allowed(GAP, 7 / 16)
        assert verdict.is_allowed
        assert verdict.certificate is Certificate.CLOSED_FORM_TAIL

    def test_gap_above_critical_scale(self):
        """Test that the orbit falls below w- just above the critical scale."""
        verdict = is_allowed(GAP, 0.44)
        assert verdict.is_not_allowed

    def test_quarter_ceiling(self):
        """Test that a = 1/4 is allowed at s = 1 and not above."""
        assert is_allowed(QUARTER, 1.0).is_allowed
        assert is_allowed(QUARTER, 1.0001).is_not_allowed

    def test_prefix_only_exhausted(self):
        """Test a fully scanned prefix-only sequence."""
        verdict = is_allowed(PREFIX_ONLY, 0.25, depth=10)
        assert verdict.kind is VerdictKind.ALLOWED
        assert verdict.certificate is Certificate.DEPTH_EXHAUSTED_POSITIVE
        assert verdict.depth == 3

    def test_prefix_only_truncated_scan(self):
        """Test that a short scan of a prefix-only sequence is undetermined."""
        verdict = is_allowed(PREFIX_ONLY, 0.25, depth=2)
        assert verdict.is_undetermined
        assert verdict.to_dict() == {'kind': 'Undetermined', 'depth': 2}

    def test_prefix_only_failure(self):
        """Test that s = 1 fails at the first step of a = 1."""
        verdict = is_allowed(PREFIX_ONLY, 1.0)
        assert verdict.is_not_allowed
        assert verdict.first_failure == 1

    def test_monotone_in_s(self):
        """Test that allowed-ness is monotone in the scale."""
        grid = np.linspace(0.05, 0.6, 56)
        flags = [is_allowed(GAP, float(s)).is_allowed for s in grid]
        first_bad = flags.index(False)
        assert not any(flags[first_bad:])


class TestHTruncations:
    """Test finite continued-fraction truncations."""

    @pytest.mark.parametrize("y,expected", [(0, 0.25), (1, 1 / 3), (2, 0.375)])
    def test_quarter_truncations(self, y, expected):
        """Test h(1; 0, y) = (y+1)/(2(y+2)) for a = 1/4."""
        assert h_finite(QUARTER, 1.0, 0, y) == pytest.approx(expected, rel=1e-14)

    def test_lentz_matches_backward(self):
        """Test that the forward Lentz pass matches backward evaluation."""
        a = make_sequence([0.9, 0.2, 0.5, 0.1], 0.2)
        truncs = h_truncations(a, 0.8, 0, 10)
        for y in range(11):
            assert truncs[y] == pytest.approx(h_finite(a, 0.8, 0, y), rel=1e-12)

    def test_truncations_increase(self):
        """Test that truncations increase toward the limit."""
        truncs = h_truncations(QUARTER, 1.0, 0, 50)
        assert np.all(np.diff(truncs) > 0)
        assert truncs[-1] < 0.5

    def test_singular_intermediate(self):
        """Test that an intermediate value >= 1 is reported."""
        with pytest.raises(SingularContinuant):
            h_finite(make_sequence([1.0, 1.0, 4.0]), 1.0, 0, 2)

    def test_invalid_range(self):
        """Test that x must not exceed y."""
        with pytest.raises(ValueError):
            h_finite(QUARTER, 1.0, 3, 2)


class TestHLimit:
    """Test the limit h(s; x, inf)."""

    def test_quarter_limit(self):
        """Test h(1; 0, inf) = 1/2 for a = 1/4."""
        result = h_limit(QUARTER, 1.0)
        assert result.value == 0.5
        assert not result.exceeded
        assert result.converged

    def test_gap_limit_is_one(self):
        """Test that the critical gap model gives h = 1."""
        result = h_limit(GAP, 7 / 16)
        assert result.value == pytest.approx(1.0, abs=1e-14)
        assert not result.exceeded

    def test_gap_exceeds_at_next_scale(self):
        """Test that s = s*^[1] = 1 gives h > 1 from x = 0."""
        result = h_limit(GAP, 1.0)
        assert result.value == pytest.approx(4.0)
        assert result.exceeded

    def test_above_quarter_exceeds(self):
        """Test that c > 1/4 has no finite limit."""
        result = h_limit(QUARTER, 1.5)
        assert result.exceeded
        assert math.isinf(result.value)
        assert result.to_dict()['value'] is None

    def test_prefix_only_last_truncation(self):
        """Test that prefix-only sequences return the last truncation."""
        result = h_limit(PREFIX_ONLY, 0.25)
        assert result.value == pytest.approx(0.375, rel=1e-12)
        assert not result.exceeded
        assert not result.converged
        assert result.truncation_depth == 3

    def test_prefix_only_start_outside_domain(self):
        """Test that x past the prefix is out of domain."""
        with pytest.raises(OutOfDomain):
            h_limit(PREFIX_ONLY, 0.25, x=3)

    def test_shifted_start(self):
        """Test that h(s; 1, inf) of the gap model equals the tail root."""
        assert h_limit(GAP, 7 / 16, x=1).value == pytest.approx(0.125, abs=1e-15)


def random_sequence(rng: np.random.Generator) -> PositiveSequence:
    """Prefix of 0-5 entries in [0.1, 2] and a constant tail in [0.05, 1]."""
    prefix = rng.uniform(0.1, 2.0, int(rng.integers(0, 6)))
    return make_sequence(prefix.tolist(), float(rng.uniform(0.05, 1.0)))


def recursion_survives(a: PositiveSequence, s: float, steps: int) -> bool:
    """Plain w_{x+1} = 1 - s a_x / w_x from w_0 = 1, positive for ``steps`` steps."""
    w = 1.0
    for value in a.prefix:
        w = 1.0 - s * value / w
        if w <= 0:
            return False
    c = s * a.tail.value
    for _ in range(steps - a.prefix_length):
        w = 1.0 - c / w
        if w <= 0:
            return False
    return True


class TestRandomSequences:
    """Test order and duality properties on random constant-tail sequences."""

    def test_domination(self):
        """Test that shrinking every entry keeps an allowed scale allowed."""
        rng = np.random.default_rng(11)
        checked = 0
        for _ in range(100):
            a = random_sequence(rng)
            shrink = rng.uniform(0.2, 1.0, a.prefix_length + 1)
            smaller = make_sequence((np.asarray(a.prefix) * shrink[:-1]).tolist(),
                                    a.tail.value * float(shrink[-1]))
            critical = s_star(a).value
            assert s_star(smaller).value >= critical * (1 - 1e-9)
            for s in critical * rng.uniform(0.3, 1.3, 4):
                if is_allowed(a, float(s)).is_allowed:
                    checked += 1
                    assert is_allowed(smaller, float(s)).is_allowed
        assert checked > 100

    def test_closed_form_matches_long_recursion(self):
        """Test the tail verdict against a million plain recursion steps."""
        rng = np.random.default_rng(12)
        for _ in range(6):
            a = random_sequence(rng)
            critical = s_star(a).value
            for factor in (float(rng.uniform(0.5, 0.97)), float(rng.uniform(1.03, 1.5))):
                s = critical * factor
                verdict = is_allowed(a, s)
                assert verdict.is_allowed == (factor < 1)
                if verdict.is_allowed:
                    assert verdict.certificate is Certificate.CLOSED_FORM_TAIL
                assert recursion_survives(a, s, 10**6) == verdict.is_allowed

    def test_allowed_truncations_below_one(self):
        """Test that an allowed scale keeps every h(s; 0, y) inside (0, 1)."""
        rng = np.random.default_rng(13)
        for _ in range(50):
            a = random_sequence(rng)
            s = s_star(a).value * float(rng.uniform(0.1, 0.999))
            assert is_allowed(a, s).is_allowed
            truncs = h_truncations(a, s, 0, 300)
            assert np.all((truncs > 0) & (truncs < 1))
            assert h_limit(a, s).value < 1

    def test_h_increases_with_s(self):
        """Test that h(s; 0, inf) is increasing in s below s*."""
        rng = np.random.default_rng(14)
        for _ in range(30):
            a = random_sequence(rng)
            grid = s_star(a).value * np.linspace(0.05, 0.99, 40)
            values = np.array([h_limit(a, float(s)).value for s in grid])
            assert np.all(np.diff(values) > 0)
