"""Transform, Jacobian, and support-validation tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marginalis.exceptions import BoundaryError, DomainError
from marginalis.paramspace import (
    ParameterSpace,
    ParameterSpec,
    from_unconstrained,
    log_jacobian,
    norm_log_pdf,
    norm_quantile,
    to_unconstrained,
    unit_cube_space,
)

UNIT = ParameterSpace([ParameterSpec.interval("theta", 0.0, 1.0)])
SIGMA = ParameterSpace([ParameterSpec.interval("sigma", 0.0, 1.5)])
MIXED = ParameterSpace(
    [ParameterSpec.real_line("mu"), ParameterSpec.interval("rate", 0.0, 1.0)]
)

LOG_PHI_0 = -0.5 * math.log(2.0 * math.pi)


def erf_cdf(x):
    """Independent standard normal CDF oracle via the error function."""
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


class TestSpecs:
    def test_interval_requires_ordered_finite_bounds(self):
        with pytest.raises(ValueError):
            ParameterSpec.interval("x", 1.0, 0.0)
        with pytest.raises(ValueError):
            ParameterSpec.interval("x", 0.0, math.inf)
        with pytest.raises(ValueError):
            ParameterSpec("x", lower=0.0)

    def test_names_unique(self):
        with pytest.raises(ValueError):
            ParameterSpace([ParameterSpec.real_line("a"), ParameterSpec.real_line("a")])

    def test_dimension(self):
        assert MIXED.dimension == 2
        assert MIXED.names == ("mu", "rate")


class TestToUnconstrained:
    def test_midpoint_maps_to_zero(self):
        assert to_unconstrained(np.array([0.5]), UNIT)[0] == pytest.approx(0.0, abs=1e-12)

    def test_paper_probit_value(self):
        # 0.22 -> -0.77 at the printed two-decimal precision
        assert to_unconstrained(np.array([0.22]), UNIT)[0] == pytest.approx(-0.77, abs=5e-3)

    def test_scaled_interval_midpoint(self):
        assert to_unconstrained(np.array([0.75]), SIGMA)[0] == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 1.3])
    def test_boundary_rejected(self, bad):
        with pytest.raises(BoundaryError, match="theta"):
            to_unconstrained(np.array([bad]), UNIT)

    def test_real_line_passthrough(self):
        xi = to_unconstrained(np.array([3.25, 0.5]), MIXED)
        assert xi[0] == 3.25
        assert xi[1] == pytest.approx(0.0, abs=1e-12)


class TestFromUnconstrained:
    def test_zero_maps_to_midpoint(self):
        assert from_unconstrained(np.array([0.0]), UNIT)[0] == pytest.approx(0.5, abs=1e-15)

    def test_against_erf_oracle(self):
        got = from_unconstrained(np.array([-0.77]), UNIT)[0]
        assert got == pytest.approx(erf_cdf(-0.77), abs=1e-12)
        assert got == pytest.approx(0.2206, abs=5e-5)

    def test_round_trip(self):
        xi = np.array([1.3])
        back = to_unconstrained(from_unconstrained(xi, UNIT), UNIT)
        assert back[0] == pytest.approx(1.3, abs=1e-12)

    def test_non_finite_rejected(self):
        with pytest.raises(DomainError):
            from_unconstrained(np.array([math.nan]), UNIT)
        with pytest.raises(DomainError):
            from_unconstrained(np.array([math.inf]), UNIT)

    def test_output_strictly_interior_in_far_tail(self):
        theta = from_unconstrained(np.array([50.0]), UNIT)
        assert 0.0 < theta[0] < 1.0


class TestLogJacobian:
    def test_unit_interval_at_zero(self):
        assert log_jacobian(np.array([0.0]), UNIT) == pytest.approx(LOG_PHI_0, abs=1e-12)

    def test_scaled_interval_at_zero(self):
        expected = math.log(1.5) + LOG_PHI_0
        assert log_jacobian(np.array([0.0]), SIGMA) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(-0.513473, abs=1e-6)

    def test_real_line_contributes_zero(self):
        assert log_jacobian(np.array([0.0, 0.0]), MIXED) == pytest.approx(LOG_PHI_0, abs=1e-12)


class TestQuantile:
    def test_clamps_extreme_tails(self):
        assert math.isfinite(norm_quantile(1e-300))

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.5, 2.0])
    def test_rejects_outside_open_interval(self, bad):
        with pytest.raises(DomainError):
            norm_quantile(bad)


class TestInvariants:
    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(st.floats(min_value=-6.0, max_value=6.0), min_size=1, max_size=4)
    )
    def test_round_trip_on_box(self, values):
        space = unit_cube_space([f"p{i}" for i in range(len(values))])
        xi = np.array(values)
        back = to_unconstrained(from_unconstrained(xi, space), space)
        np.testing.assert_allclose(back, xi, atol=1e-10)

    def test_monotone_per_coordinate(self):
        grid = np.linspace(-6.0, 6.0, 2001)
        theta = from_unconstrained(grid[:, None], SIGMA)[:, 0]
        assert np.all(np.diff(theta) > 0)

    def test_jacobian_matches_finite_difference(self):
        rng = np.random.default_rng(7)
        space = ParameterSpace(
            [
                ParameterSpec.interval("a", 0.0, 1.0),
                ParameterSpec.interval("b", -2.0, 2.0),
                ParameterSpec.real_line("c"),
            ]
        )
        step = 1e-5
        for _ in range(25):
            xi = rng.uniform(-3.0, 3.0, size=3)
            total = 0.0
            for j in range(3):
                hi = xi.copy()
                lo = xi.copy()
                hi[j] += step
                lo[j] -= step
                deriv = (
                    from_unconstrained(hi, space)[j] - from_unconstrained(lo, space)[j]
                ) / (2 * step)
                total += math.log(abs(deriv)) if deriv != 1.0 else 0.0
            assert log_jacobian(xi, space) == pytest.approx(total, rel=1e-6)

    def test_uniform_prior_transfers_to_standard_normal(self):
        # log-prior(theta(xi)) + log-Jacobian(xi) equals log phi(xi) exactly
        # for the unit interval (log-prior is identically zero).
        for xi in np.linspace(-4.0, 4.0, 17):
            assert log_jacobian(np.array([xi]), UNIT) == norm_log_pdf(xi)
