"""Tests for single-facility instances, ESC, the mixed cdf and the exact optimum."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aleatory_facility.adversary import random_instance
from aleatory_facility.distributions import PiecewiseUniform
from aleatory_facility.errors import DomainError, ParityError
from aleatory_facility.instance import (
    Instance,
    MixedCdf,
    candidate_levels,
    candidate_set,
    esc,
    esc_slopes,
    mixed_cdf_eval,
    mixed_quantile,
    relevant_quantiles,
    solve_optimal,
)


@pytest.fixture
def unit() -> PiecewiseUniform:
    """U[0, 1]."""
    return PiecewiseUniform.uniform(0.0, 1.0)


@pytest.fixture
def one_report() -> Instance:
    """Capacity 3, one report at 0, two aleatory agents."""
    return Instance(3, (0.0,))


class TestInstance:
    """Tests for Instance validation and derived counts."""

    def test_reports_are_sorted(self) -> None:
        """Reports are stored in ascending order."""
        inst = Instance(5, (3.0, -1.0, 2.0))

        assert inst.reports == (-1.0, 2.0, 3.0)
        np.testing.assert_array_equal(inst.x, [-1.0, 2.0, 3.0])

    def test_counts(self) -> None:
        """n_r, n_u and λ follow from n and the reports."""
        inst = Instance(5, (0.0, 1.0))

        assert inst.n_r == 2
        assert inst.n_u == 3
        assert inst.lam == pytest.approx(0.4)

    def test_too_many_reports(self) -> None:
        """More reports than capacity is a DomainError."""
        with pytest.raises(DomainError):
            Instance(1, (0.0, 1.0))

    @pytest.mark.parametrize("n", [0, -3, 2.5])
    def test_bad_capacity(self, n: float) -> None:
        """Capacity must be a positive integer."""
        with pytest.raises(DomainError):
            Instance(n, ())

    def test_non_finite_report(self) -> None:
        """NaN and infinite reports are rejected."""
        with pytest.raises(DomainError):
            Instance(3, (float("inf"),))

    def test_replace_report_resorts(self) -> None:
        """Replacing a report keeps the vector sorted."""
        inst = Instance(3, (0.0, 1.0, 2.0)).replace_report(0, 5.0)

        assert inst.reports == (1.0, 2.0, 5.0)


class TestEsc:
    """Tests for the ex-ante social cost."""

    def test_reports_only(self) -> None:
        """Without aleatory agents ESC is the sum of distances."""
        assert esc(Instance(3, (0.0, 1.0, 4.0)), None, 1.0) == pytest.approx(4.0)

    def test_mixed(self, one_report: Instance, unit: PiecewiseUniform) -> None:
        """0.25 + 2 * E|X - 0.25| for X ~ U[0, 1]."""
        assert esc(one_report, unit, 0.25) == pytest.approx(0.875)

    def test_vectorized(self, one_report: Instance, unit: PiecewiseUniform) -> None:
        """An array of positions gives an array of costs."""
        ys = np.array([0.0, 0.25, 1.0])

        costs = esc(one_report, unit, ys)

        np.testing.assert_allclose(costs, [1.0, 0.875, 2.0])

    def test_missing_distribution(self, one_report: Instance) -> None:
        """Aleatory agents need a distribution."""
        with pytest.raises(DomainError):
            esc(one_report, None, 0.0)


class TestMixedCdf:
    """Tests for the pooled cdf and its quantile."""

    def test_eval(self, one_report: Instance, unit: PiecewiseUniform) -> None:
        """(1 + 2 * 0.5) / 3 at t = 0.5."""
        F = MixedCdf(one_report, unit)

        assert mixed_cdf_eval(F, 0.5) == pytest.approx(2.0 / 3.0)
        assert F.count(0.5) == pytest.approx(2.0)

    def test_jump_at_report(self, one_report: Instance, unit: PiecewiseUniform) -> None:
        """The report contributes a jump of 1/n at its position."""
        F = MixedCdf(one_report, unit)

        assert F(-1e-9) == pytest.approx(0.0, abs=1e-8)
        assert F(0.0) == pytest.approx(1.0 / 3.0)

    def test_quantile(self, one_report: Instance, unit: PiecewiseUniform) -> None:
        """The median of the pool sits where 1 + 2t = 1.5."""
        F = MixedCdf(one_report, unit)

        assert mixed_quantile(F, 0.5) == pytest.approx(0.25)

    def test_quantile_at_jump(self, one_report: Instance, unit: PiecewiseUniform) -> None:
        """Levels covered by the jump map to the report itself."""
        F = MixedCdf(one_report, unit)

        assert F.quantile(0.2) == 0.0

    def test_quantile_rejects_zero(self, one_report: Instance, unit: PiecewiseUniform) -> None:
        """Level 0 is outside (0, 1]."""
        with pytest.raises(DomainError):
            MixedCdf(one_report, unit).quantile(0.0)


class TestSolveOptimal:
    """Tests for the exact single-facility optimum."""

    def test_one_report(self, one_report: Instance, unit: PiecewiseUniform) -> None:
        """A unique optimum at 0.25."""
        optimum = solve_optimal(one_report, unit)

        assert optimum.lo == pytest.approx(0.25)
        assert optimum.hi == pytest.approx(0.25)
        assert optimum.canonical == optimum.lo

    def test_even_capacity_gives_interval(self) -> None:
        """Two reports and no aleatory agents: every point between them is optimal."""
        optimum = solve_optimal(Instance(2, (0.0, 1.0)), None)

        assert (optimum.lo, optimum.hi) == (0.0, 1.0)
        assert 0.5 in optimum

    def test_no_reports(self, unit: PiecewiseUniform) -> None:
        """Only aleatory agents: the median of μ."""
        optimum = solve_optimal(Instance(5, ()), unit)

        assert optimum.canonical == pytest.approx(0.5)

    def test_reports_dominate(self, unit: PiecewiseUniform) -> None:
        """Three of five agents at 7 pull the optimum onto them."""
        optimum = solve_optimal(Instance(5, (7.0, 7.0, 7.0)), unit)

        assert optimum.canonical == 7.0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_first_order_conditions(self, seed: int) -> None:
        """At the optimum the left slope is <= 0 and the right slope >= 0."""
        inst, mu = random_instance(np.random.default_rng(seed))

        optimum = solve_optimal(inst, mu)
        left, _ = esc_slopes(inst, mu, optimum.lo)
        _, right = esc_slopes(inst, mu, optimum.hi)

        assert left <= 1e-9
        assert right >= -1e-9

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_optimum_is_reports_or_candidates(self, seed: int) -> None:
        """With odd n the canonical optimum is a report or a candidate quantile."""
        inst, mu = random_instance(np.random.default_rng(seed))

        y = solve_optimal(inst, mu).canonical
        options = np.concatenate((inst.x, candidate_set(inst.n, inst.n_u, mu)))

        assert np.min(np.abs(options - y)) <= 1e-9 * max(1.0, abs(y))


class TestCandidates:
    """Tests for candidate and relevant quantile indices."""

    def test_levels_odd(self) -> None:
        """(2j-1)/(2n_u) for odd n."""
        assert candidate_levels(3, 2) == [0.25, 0.75]

    def test_levels_even(self) -> None:
        """j/n_u for even n."""
        assert candidate_levels(4, 2) == [0.5, 1.0]

    def test_no_aleatory_agents(self, unit: PiecewiseUniform) -> None:
        """No candidates without aleatory agents."""
        assert candidate_set(3, 0, unit) == []

    def test_relevant_with_reports(self) -> None:
        """n_r = 3, n_u = 2: both phantoms can matter."""
        assert relevant_quantiles(3, 2) == [1, 2]

    def test_relevant_without_reports(self) -> None:
        """Only the median phantom matters when nobody reported."""
        assert relevant_quantiles(0, 5) == [3]

    def test_relevant_few_reports(self) -> None:
        """Two reports among seven agents leave three relevant indices."""
        assert relevant_quantiles(2, 5) == [2, 3, 4]

    def test_relevant_even_n(self) -> None:
        """Even n raises ParityError."""
        with pytest.raises(ParityError):
            relevant_quantiles(2, 2)
