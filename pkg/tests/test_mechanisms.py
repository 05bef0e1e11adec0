"""Tests for the median rule, phantom quantile mechanisms and query plan lifting."""

import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aleatory_facility.adversary import random_instance, truthfulness_fuzz
from aleatory_facility.distributions import PiecewiseUniform
from aleatory_facility.errors import DimensionError, DomainError, NoReportsError, ParityError
from aleatory_facility.instance import Instance, esc, relevant_quantiles, solve_optimal
from aleatory_facility.mechanisms import (
    PhantomVector,
    QueryPlan,
    SingleMechanism,
    delta,
    delta_lift,
    fixed_placement,
    lift,
    lifted_pqm,
    mean_of_reports,
    median_info_pqm,
    median_mechanism,
    median_of,
    optimal_phantoms,
    optimal_pqm,
    optimal_query_plan,
    pqm,
)


@pytest.fixture
def unit() -> PiecewiseUniform:
    """U[0, 1]."""
    return PiecewiseUniform.uniform(0.0, 1.0)


class TestQueryPlan:
    """Tests for QueryPlan and PhantomVector."""

    def test_even_grid(self) -> None:
        """(2s-1)/(2k) for s = 1..k."""
        plan = QueryPlan.even_grid(3)

        np.testing.assert_allclose(plan.levels, [1 / 6, 0.5, 5 / 6])
        assert plan.k == 3
        assert plan.is_even_grid()

    def test_not_even_grid(self) -> None:
        """Any other plan is not the even grid."""
        assert not QueryPlan((0.1, 0.9)).is_even_grid()
        assert not QueryPlan(()).is_even_grid()

    def test_levels_are_sorted(self) -> None:
        """Levels are stored in ascending order."""
        assert QueryPlan((0.9, 0.1)).levels == (0.1, 0.9)

    def test_rejects_out_of_range(self) -> None:
        """Levels must lie in [0, 1]."""
        with pytest.raises(DomainError):
            QueryPlan((0.5, 1.5))
        with pytest.raises(DomainError):
            PhantomVector((-0.1,))

    def test_even_grid_needs_positive_k(self) -> None:
        """k = 0 has no even grid."""
        with pytest.raises(DomainError):
            QueryPlan.even_grid(0)

    def test_phantom_realize(self, unit: PiecewiseUniform) -> None:
        """Level 0 maps to the bottom of the support."""
        np.testing.assert_allclose(PhantomVector((0.0, 0.25, 1.0)).realize(unit), [0.0, 0.25, 1.0])


class TestMedian:
    """Tests for the median rule."""

    def test_odd(self) -> None:
        """Middle element."""
        assert median_of([3.0, 1.0, 2.0]) == 2.0

    def test_even_takes_lower(self) -> None:
        """Lower median for even length."""
        assert median_of([4.0, 1.0, 3.0, 2.0]) == 2.0

    def test_empty(self) -> None:
        """No median of nothing."""
        with pytest.raises(DomainError):
            median_of([])

    def test_mechanism_ignores_distribution(self, unit: PiecewiseUniform) -> None:
        """The median mechanism only reads reports."""
        inst = Instance(5, (0.0, 4.0, 9.0))

        assert median_mechanism(inst, unit) == median_mechanism(inst, None) == 4.0

    def test_mechanism_needs_reports(self, unit: PiecewiseUniform) -> None:
        """No reports raises NoReportsError."""
        with pytest.raises(NoReportsError):
            median_mechanism(Instance(3, ()), unit)


class TestPqm:
    """Tests for phantom quantile mechanisms."""

    def test_optimal_phantoms(self) -> None:
        """Levels (2j-1)/(2n_u)."""
        assert optimal_phantoms(2).levels == (0.25, 0.75)
        assert optimal_phantoms(0).levels == ()

    def test_places_at_median_of_merged(self, unit: PiecewiseUniform) -> None:
        """Median of {0, 0.25, 0.75}."""
        inst = Instance(3, (0.0,))

        assert pqm(inst, optimal_phantoms(2), unit) == pytest.approx(0.25)

    def test_full_reports(self) -> None:
        """Without aleatory agents the PQM is the median of reports."""
        assert pqm(Instance(3, (5.0, 1.0, 2.0)), PhantomVector(()), None) == 2.0

    def test_wrong_length(self, unit: PiecewiseUniform) -> None:
        """One phantom per aleatory agent."""
        with pytest.raises(DimensionError):
            pqm(Instance(3, (0.0,)), PhantomVector((0.5,)), unit)

    def test_even_capacity(self, unit: PiecewiseUniform) -> None:
        """Even n raises ParityError."""
        with pytest.raises(ParityError):
            pqm(Instance(4, (0.0, 1.0)), PhantomVector((0.25, 0.75)), unit)

    def test_median_info_pqm(self, unit: PiecewiseUniform) -> None:
        """Every phantom at the median of μ."""
        inst = Instance(5, (0.0, 0.0, 0.9))

        assert median_info_pqm()(inst, unit) == pytest.approx(0.5)

    def test_fixed_placement(self, unit: PiecewiseUniform) -> None:
        """A constant answer."""
        assert fixed_placement(0.3)(Instance(3, (9.0,)), unit) == 0.3

    @settings(max_examples=80, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_optimal_pqm_is_optimal(self, seed: int) -> None:
        """The PQM with optimal phantoms matches the exact optimum cost."""
        inst, mu = random_instance(np.random.default_rng(seed))

        y = optimal_pqm()(inst, mu)
        best = esc(inst, mu, solve_optimal(inst, mu).canonical)

        assert esc(inst, mu, y) == pytest.approx(best, rel=1e-9, abs=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_anonymous(self, seed: int) -> None:
        """Permuting the reports does not move the facility."""
        rng = np.random.default_rng(seed)
        inst, mu = random_instance(rng)
        shuffled = Instance(inst.n, tuple(rng.permutation(inst.reports)))
        w = optimal_phantoms(inst.n_u)

        assert pqm(shuffled, w, mu) == pqm(inst, w, mu)
        assert lifted_pqm(QueryPlan.even_grid(2))(shuffled, mu) == lifted_pqm(QueryPlan.even_grid(2))(inst, mu)


class TestLift:
    """Tests for lifting a query plan to phantom levels."""

    def test_single_level(self) -> None:
        """A one-level plan fills every phantom with that level."""
        assert lift(QueryPlan((0.5,)), 0, 5).levels == (0.5,) * 5

    def test_ties_go_low(self) -> None:
        """Target 0.5 sits between 0.25 and 0.75 and takes 0.25."""
        w = lift(QueryPlan.even_grid(2), 2, 5)

        assert w.levels == (0.25, 0.25, 0.25, 0.75, 0.75)

    def test_gap(self) -> None:
        """Largest gap of the lifted even grid for n_r = 2, n_u = 5."""
        q = QueryPlan.even_grid(2)

        assert delta(lift(q, 2, 5), 2, 5) == pytest.approx(0.25)
        assert delta_lift(q, 2, 5) == pytest.approx(0.25)

    def test_explicit_relevant(self) -> None:
        """Aligning on every index gives one level per target."""
        w = lift(QueryPlan.even_grid(4), 0, 4, relevant=range(1, 5))

        assert w.levels == QueryPlan.even_grid(4).levels

    def test_bad_relevant(self) -> None:
        """Relevant indices must lie in [1, n_u]."""
        with pytest.raises(DomainError):
            lift(QueryPlan((0.5,)), 0, 3, relevant=[0, 1])

    def test_empty_plan(self) -> None:
        """An empty plan cannot be lifted."""
        with pytest.raises(DomainError):
            lift(QueryPlan(()), 1, 2)

    def test_delta_wrong_length(self) -> None:
        """delta checks the vector length."""
        with pytest.raises(DimensionError):
            delta(PhantomVector((0.5,)), 0, 3)

    @settings(max_examples=100)
    @given(
        st.integers(min_value=0, max_value=12),
        st.integers(min_value=1, max_value=12),
        st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=6),
    )
    def test_lift_gap_matches_delta_lift(self, n_r: int, n_u: int, levels: list[float]) -> None:
        """The gap of the lifted vector equals the plan's own gap, and the vector is sorted."""
        if (n_r + n_u) % 2 == 0:
            n_r += 1
        q = QueryPlan(tuple(levels))

        w = lift(q, n_r, n_u)

        assert len(w) == n_u
        assert list(w.levels) == sorted(w.levels)
        assert delta(w, n_r, n_u) == pytest.approx(delta_lift(q, n_r, n_u))


class TestOptimalQueryPlan:
    """Tests for the best k-level plan."""

    def test_blocks(self) -> None:
        """Three relevant targets in two blocks: {0.3, 0.5} and {0.7}."""
        plan = optimal_query_plan(2, 2, 5)

        np.testing.assert_allclose(plan.levels, [0.4, 0.7])
        assert delta_lift(plan, 2, 5) == pytest.approx(0.1)

    def test_spare_levels(self) -> None:
        """k above |R| adds the remaining targets from the bottom."""
        plan = optimal_query_plan(4, 2, 5)

        np.testing.assert_allclose(plan.levels, [0.1, 0.3, 0.5, 0.7])
        assert delta_lift(plan, 2, 5) == 0.0

    def test_clamps_large_k(self, caplog: pytest.LogCaptureFixture) -> None:
        """k > n_u falls back to the full-information levels with a warning."""
        with caplog.at_level(logging.WARNING, logger="aleatory_facility.mechanisms"):
            plan = optimal_query_plan(9, 2, 5)

        assert plan.levels == optimal_phantoms(5).levels
        assert "clamping" in caplog.text

    @settings(max_examples=100)
    @given(
        st.integers(min_value=0, max_value=15),
        st.integers(min_value=1, max_value=15),
        st.integers(min_value=1, max_value=6),
        st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=6),
    )
    def test_beats_other_plans(self, n_r: int, n_u: int, k: int, other: list[float]) -> None:
        """No plan with at most k levels has a smaller gap."""
        if (n_r + n_u) % 2 == 0:
            n_r += 1
        other = other[:k]

        best = delta_lift(optimal_query_plan(k, n_r, n_u), n_r, n_u)

        assert best <= delta_lift(QueryPlan(tuple(other)), n_r, n_u) + 1e-12

    def test_relevant_count_bounds_k(self) -> None:
        """With k = |R| every relevant target is hit exactly."""
        n_r, n_u = 4, 7
        k = len(relevant_quantiles(n_r, n_u))

        assert delta_lift(optimal_query_plan(k, n_r, n_u), n_r, n_u) == pytest.approx(0.0)


class TestTruthfulness:
    """The fuzzer finds no profitable misreport against median-based rules."""

    @pytest.mark.parametrize(
        "mechanism",
        [median_mechanism, optimal_pqm(), median_info_pqm(), lifted_pqm(QueryPlan.even_grid(2))],
        ids=["median", "optimal-pqm", "median-pqm", "lifted-even-2"],
    )
    def test_truthful(self, mechanism: SingleMechanism) -> None:
        """Worst regret stays at zero."""
        report = truthfulness_fuzz(mechanism, trials=150, seed=7)

        assert report.is_truthful()
        assert report.checked > 150

    def test_mean_is_manipulable(self) -> None:
        """Averaging reports rewards exaggeration."""
        report = truthfulness_fuzz(mean_of_reports, trials=150, seed=7)

        assert report.worst_regret > 0.0
        assert report.witness is not None
        assert report.witness.deviating_cost < report.witness.truthful_cost
