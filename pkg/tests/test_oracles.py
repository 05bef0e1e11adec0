"""Cross-checks of the exact solvers against brute-force search."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aleatory_facility.adversary import random_instance, random_two_instance
from aleatory_facility.distributions import PiecewiseUniform
from aleatory_facility.errors import DomainError
from aleatory_facility.instance import Instance, esc, solve_optimal
from aleatory_facility.oracles import MAX_ORACLE_REPORTS, grid_oracle, optimal_pair_oracle, pair_positions
from aleatory_facility.two_facility import TwoInstance, esc2, solve_optimal2

BOX = (-10.0, 10.0)


class TestGridOracle:
    """Tests for the single-facility grid scan."""

    def test_finds_candidate(self) -> None:
        """The scan includes the candidate quantile 0.25 exactly."""
        y, cost = grid_oracle(Instance(3, (0.0,)), PiecewiseUniform.uniform(0.0, 1.0), (-1.0, 2.0), 0.1)

        assert y == pytest.approx(0.25)
        assert cost == pytest.approx(0.875)

    def test_empty_box(self) -> None:
        """hi must exceed lo."""
        with pytest.raises(DomainError):
            grid_oracle(Instance(1, (0.0,)), None, (1.0, 1.0), 0.1)

    def test_bad_step(self) -> None:
        """The step must be positive."""
        with pytest.raises(DomainError):
            grid_oracle(Instance(1, (0.0,)), None, (-1.0, 1.0), 0.0)

    def test_box_misses_support(self) -> None:
        """Reports and support must lie inside the box."""
        with pytest.raises(DomainError):
            grid_oracle(Instance(3, (0.0,)), PiecewiseUniform.uniform(0.0, 5.0), (-1.0, 2.0), 0.1)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_agrees_with_solver(self, seed: int) -> None:
        """The exact optimum costs no more than the best scanned point, and vice versa."""
        inst, mu = random_instance(np.random.default_rng(seed))

        _, scanned = grid_oracle(inst, mu, BOX, 1e-2)
        exact = esc(inst, mu, solve_optimal(inst, mu).canonical)

        assert exact == pytest.approx(scanned, rel=1e-9, abs=1e-9)


class TestPairOracle:
    """Tests for the exhaustive two-facility search."""

    def test_positions_include_reports_and_quartiles(self) -> None:
        """Reports plus the μ-quantiles the optimum can use."""
        positions = pair_positions(TwoInstance(2, (5.0,)), PiecewiseUniform.uniform(0.0, 1.0))

        assert 5.0 in positions
        assert np.any(np.isclose(positions, 0.5))

    def test_limit(self) -> None:
        """At most 12 reports."""
        inst = TwoInstance(MAX_ORACLE_REPORTS, tuple(float(i) for i in range(MAX_ORACLE_REPORTS + 1)))

        with pytest.raises(DomainError):
            optimal_pair_oracle(inst, PiecewiseUniform.uniform(0.0, 1.0))

    def test_manipulation_instance(self) -> None:
        """Brute force agrees with the exact optimum of 8.875."""
        inst = TwoInstance(5, (0.0, 1.0, 1.0, 2.0, 9.0, 9.0, 9.0, 9.0))

        found = optimal_pair_oracle(inst, PiecewiseUniform.uniform(0.0, 1.0))

        assert found.cost == pytest.approx(8.875)

    def test_reports_only(self) -> None:
        """Without aleatory agents the search is over matchings and report positions."""
        found = optimal_pair_oracle(TwoInstance(2, (0.0, 0.0, 10.0, 10.0)), None)

        assert found.cost == 0.0
        assert (found.y1, found.y2) == (0.0, 10.0)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_agrees_with_solver(self, seed: int) -> None:
        """solve_optimal2 reaches the brute-force minimum."""
        inst, mu = random_two_instance(np.random.default_rng(seed))

        found = optimal_pair_oracle(inst, mu)
        exact = esc2(inst, mu, solve_optimal2(inst, mu))

        assert exact == pytest.approx(found.cost, rel=1e-6, abs=1e-9)
