"""Tests for reading configs sections and writing results."""

import json
import math
from pathlib import Path

import pandas as pd
import pytest

from aleatory_facility.errors import ConfigError, InvalidFamilyError
from aleatory_facility.instance import Instance
from aleatory_facility.serialization import (
    distribution_from_json,
    dumps,
    family_from_json,
    instance_from_json,
    mechanism_from_json,
    outcome_to_json,
    plan_from_json,
    two_instance_from_json,
    write_csv,
    write_json,
)
from aleatory_facility.two_facility import TwoFacilityOutcome, TwoInstance


class TestDistribution:
    """Tests for distribution_from_json."""

    def test_uniform(self) -> None:
        """{"uniform": [lo, hi]}."""
        assert distribution_from_json({"uniform": [0, 2]}).support == (0.0, 2.0)

    def test_segments(self) -> None:
        """Explicit (lo, hi, mass) triples."""
        d = distribution_from_json({"segments": [[0, 1, 0.25], [2, 3, 0.75]]})

        assert d.cdf(1.5) == pytest.approx(0.25)

    def test_atoms(self) -> None:
        """A realized concentration family."""
        d = distribution_from_json({"atoms": [[0, 0.5], [1, 0.5]], "side": "right", "ell": 4})

        assert d.support == (0.0, 1.25)

    def test_atoms_need_ell(self) -> None:
        """ell is required for atoms."""
        with pytest.raises(ConfigError):
            distribution_from_json({"atoms": [[0, 1]]})

    def test_unknown_side(self) -> None:
        """Side must be left, right or centered."""
        with pytest.raises(ConfigError):
            distribution_from_json({"atoms": [[0, 1]], "side": "up", "ell": 2})

    def test_unknown_form(self) -> None:
        """Some form must be present."""
        with pytest.raises(ConfigError):
            distribution_from_json({"normal": [0, 1]})

    def test_bad_numbers(self) -> None:
        """Non-numeric values raise ConfigError."""
        with pytest.raises(ConfigError):
            distribution_from_json({"uniform": ["a", 1]})


class TestInstances:
    """Tests for instance readers."""

    def test_single(self) -> None:
        """{"n", "reports"}."""
        assert instance_from_json({"n": 3, "reports": [2, 1]}) == Instance(3, (1.0, 2.0))

    def test_two(self) -> None:
        """{"c", "reports"}."""
        assert two_instance_from_json({"c": 2, "reports": [0]}) == TwoInstance(2, (0.0,))

    def test_missing_capacity(self) -> None:
        """n is required."""
        with pytest.raises(ConfigError):
            instance_from_json({"reports": [0]})

    def test_non_integer_capacity(self) -> None:
        """n must parse as an integer."""
        with pytest.raises(ConfigError):
            instance_from_json({"n": "three"})


class TestPlansAndMechanisms:
    """Tests for plan and mechanism readers."""

    def test_plan_forms(self) -> None:
        """A list, a levels object or an even grid."""
        assert plan_from_json([0.5]).levels == (0.5,)
        assert plan_from_json({"levels": [0.9, 0.1]}).levels == (0.1, 0.9)
        assert plan_from_json({"even_grid": 2}).levels == (0.25, 0.75)

    @pytest.mark.parametrize(
        "name, two_facility",
        [("median", False), ("optimal-pqm", False), ("mean", False), ("pom", True), ("optimal2", True)],
    )
    def test_plain_names(self, name: str, two_facility: bool) -> None:
        """Named mechanisms resolve with their facility count."""
        spec = mechanism_from_json({"name": name})

        assert spec.name == name
        assert spec.two_facility is two_facility

    def test_planned(self) -> None:
        """CEM takes a plan."""
        spec = mechanism_from_json({"name": "cem", "plan": {"even_grid": 2}})

        out = spec.mechanism(TwoInstance(3, (0.1, 0.2, 0.8, 0.9)), distribution_from_json({"uniform": [0, 1]}))

        assert out.y == pytest.approx((0.2, 0.8))

    def test_planned_needs_plan(self) -> None:
        """A planned mechanism without a plan is a ConfigError."""
        with pytest.raises(ConfigError):
            mechanism_from_json({"name": "lifted-pqm"})

    def test_phantoms(self) -> None:
        """Explicit phantom levels."""
        spec = mechanism_from_json({"name": "pqm", "phantoms": [0.25, 0.75]})

        assert spec.mechanism(Instance(3, (0.0,)), distribution_from_json({"uniform": [0, 1]})) == pytest.approx(0.25)

    def test_fixed(self) -> None:
        """Fixed single and pair placements."""
        assert mechanism_from_json({"name": "fixed", "y": 0.3}).mechanism(Instance(1, (5.0,)), None) == 0.3
        pair = mechanism_from_json({"name": "fixed-pair", "y": [0.75, 0.25]})

        assert pair.two_facility
        assert pair.mechanism(TwoInstance(1, (0.0, 1.0)), None).y == (0.25, 0.75)

    def test_unknown(self) -> None:
        """Unknown names list the known ones."""
        with pytest.raises(ConfigError, match="median"):
            mechanism_from_json({"name": "dictator"})


class TestFamily:
    """Tests for family_from_json."""

    def test_lifted_with_plan(self) -> None:
        """The q entry becomes a query plan."""
        family = family_from_json({"name": "lifted", "n_r": 5, "n_u": 10, "q": {"even_grid": 2}})

        assert family.limit_claim == pytest.approx(19 / 11)

    def test_unknown(self) -> None:
        """Unknown family names."""
        with pytest.raises(InvalidFamilyError):
            family_from_json({"name": "nope"})


class TestWriters:
    """Tests for JSON and CSV output."""

    def test_dumps_rounds(self) -> None:
        """Floats are cut to 12 significant digits; infinities become strings."""
        payload = json.loads(dumps({"a": 0.1 + 0.2, "b": [math.inf, 1], "c": {"d": 2 / 3}}))

        assert payload == {"a": 0.3, "b": ["inf", 1], "c": {"d": 0.666666666667}}

    def test_dumps_sorted_with_newline(self) -> None:
        """Keys are sorted and the text ends in a newline."""
        text = dumps({"b": 1, "a": 2})

        assert text.index('"a"') < text.index('"b"')
        assert text.endswith("\n")

    def test_outcome(self) -> None:
        """Outcome as y, matching and z."""
        out = TwoFacilityOutcome(0.0, 1.0, (1, 2), 0.5)

        assert outcome_to_json(out) == {"y": [0.0, 1.0], "matching": [1, 2], "z": 0.5}

    def test_write_json_creates_parents(self, tmp_path: Path) -> None:
        """Parent directories are created."""
        path = tmp_path / "nested" / "out.json"

        write_json(path, {"x": 1.0})

        assert json.loads(path.read_text()) == {"x": 1.0}

    def test_write_json_stdout(self, capsys: pytest.CaptureFixture[str]) -> None:
        """No path writes to stdout."""
        write_json(None, {"x": 1})

        assert json.loads(capsys.readouterr().out) == {"x": 1}

    def test_write_csv(self, tmp_path: Path) -> None:
        """CSV without index, floats in %.12g."""
        path = tmp_path / "table.csv"

        write_csv(path, pd.DataFrame({"ell": [10], "ratio": [2 / 3]}))

        assert path.read_text() == "ell,ratio\n10,0.666666666667\n"
