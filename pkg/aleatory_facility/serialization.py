"""JSON and CSV input/output for experiment configs and results."""

import json
import math
import sys
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import pandas as pd

from aleatory_facility.adversary import InstanceFamily, build_family
from aleatory_facility.config import DEFAULT_CONFIG
from aleatory_facility.distributions import ConcentrationFamily, PiecewiseUniform, Side
from aleatory_facility.errors import ConfigError
from aleatory_facility.instance import Instance
from aleatory_facility.mechanisms import (
    PhantomVector,
    QueryPlan,
    fixed_placement,
    lifted_pqm,
    mean_of_reports,
    median_info_pqm,
    median_mechanism,
    optimal_pqm,
    phantom_mechanism,
)
from aleatory_facility.two_facility import (
    TwoFacilityOutcome,
    TwoInstance,
    aqm,
    cem_mechanism,
    endpoint_mechanism,
    fixed_pair,
    igm,
    pom,
    solve_optimal2,
)


def _require(obj: dict[str, Any], key: str, what: str) -> Any:
    if key not in obj:
        raise ConfigError(f"{what} is missing {key!r}")
    return obj[key]


def _int(value: Any, what: str) -> int:
    try:
        return int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be an integer, got {value!r}") from exc


def _floats(values: Any, what: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be a list of numbers") from exc


def distribution_from_json(obj: dict[str, Any]) -> PiecewiseUniform:
    """Read a distribution.

    Accepted forms::

        {"uniform": [lo, hi]}
        {"segments": [[lo, hi, mass], ...]}
        {"atoms": [[point, weight], ...], "side": "left", "ell": 100}
    """
    if "uniform" in obj:
        lo, hi = _floats(obj["uniform"], "uniform")
        return PiecewiseUniform.uniform(lo, hi)
    if "segments" in obj:
        return PiecewiseUniform.from_triples(_floats(t, "segment") for t in obj["segments"])
    if "atoms" in obj:
        atoms = tuple(_floats(a, "atom") for a in obj["atoms"])
        try:
            side = Side(obj.get("side", Side.LEFT.value))
        except ValueError as exc:
            raise ConfigError(f"unknown side {obj.get('side')!r}") from exc
        ell = _int(_require(obj, "ell", "atom distribution"), "ell")
        return ConcentrationFamily(atoms, side).realize(ell)
    raise ConfigError("distribution needs one of 'uniform', 'segments' or 'atoms'")


def instance_from_json(obj: dict[str, Any]) -> Instance:
    """{"n": int, "reports": [...]}"""
    return Instance(_int(_require(obj, "n", "instance"), "n"), _floats(obj.get("reports", []), "reports"))


def two_instance_from_json(obj: dict[str, Any]) -> TwoInstance:
    """{"c": int, "reports": [...]}"""
    return TwoInstance(_int(_require(obj, "c", "two-facility instance"), "c"), _floats(obj.get("reports", []), "reports"))


def plan_from_json(value: Any) -> QueryPlan:
    """A list of levels, ``{"levels": [...]}`` or ``{"even_grid": k}``."""
    if isinstance(value, dict) and "levels" in value:
        return QueryPlan(_floats(value["levels"], "plan"))
    if isinstance(value, dict):
        return QueryPlan.even_grid(_int(_require(value, "even_grid", "plan"), "even_grid"))
    return QueryPlan(_floats(value, "plan"))


@dataclass(frozen=True)
class MechanismSpec:
    """A mechanism chosen by name in a config file."""

    name: str
    mechanism: Callable[..., Any]
    two_facility: bool


_PLANNED: dict[str, tuple[Callable[[QueryPlan], Callable[..., Any]], bool]] = {
    "lifted-pqm": (lifted_pqm, False),
    "cem": (cem_mechanism, True),
    "endpoint": (endpoint_mechanism, True),
}

_PLAIN: dict[str, tuple[Callable[..., Any], bool]] = {
    "median": (median_mechanism, False),
    "optimal-pqm": (optimal_pqm(), False),
    "median-pqm": (median_info_pqm(), False),
    "mean": (mean_of_reports, False),
    "pom": (pom, True),
    "aqm": (aqm, True),
    "igm": (igm, True),
    "optimal2": (solve_optimal2, True),
}


def mechanism_from_json(obj: dict[str, Any]) -> MechanismSpec:
    """Resolve ``{"name": ..., "plan": ..., "phantoms": ..., "y": ...}`` to a callable."""
    name = _require(obj, "name", "mechanism")
    if name in _PLAIN:
        mechanism, two = _PLAIN[name]
        return MechanismSpec(name, mechanism, two)
    if name in _PLANNED:
        build, two = _PLANNED[name]
        return MechanismSpec(name, build(plan_from_json(_require(obj, "plan", name))), two)
    if name == "pqm":
        phantoms = PhantomVector(_floats(_require(obj, "phantoms", name), "phantoms"))
        return MechanismSpec(name, phantom_mechanism(lambda inst: phantoms), False)
    if name == "fixed":
        return MechanismSpec(name, fixed_placement(float(_require(obj, "y", name))), False)
    if name == "fixed-pair":
        y1, y2 = _floats(_require(obj, "y", name), "y")
        return MechanismSpec(name, fixed_pair(y1, y2), True)
    known = ", ".join(sorted([*_PLAIN, *_PLANNED, "pqm", "fixed", "fixed-pair"]))
    raise ConfigError(f"unknown mechanism {name!r}; expected one of {known}")


def family_from_json(obj: dict[str, Any]) -> InstanceFamily:
    """{"name": "zero", "n": 5, "n_r": 3}; a "q" entry is read as a query plan."""
    params = {k: v for k, v in obj.items() if k != "name"}
    if "q" in params:
        params["q"] = plan_from_json(params["q"])
    return build_family(_require(obj, "name", "family"), **params)


def _rounded(value: Any) -> Any:
    if isinstance(value, float):
        if math.isinf(value) or math.isnan(value):
            return str(value)
        return float(f"{value:.{DEFAULT_CONFIG.significant_digits}g}")
    if isinstance(value, dict):
        return {k: _rounded(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_rounded(v) for v in value]
    return value


def outcome_to_json(out: TwoFacilityOutcome) -> dict[str, Any]:
    return {"y": [out.y1, out.y2], "matching": list(out.matching), "z": out.threshold_z}


def dumps(payload: dict[str, Any]) -> str:
    """JSON text with every float cut to the configured significant digits."""
    return json.dumps(_rounded(payload), indent=2, sort_keys=True) + "\n"


def write_json(path: Path | None, payload: dict[str, Any]) -> None:
    """Write ``payload`` to ``path``, or to stdout when no path is given."""
    text = dumps(payload)
    if path is None:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def write_csv(path: Path | None, frame: pd.DataFrame) -> None:
    float_format = DEFAULT_CONFIG.float_format
    if path is None:
        frame.to_csv(sys.stdout, index=False, float_format=float_format, lineterminator="\n")
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=float_format, lineterminator="\n")
