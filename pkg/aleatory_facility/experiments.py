"""Batch experiments behind the command line: one function per command."""

import logging
import math
from collections.abc import Callable
from fractions import Fraction
from typing import Any

import pandas as pd

from aleatory_facility.adversary import (
    InstanceFamily,
    empirical_sar,
    manipulation_example,
    ratio_of,
    single_facility_sampler,
    truthfulness_fuzz,
    two_facility_sampler,
)
from aleatory_facility.bounds import Regime, sar_lower, sar_upper, sar_upper_even_grid
from aleatory_facility.config import DEFAULT_CONFIG, Command, ExperimentConfig
from aleatory_facility.errors import ConfigError
from aleatory_facility.instance import Instance, esc, solve_optimal
from aleatory_facility.mechanisms import optimal_query_plan
from aleatory_facility.serialization import (
    MechanismSpec,
    distribution_from_json,
    family_from_json,
    instance_from_json,
    mechanism_from_json,
    outcome_to_json,
    two_instance_from_json,
    write_csv,
    write_json,
)
from aleatory_facility.two_facility import TwoInstance, esc2, solve_optimal2

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ["lambda", "k", "upper", "lower", "n", "n_r", "regime", "comparable"]


def _section(config: ExperimentConfig, name: str) -> dict[str, Any]:
    value = getattr(config, name)
    if value is None:
        raise ConfigError(f"command {config.command.value!r} needs a {name!r} section")
    return value


def _load_instance(obj: dict[str, Any]) -> Instance | TwoInstance:
    return two_instance_from_json(obj) if "c" in obj else instance_from_json(obj)


def _distribution(config: ExperimentConfig) -> Any:
    return distribution_from_json(config.distribution) if config.distribution is not None else None


def _mechanism(config: ExperimentConfig, family: InstanceFamily | None = None) -> MechanismSpec:
    if config.mechanism is not None:
        return mechanism_from_json(config.mechanism)
    if family is not None:
        return MechanismSpec(family.name, family.mechanism, family.two_facility)
    raise ConfigError(f"command {config.command.value!r} needs a 'mechanism' section")


def run_solve(config: ExperimentConfig) -> dict[str, Any]:
    inst = instance_from_json(_section(config, "instance"))
    mu = _distribution(config)
    optimum = solve_optimal(inst, mu)
    return {
        "lo": optimum.lo,
        "hi": optimum.hi,
        "canonical": optimum.canonical,
        "esc": esc(inst, mu, optimum.canonical),
    }


def _evaluate(spec: MechanismSpec, inst: Instance | TwoInstance, mu: Any) -> dict[str, Any]:
    if spec.two_facility != isinstance(inst, TwoInstance):
        kind = "two-facility" if spec.two_facility else "single-facility"
        raise ConfigError(f"mechanism {spec.name!r} needs a {kind} instance")
    if isinstance(inst, TwoInstance):
        out = spec.mechanism(inst, mu)
        cost = esc2(inst, mu, out)
        optimum = esc2(inst, mu, solve_optimal2(inst, mu))
        result: dict[str, Any] = {"outcome": outcome_to_json(out)}
    else:
        y = spec.mechanism(inst, mu)
        cost = esc(inst, mu, y)
        optimum = esc(inst, mu, solve_optimal(inst, mu).canonical)
        result = {"y": y}
    result.update({"mechanism": spec.name, "esc": cost, "optimal_esc": optimum, "ratio": ratio_of(cost, optimum)})
    return result


def run_mech(config: ExperimentConfig) -> dict[str, Any]:
    if config.family is not None:
        family = family_from_json(config.family)
        ell = config.ells[-1]
        inst, mu = family.generate(ell)
        result = _evaluate(_mechanism(config, family), inst, mu)
        result.update({"family": family.name, "ell": ell, "limit_claim": family.limit_claim})
        return result
    inst = _load_instance(_section(config, "instance"))
    return _evaluate(_mechanism(config), inst, _distribution(config))


def run_two_fac(config: ExperimentConfig) -> dict[str, Any]:
    inst = two_instance_from_json(_section(config, "instance"))
    mu = _distribution(config)
    if config.mechanism is None:
        spec = MechanismSpec("optimal2", solve_optimal2, True)
    else:
        spec = mechanism_from_json(config.mechanism)
    return _evaluate(spec, inst, mu)


def run_adversary(config: ExperimentConfig) -> pd.DataFrame:
    family = family_from_json(_section(config, "family"))
    spec = _mechanism(config, family)
    trace = empirical_sar(spec.mechanism, family, config.ells)
    logger.info(
        "%s: final ratio %.12g, limit %.12g, diverged=%s",
        family.name,
        trace.final,
        trace.limit_claim,
        trace.diverged,
    )
    return trace.to_frame()


def run_fuzz(config: ExperimentConfig) -> dict[str, Any]:
    spec = mechanism_from_json(_section(config, "mechanism"))
    if spec.two_facility:
        regime = config.extra.get("regime", "any")
        sampler = two_facility_sampler(regime, min_capacity=int(config.extra.get("min_capacity", 1)))
    else:
        sampler = single_facility_sampler()
    extra_cases = [manipulation_example()] if spec.name == "optimal2" else []
    report = truthfulness_fuzz(spec.mechanism, config.trials, config.seed, sampler, extra_cases)
    result: dict[str, Any] = {
        "mechanism": spec.name,
        "trials": report.trials,
        "checked": report.checked,
        "seed": config.seed,
        "worst_regret": report.worst_regret,
        "truthful": report.is_truthful(),
    }
    if report.witness is not None and report.worst_regret > 0.0:
        w = report.witness
        result["witness"] = {
            "reports": list(w.instance.reports),
            "index": w.index,
            "misreport": w.misreport,
            "truthful_cost": w.truthful_cost,
            "deviating_cost": w.deviating_cost,
        }
    return result


def _ints(value: Any, what: str) -> list[int]:
    values = value if isinstance(value, list) else [value]
    try:
        return [int(v) for v in values]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sweep {what!r} must hold integers") from exc


def _sweep_pairs(sweep: dict[str, Any]) -> list[tuple[int, int]]:
    ns = _ints(sweep.get("n", []), "n")
    if not ns:
        raise ConfigError("sweep needs at least one 'n'")
    if "lambdas" in sweep:
        pairs = []
        for n in ns:
            for text in sweep["lambdas"]:
                share = Fraction(str(text)) * n
                if share.denominator != 1:
                    raise ConfigError(f"lambda {text} times n={n} is not an integer")
                pairs.append((n, int(share)))
        return pairs
    return [(n, n_r) for n in ns for n_r in _ints(sweep.get("n_r", []), "n_r") if n_r <= n]


def bound_row(n: int, n_r: int, k: int) -> dict[str, Any]:
    """Upper and lower SAR bounds for one (n, n_r, k) cell of the table.

    k = 0 is the zero-information regime, k = 1 the median regime and
    k >= n_u full information. In between, when k | n_u, both sides are the
    even-grid bounds and the row is comparable only when lower <= upper,
    since the two closed forms cross on part of the grid. Otherwise the upper
    bound uses the best k-level plan and the lower bound is missing.
    """
    n_u = n - n_r
    if k < 0:
        raise ConfigError(f"k must be non-negative, got {k}")
    if k == 0 or k >= n_u:
        regime = Regime.ZERO if k == 0 else Regime.FULL
        upper, lower = sar_upper(regime, n, n_r), sar_lower(regime, n, n_r)
        comparable = True
    elif k == 1:
        regime = Regime.MEDIAN
        upper = sar_upper(Regime.MEDIAN, n, n_r)
        lower = sar_lower(Regime.MEDIAN, n, n_r, asymptotic=True)
        comparable = n_u >= 2
    else:
        regime = Regime.K_QUANTILE
        if n_u % k == 0:
            upper = sar_upper_even_grid(n, n_r, k)
            lower = sar_lower(Regime.K_QUANTILE, n, n_r, k=k)
            comparable = lower <= upper + DEFAULT_CONFIG.tie_tolerance
        else:
            upper = sar_upper(Regime.K_QUANTILE, n, n_r, q=optimal_query_plan(k, n_r, n_u))
            lower = math.nan
            comparable = False
    return {
        "lambda": n_r / n,
        "k": k,
        "upper": float(upper),
        "lower": float(lower),
        "n": n,
        "n_r": n_r,
        "regime": regime.value,
        "comparable": comparable,
    }


def run_sar_table(config: ExperimentConfig) -> pd.DataFrame:
    sweep = _section(config, "sweep")
    ks = _ints(sweep.get("k", [0, 1]), "k")
    rows = [bound_row(n, n_r, k) for n, n_r in _sweep_pairs(sweep) for k in ks]
    logger.debug("sar table with %d rows", len(rows))
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


_JSON_COMMANDS: dict[Command, Callable[[ExperimentConfig], dict[str, Any]]] = {
    Command.SOLVE: run_solve,
    Command.MECH: run_mech,
    Command.TWO_FAC: run_two_fac,
    Command.FUZZ: run_fuzz,
}

_CSV_COMMANDS: dict[Command, Callable[[ExperimentConfig], pd.DataFrame]] = {
    Command.SAR_TABLE: run_sar_table,
    Command.ADVERSARY: run_adversary,
}


def run(config: ExperimentConfig) -> int:
    """Run one experiment and write its artifact to ``config.out`` (stdout if unset).

    Returns:
        Exit status, 0 on success; library errors propagate to the caller
    """
    logger.info("running %s", config.command.value)
    if config.command in _CSV_COMMANDS:
        write_csv(config.out, _CSV_COMMANDS[config.command](config))
    else:
        write_json(config.out, _JSON_COMMANDS[config.command](config))
    return 0
