"""Numerical tolerances, experiment defaults and the per-run experiment config."""

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any

from aleatory_facility.errors import ConfigError


@dataclass(frozen=True)
class Config:
    """Library-wide tunable parameters."""

    # Tolerances
    mass_tolerance: float = 1e-12
    normalize_tolerance: float = 1e-9
    tie_tolerance: float = 1e-12
    divergence_floor: float = 1e-12

    # Adversary
    ell_schedule: tuple[int, ...] = (10, 100, 1000, 10000)
    seed: int = 0
    report_box: tuple[float, float] = (-10.0, 10.0)
    max_segments: int = 8
    max_agents: int = 15
    max_capacity: int = 5

    # Output
    significant_digits: int = 12

    @property
    def float_format(self) -> str:
        """printf-style format used for every float written by the CLI."""
        return f"%.{self.significant_digits}g"


# Default configuration instance
DEFAULT_CONFIG = Config()


class Command(Enum):
    """Experiment kinds understood by the CLI."""

    SOLVE = "solve"
    MECH = "mech"
    SAR_TABLE = "sar-table"
    ADVERSARY = "adversary"
    TWO_FAC = "two-fac"
    FUZZ = "fuzz"


@dataclass(frozen=True)
class ExperimentConfig:
    """One CLI run, loaded from a JSON file.

    The nested sections (``instance``, ``distribution``, ``mechanism``,
    ``family``, ``sweep``) are kept as plain JSON objects here and validated
    by :mod:`aleatory_facility.serialization` when the command needs them.
    """

    command: Command
    instance: dict[str, Any] | None = None
    distribution: dict[str, Any] | None = None
    mechanism: dict[str, Any] | None = None
    family: dict[str, Any] | None = None
    sweep: dict[str, Any] | None = None
    out: Path | None = None
    seed: int = DEFAULT_CONFIG.seed
    ells: tuple[int, ...] = DEFAULT_CONFIG.ell_schedule
    trials: int = 1000
    extra: dict[str, Any] = field(default_factory=dict)

    def with_overrides(
        self,
        out: Path | None = None,
        seed: int | None = None,
        ells: tuple[int, ...] | None = None,
    ) -> "ExperimentConfig":
        """Return a copy with CLI flag values taking precedence."""
        changes: dict[str, Any] = {}
        if out is not None:
            changes["out"] = out
        if seed is not None:
            changes["seed"] = seed
        if ells is not None:
            changes["ells"] = ells
        return replace(self, **changes)


_SECTIONS = ("instance", "distribution", "mechanism", "family", "sweep")


def parse_ells(text: str) -> tuple[int, ...]:
    """Parse a comma separated, strictly increasing list of positive integers."""
    try:
        ells = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"invalid ell schedule {text!r}") from exc
    _check_ells(ells)
    return ells


def _check_ells(ells: tuple[int, ...]) -> None:
    if not ells:
        raise ConfigError("ell schedule is empty")
    if any(ell < 1 for ell in ells):
        raise ConfigError(f"ell values must be positive, got {ells}")
    if any(b <= a for a, b in zip(ells, ells[1:])):
        raise ConfigError(f"ell schedule must be strictly increasing, got {ells}")


def experiment_config_from_dict(raw: dict[str, Any]) -> ExperimentConfig:
    """Build an ExperimentConfig from an already-parsed JSON object."""
    if not isinstance(raw, dict):
        raise ConfigError("experiment config must be a JSON object")
    try:
        command = Command(raw.get("command"))
    except ValueError as exc:
        names = ", ".join(c.value for c in Command)
        raise ConfigError(f"unknown command {raw.get('command')!r}; expected one of {names}") from exc

    sections = {}
    for name in _SECTIONS:
        value = raw.get(name)
        if value is not None and not isinstance(value, dict):
            raise ConfigError(f"section {name!r} must be a JSON object")
        sections[name] = value

    ells = tuple(raw.get("ells", DEFAULT_CONFIG.ell_schedule))
    _check_ells(ells)

    trials = int(raw.get("trials", 1000))
    if trials < 1:
        raise ConfigError("trials must be at least 1")

    known = {"command", "out", "seed", "ells", "trials", *_SECTIONS}
    return ExperimentConfig(
        command=command,
        out=Path(raw["out"]) if raw.get("out") else None,
        seed=int(raw.get("seed", DEFAULT_CONFIG.seed)),
        ells=ells,
        trials=trials,
        extra={k: v for k, v in raw.items() if k not in known},
        **sections,
    )


def load_experiment_config(path: Path) -> ExperimentConfig:
    """Load and validate an experiment config file.

    Args:
        path: Path to a JSON config

    Returns:
        The parsed ExperimentConfig

    Raises:
        ConfigError: if the file is unreadable, not JSON, or fails validation
    """
    try:
        raw = json.loads(path.read_text())
    except (OSError, IOError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return experiment_config_from_dict(raw)
