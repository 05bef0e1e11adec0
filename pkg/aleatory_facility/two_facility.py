"""Two facilities of equal capacity: cost, exact optimum and the truthful mechanisms POM, AQM, IGM and CEM.

Reported agents are matched to facilities explicitly. Aleatory agents fill
the spare capacity: the lowest ``n_u^(1) / n_u`` of the population mass goes
to facility 1, the rest to facility 2.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from aleatory_facility.config import DEFAULT_CONFIG
from aleatory_facility.distributions import PiecewiseUniform
from aleatory_facility.errors import (
    DimensionError,
    DomainError,
    InfeasibleOutcomeError,
    NoBoundedMechanismError,
    RegimeError,
    UnsupportedPlanError,
)
from aleatory_facility.instance import population_crossing
from aleatory_facility.mechanisms import QueryPlan, lift, optimal_phantoms

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TwoInstance:
    """Two facilities of capacity ``c`` each and the sorted reports."""

    c: int
    reports: tuple[float, ...] = ()
    _x: NDArray[np.float64] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if int(self.c) != self.c or self.c < 1:
            raise DomainError(f"capacity must be a positive integer, got {self.c!r}")
        x = np.sort(np.asarray(self.reports, dtype=float).reshape(-1))
        if len(x) > 2 * self.c:
            raise DomainError(f"{len(x)} reports exceed total capacity {2 * self.c}")
        if np.any(~np.isfinite(x)):
            raise DomainError("reports must be finite")
        object.__setattr__(self, "c", int(self.c))
        object.__setattr__(self, "reports", tuple(float(v) for v in x))
        object.__setattr__(self, "_x", x)

    @property
    def x(self) -> NDArray[np.float64]:
        return self._x

    @property
    def n(self) -> int:
        return 2 * self.c

    @property
    def n_r(self) -> int:
        return len(self.reports)

    @property
    def n_u(self) -> int:
        return self.n - self.n_r

    def replace_report(self, index: int, value: float) -> "TwoInstance":
        values = list(self.reports)
        values[index] = value
        return TwoInstance(self.c, tuple(values))


@dataclass(frozen=True)
class TwoFacilityOutcome:
    """Facility pair, report-to-facility matching and the aleatory split point.

    ``matching[i]`` is the facility (1 or 2) serving the i-th sorted report.
    ``threshold_z`` is None when there are no aleatory agents.
    """

    y1: float
    y2: float
    matching: tuple[int, ...]
    threshold_z: float | None

    def __post_init__(self) -> None:
        if self.y1 > self.y2:
            raise DomainError(f"facilities must be ordered, got ({self.y1}, {self.y2})")
        if any(j not in (1, 2) for j in self.matching):
            raise DomainError(f"matching entries must be 1 or 2, got {self.matching}")

    @property
    def y(self) -> tuple[float, float]:
        return self.y1, self.y2

    def load(self, facility: int) -> int:
        """Number of reported agents matched to ``facility``."""
        return sum(1 for j in self.matching if j == facility)

    def spares(self, c: int) -> tuple[int, int]:
        """Capacity left for aleatory agents at each facility."""
        return c - self.load(1), c - self.load(2)

    def position_of(self, facility: int) -> float:
        return self.y1 if facility == 1 else self.y2


TwoMechanism = Callable[[TwoInstance, PiecewiseUniform | None], TwoFacilityOutcome]


def aleatory_threshold(mu: PiecewiseUniform | None, spare1: int, n_u: int) -> float | None:
    """F_μ^{-1}(spare1 / n_u); mass at or below it goes to facility 1."""
    if n_u == 0:
        return None
    if mu is None:
        raise DomainError("a distribution is required when aleatory agents are present")
    return mu.quantile(spare1 / n_u, allow_zero=True)


def _validate(inst: TwoInstance, out: TwoFacilityOutcome) -> tuple[int, int]:
    if len(out.matching) != inst.n_r:
        raise DimensionError(f"matching covers {len(out.matching)} of {inst.n_r} reports")
    spare1, spare2 = out.spares(inst.c)
    if spare1 < 0 or spare2 < 0:
        raise InfeasibleOutcomeError(
            f"loads ({out.load(1)}, {out.load(2)}) exceed capacity {inst.c}"
        )
    return spare1, spare2


def personal_costs(inst: TwoInstance, out: TwoFacilityOutcome) -> NDArray[np.float64]:
    """Distance from every sorted report to its matched facility."""
    facilities = np.where(np.asarray(out.matching) == 1, out.y1, out.y2)
    return np.abs(inst.x - facilities) if inst.n_r else np.zeros(0)


def esc2(inst: TwoInstance, mu: PiecewiseUniform | None, out: TwoFacilityOutcome) -> float:
    """Expected social cost of an outcome: matched distances plus the split aleatory term.

    Raises:
        InfeasibleOutcomeError: if a facility is matched to more than c reports
    """
    spare1, _ = _validate(inst, out)
    deterministic = float(personal_costs(inst, out).sum())
    if inst.n_u == 0:
        return deterministic
    z = out.threshold_z
    if z is None:
        z = aleatory_threshold(mu, spare1, inst.n_u)
    left = mu.abs_moment(out.y1, upper=z)
    right = mu.abs_moment(out.y2, lower=z)
    return deterministic + inst.n_u * (left + right)


def expected_loads(inst: TwoInstance, mu: PiecewiseUniform | None, out: TwoFacilityOutcome) -> tuple[float, float]:
    """Matched reports plus the expected number of aleatory agents at each facility."""
    spare1, _ = _validate(inst, out)
    if inst.n_u == 0:
        return float(out.load(1)), float(out.load(2))
    z = out.threshold_z
    if z is None:
        z = aleatory_threshold(mu, spare1, inst.n_u)
    return (
        out.load(1) + inst.n_u * mu.mass_between(upper=z),
        out.load(2) + inst.n_u * mu.mass_between(lower=z),
    )


def _outcome(inst: TwoInstance, mu: PiecewiseUniform | None, y1: float, y2: float, k1: int) -> TwoFacilityOutcome:
    matching = (1,) * k1 + (2,) * (inst.n_r - k1)
    return TwoFacilityOutcome(
        y1=float(y1),
        y2=float(y2),
        matching=matching,
        threshold_z=aleatory_threshold(mu, inst.c - k1, inst.n_u),
    )


def nearest_assignment(inst: TwoInstance, mu: PiecewiseUniform | None, y1: float, y2: float) -> TwoFacilityOutcome:
    """Match every report to its nearest facility under the capacity cap.

    Ties go to facility 1. If a facility would exceed ``c``, the agents
    closest to the midpoint move to the other one, so facility 1 always
    serves a prefix of the sorted reports.
    """
    if y1 == y2:
        k1 = inst.n_r
    else:
        k1 = int(np.searchsorted(inst.x, (y1 + y2) / 2.0, side="right"))
    clamped = min(max(k1, inst.n_r - inst.c), inst.c)
    if clamped != k1:
        logger.debug("capacity overflow: moved %d agents across the midpoint", abs(clamped - k1))
    return _outcome(inst, mu, y1, y2, clamped)


def merged_profile(inst: TwoInstance, phantoms: NDArray[np.float64]) -> NDArray[np.float64]:
    """Reports and phantom positions, sorted together."""
    return np.sort(np.concatenate((inst.x, phantoms)))


def _optimal_phantom_positions(inst: TwoInstance, mu: PiecewiseUniform | None) -> NDArray[np.float64]:
    if inst.n_u == 0:
        return np.zeros(0)
    if mu is None:
        raise DomainError("a distribution is required to place phantoms")
    return optimal_phantoms(inst.n_u).realize(mu)


def _amended_quartiles(inst: TwoInstance, z: NDArray[np.float64]) -> tuple[float, float]:
    c, n, x = inst.c, inst.n, inst.x
    y1 = max(x[inst.n_r - c - 1], z[math.ceil(c / 2) - 1])
    y2 = min(x[c], z[n - c // 2 - 1])
    return float(y1), float(y2)


def pom(inst: TwoInstance, mu: PiecewiseUniform | None) -> TwoFacilityOutcome:
    """Pseudo optimal mechanism, for n_r <= c: quartile order statistics of reports plus optimal phantoms."""
    if inst.n_r > inst.c:
        raise RegimeError(f"POM needs n_r <= c, got n_r={inst.n_r}, c={inst.c}; use AQM")
    z = merged_profile(inst, _optimal_phantom_positions(inst, mu))
    y1 = z[(inst.c + 1) // 2 - 1]
    y2 = z[inst.n - inst.c // 2 - 1]
    return nearest_assignment(inst, mu, float(y1), float(y2))


def aqm(inst: TwoInstance, mu: PiecewiseUniform | None) -> TwoFacilityOutcome:
    """Amended quartiles mechanism, for n_r > c.

    y1 = max(x_{n_r-c}, z_{ceil(c/2)}), y2 = min(x_{c+1}, z_{n-floor(c/2)}).
    """
    if inst.n_r <= inst.c:
        raise RegimeError(f"AQM needs n_r > c, got n_r={inst.n_r}, c={inst.c}; use POM")
    z = merged_profile(inst, _optimal_phantom_positions(inst, mu))
    y1, y2 = _amended_quartiles(inst, z)
    return nearest_assignment(inst, mu, y1, y2)


def igm(inst: TwoInstance, mu: PiecewiseUniform | None = None) -> TwoFacilityOutcome:
    """Inner gap mechanism: facilities at x_c and x_{c+1}; μ is only used to split aleatory agents.

    Raises:
        NoBoundedMechanismError: if n_r <= c
    """
    if inst.n_r <= inst.c:
        raise NoBoundedMechanismError(
            f"with n_r={inst.n_r} <= c={inst.c} and no distributional information "
            "no truthful mechanism has a bounded ratio"
        )
    return nearest_assignment(inst, mu, float(inst.x[inst.c - 1]), float(inst.x[inst.c]))


def _lifted_positions(inst: TwoInstance, mu: PiecewiseUniform | None, q: QueryPlan) -> NDArray[np.float64]:
    if inst.n_u == 0:
        return np.zeros(0)
    if mu is None:
        raise DomainError("a distribution is required to place phantoms")
    return lift(q, inst.n_r, inst.n_u, relevant=range(1, inst.n_u + 1)).realize(mu)


def endpoint_rule(inst: TwoInstance, mu: PiecewiseUniform | None, q: QueryPlan) -> TwoFacilityOutcome:
    """Facilities at the extremes of reports merged with the lifted phantoms of any plan."""
    z = merged_profile(inst, _lifted_positions(inst, mu, q))
    return nearest_assignment(inst, mu, float(z[0]), float(z[-1]))


def cem(inst: TwoInstance, mu: PiecewiseUniform | None, q: QueryPlan) -> TwoFacilityOutcome:
    """Capped endpoint mechanism for the even-grid plan ((2s-1)/(2k))_s.

    Endpoints of the merged profile when n_r <= c, amended quartiles of it
    otherwise.

    Raises:
        UnsupportedPlanError: for any other plan
    """
    if not q.is_even_grid():
        raise UnsupportedPlanError(
            f"CEM is only truthful for the even-grid plan, got levels {q.levels}"
        )
    if inst.n_r <= inst.c:
        return endpoint_rule(inst, mu, q)
    z = merged_profile(inst, _lifted_positions(inst, mu, q))
    y1, y2 = _amended_quartiles(inst, z)
    return nearest_assignment(inst, mu, y1, y2)


def _group_median(
    points: NDArray[np.float64],
    mu: PiecewiseUniform | None,
    n_u: int,
    window: tuple[float, float],
    c: int,
) -> float:
    return population_crossing(points, mu, float(n_u), c / 2.0, window=window)


def _prefix_outcome(inst: TwoInstance, mu: PiecewiseUniform | None, k1: int) -> TwoFacilityOutcome:
    """Best facility pair once the first k1 reports are sent to facility 1."""
    spare1 = inst.c - k1
    split = spare1 / inst.n_u if inst.n_u else 0.0
    y1 = _group_median(inst.x[:k1], mu, inst.n_u, (0.0, split), inst.c)
    y2 = _group_median(inst.x[k1:], mu, inst.n_u, (split, 1.0), inst.c)
    if y1 > y2:
        # crossed medians collapse onto y1 so the pair stays ordered
        y2 = y1
    return _outcome(inst, mu, y1, y2, k1)


def solve_optimal2(inst: TwoInstance, mu: PiecewiseUniform | None) -> TwoFacilityOutcome:
    """Exact optimum for two facilities.

    The pooled population is split at its median z*: reports left of z* go
    to facility 1, reports right of it to facility 2, and every way of
    dividing the reports sitting exactly at z* is tried. Each facility sits
    at the median of the population it serves, which is the pooled 0.25 and
    0.75 quantile whenever the split is exact. The remaining prefix splits
    are tried as well, so the result is optimal even when the boundary mass
    cannot be divided evenly. Ties prefer sending more reports to facility 1.
    """
    if inst.n_u > 0 and mu is None:
        raise DomainError("a distribution is required when aleatory agents are present")
    z_star = population_crossing(inst.x, mu, float(inst.n_u), float(inst.c))
    below = int(np.searchsorted(inst.x, z_star, side="left"))
    at = int(np.searchsorted(inst.x, z_star, side="right")) - below

    k_min, k_max = max(0, inst.n_r - inst.c), min(inst.n_r, inst.c)
    boundary = [below + s for s in range(at, -1, -1) if k_min <= below + s <= k_max]
    rest = [k for k in range(k_max, k_min - 1, -1) if k not in boundary]

    best: TwoFacilityOutcome | None = None
    best_cost = math.inf
    for k1 in boundary + rest:
        candidate = _prefix_outcome(inst, mu, k1)
        cost = esc2(inst, mu, candidate)
        if best is None or cost < best_cost - DEFAULT_CONFIG.tie_tolerance * max(1.0, best_cost):
            best, best_cost = candidate, cost
    assert best is not None
    return best


# Mechanism handles


def cem_mechanism(q: QueryPlan) -> TwoMechanism:
    """CEM bound to a plan, as a two-argument mechanism."""

    def respond(inst: TwoInstance, mu: PiecewiseUniform | None) -> TwoFacilityOutcome:
        return cem(inst, mu, q)

    return respond


def endpoint_mechanism(q: QueryPlan) -> TwoMechanism:
    """Endpoint rule bound to any plan; truthful only for the even grid."""

    def respond(inst: TwoInstance, mu: PiecewiseUniform | None) -> TwoFacilityOutcome:
        return endpoint_rule(inst, mu, q)

    return respond


def fixed_pair(y1: float, y2: float) -> TwoMechanism:
    """Mechanism that always opens the same two facilities."""
    lo, hi = min(y1, y2), max(y1, y2)

    def respond(inst: TwoInstance, mu: PiecewiseUniform | None) -> TwoFacilityOutcome:
        return nearest_assignment(inst, mu, lo, hi)

    return respond
