"""Truthful single-facility mechanisms: the median rule and phantom quantile mechanisms.

A phantom quantile mechanism (PQM) places the facility at the median of the
reports merged with ``n_u`` phantom points, each a quantile of the
population distribution at a level fixed before any report arrives.
"""

import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from aleatory_facility.distributions import PiecewiseUniform
from aleatory_facility.errors import DimensionError, DomainError, NoReportsError, ParityError
from aleatory_facility.instance import Instance, relevant_quantiles, target_levels

logger = logging.getLogger(__name__)

SingleMechanism = Callable[[Instance, PiecewiseUniform | None], float]


def _sorted_levels(levels: Iterable[float], what: str) -> tuple[float, ...]:
    values = tuple(sorted(float(v) for v in levels))
    if any(not (0.0 <= v <= 1.0) for v in values):
        raise DomainError(f"{what} must lie in [0, 1], got {values}")
    return values


@dataclass(frozen=True)
class QueryPlan:
    """Quantile levels the designer asks about before seeing reports."""

    levels: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", _sorted_levels(self.levels, "query levels"))

    @property
    def k(self) -> int:
        return len(self.levels)

    @classmethod
    def even_grid(cls, k: int) -> "QueryPlan":
        """The plan ((2s-1)/(2k))_{s=1..k}."""
        if k < 1:
            raise DomainError(f"k must be positive, got {k}")
        return cls(tuple((2 * s - 1) / (2 * k) for s in range(1, k + 1)))

    def is_even_grid(self, tol: float = 1e-12) -> bool:
        if self.k == 0:
            return False
        grid = QueryPlan.even_grid(self.k).levels
        return all(abs(a - b) <= tol for a, b in zip(self.levels, grid))


@dataclass(frozen=True)
class PhantomVector:
    """One quantile level per aleatory agent."""

    levels: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", _sorted_levels(self.levels, "phantom levels"))

    def __len__(self) -> int:
        return len(self.levels)

    def realize(self, mu: PiecewiseUniform) -> NDArray[np.float64]:
        """Phantom positions F_μ^{-1}(w_j); level 0 maps to the bottom of the support."""
        return mu.quantiles(self.levels, allow_zero=True)


def median_of(v: Sequence[float] | NDArray[np.float64]) -> float:
    """Element of rank ceil(m/2) in sorted order (lower median for even m)."""
    values = np.sort(np.asarray(v, dtype=float).reshape(-1))
    if len(values) == 0:
        raise DomainError("median of an empty vector")
    return float(values[(len(values) + 1) // 2 - 1])


def median_mechanism(inst: Instance, mu: PiecewiseUniform | None = None) -> float:
    """Median of the reports; never looks at the population distribution."""
    if inst.n_r == 0:
        raise NoReportsError("the median mechanism needs at least one report")
    return median_of(inst.x)


def pqm(inst: Instance, w: PhantomVector, mu: PiecewiseUniform | None) -> float:
    """Phantom quantile mechanism: med(x, F_μ^{-1}(w)).

    Raises:
        DimensionError: if ``len(w) != n_u``
        ParityError: if n is even
    """
    if len(w) != inst.n_u:
        raise DimensionError(f"{len(w)} phantom levels for {inst.n_u} aleatory agents")
    if inst.n % 2 == 0:
        raise ParityError(f"phantom quantile mechanisms need odd n, got n={inst.n}")
    if inst.n_u == 0:
        return median_of(inst.x)
    if mu is None:
        raise DomainError("a distribution is required to place phantoms")
    return median_of(np.concatenate((inst.x, w.realize(mu))))


def optimal_phantoms(n_u: int) -> PhantomVector:
    """Levels (2j-1)/(2n_u); with them the PQM is optimal."""
    if n_u <= 0:
        return PhantomVector(())
    return PhantomVector(tuple(target_levels(range(1, n_u + 1), n_u)))


def _nearest_level(levels: NDArray[np.float64], targets: NDArray[np.float64]) -> NDArray[np.intp]:
    # argmin returns the first index on exact ties, i.e. the lower level
    return np.argmin(np.abs(targets[:, np.newaxis] - levels[np.newaxis, :]), axis=1)


def _relevant(n_r: int, n_u: int, relevant: Sequence[int] | None) -> list[int]:
    if relevant is not None:
        indices = sorted(int(j) for j in relevant)
        if not indices or indices[0] < 1 or indices[-1] > n_u:
            raise DomainError(f"relevant indices must lie in [1, {n_u}], got {indices}")
        return indices
    return relevant_quantiles(n_r, n_u)


def lift(
    q: QueryPlan,
    n_r: int,
    n_u: int,
    relevant: Sequence[int] | None = None,
) -> PhantomVector:
    """Expand a k-level plan into one phantom level per aleatory agent.

    Every relevant index j is mapped to the level of ``q`` nearest to its
    target (2j-1)/(2n_u), ties going to the lower level. Entry j of the
    result is that level; indices below (above) the relevant range copy the
    level of the lowest (highest) relevant index, so the vector stays sorted
    and index-aligned with the targets.

    Args:
        q: Query plan, at least one level
        n_r: Number of reports
        n_u: Number of aleatory agents
        relevant: Indices to align on; defaults to the relevant quantiles
            of (n_r, n_u), which needs n odd

    Returns:
        PhantomVector of length n_u
    """
    if q.k == 0:
        raise DomainError("cannot lift an empty query plan")
    if n_u == 0:
        return PhantomVector(())
    indices = _relevant(n_r, n_u, relevant)
    levels = np.asarray(q.levels)
    chosen = levels[_nearest_level(levels, target_levels(indices, n_u))]
    by_index = dict(zip(indices, chosen))
    lo_j, hi_j = indices[0], indices[-1]
    w = [by_index[min(max(j, lo_j), hi_j)] for j in range(1, n_u + 1)]
    return PhantomVector(tuple(float(v) for v in w))


def delta(w: PhantomVector, n_r: int, n_u: int) -> float:
    """Largest gap |w_j - (2j-1)/(2n_u)| over the relevant indices."""
    if len(w) != n_u:
        raise DimensionError(f"{len(w)} phantom levels for {n_u} aleatory agents")
    if n_u == 0:
        return 0.0
    indices = relevant_quantiles(n_r, n_u)
    values = np.asarray(w.levels)[np.asarray(indices) - 1]
    return float(np.max(np.abs(values - target_levels(indices, n_u))))


def delta_lift(q: QueryPlan, n_r: int, n_u: int) -> float:
    """Largest distance from a relevant target to the nearest level of ``q``."""
    if q.k == 0:
        raise DomainError("empty query plan")
    if n_u == 0:
        return 0.0
    indices = relevant_quantiles(n_r, n_u)
    levels = np.asarray(q.levels)
    targets = target_levels(indices, n_u)
    nearest = levels[_nearest_level(levels, targets)]
    return float(np.max(np.abs(nearest - targets)))


def optimal_query_plan(k: int, n_r: int, n_u: int) -> QueryPlan:
    """Best k-level plan: midpoints of k contiguous, near-equal blocks of relevant targets.

    With r = |R| mod k the first r blocks hold one extra target. When k
    exceeds |R| every relevant target gets its own level and the spare
    levels take the remaining targets (2j-1)/(2n_u). For k > n_u the plan is
    clamped to the full-information levels.
    """
    if k < 1:
        raise DomainError(f"k must be positive, got {k}")
    if k > n_u:
        logger.warning("k=%d exceeds n_u=%d; clamping to the full-information plan", k, n_u)
        return QueryPlan(optimal_phantoms(n_u).levels)
    indices = relevant_quantiles(n_r, n_u)
    targets = target_levels(indices, n_u)
    m = len(targets)
    if k >= m:
        others = [j for j in range(1, n_u + 1) if j not in set(indices)]
        extra = target_levels(others[: k - m], n_u)
        return QueryPlan(tuple(np.concatenate((targets, extra))))

    base, r = divmod(m, k)
    levels = []
    start = 0
    for s in range(k):
        size = base + (1 if s < r else 0)
        block = targets[start : start + size]
        levels.append((block[0] + block[-1]) / 2.0)
        start += size
    return QueryPlan(tuple(levels))


# Mechanism handles: callables (instance, mu) -> facility position


def fixed_placement(y: float) -> SingleMechanism:
    """Mechanism that ignores its input and always answers ``y``."""

    def respond(inst: Instance, mu: PiecewiseUniform | None) -> float:
        return float(y)

    return respond


def phantom_mechanism(phantoms_for: Callable[[Instance], PhantomVector]) -> SingleMechanism:
    """PQM whose phantom levels are chosen from the instance shape."""

    def respond(inst: Instance, mu: PiecewiseUniform | None) -> float:
        return pqm(inst, phantoms_for(inst), mu)

    return respond


def optimal_pqm() -> SingleMechanism:
    """PQM with phantoms at (2j-1)/(2n_u)."""
    return phantom_mechanism(lambda inst: optimal_phantoms(inst.n_u))


def lifted_pqm(q: QueryPlan) -> SingleMechanism:
    """PQM with the lift of ``q``."""
    return phantom_mechanism(lambda inst: lift(q, inst.n_r, inst.n_u))


def median_info_pqm() -> SingleMechanism:
    """PQM with every phantom at the median of μ."""
    return phantom_mechanism(lambda inst: PhantomVector((0.5,) * inst.n_u))


def mean_of_reports(inst: Instance, mu: PiecewiseUniform | None = None) -> float:
    """Average report. Manipulable; used to check that the fuzzer finds violations."""
    if inst.n_r == 0:
        raise NoReportsError("mean of no reports")
    return float(np.mean(inst.x))
