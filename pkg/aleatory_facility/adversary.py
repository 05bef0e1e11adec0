"""Worst-case instance families, empirical SAR traces and the truthfulness fuzzer.

Every family packages a concentration sequence μ_ℓ together with a report
vector. Driving ℓ up pushes the mechanism-to-optimum cost ratio toward the
family's limit; :func:`empirical_sar` records that trace.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd

from aleatory_facility.bounds import Regime, sar_lower, sar_upper
from aleatory_facility.config import DEFAULT_CONFIG
from aleatory_facility.distributions import ConcentrationFamily, PiecewiseUniform, Segment, Side
from aleatory_facility.errors import (
    DomainError,
    InvalidFamilyError,
    ParityError,
    RegimeError,
    UnsupportedPlanError,
)
from aleatory_facility.instance import Instance, esc, relevant_quantiles, solve_optimal, target_levels
from aleatory_facility.mechanisms import (
    QueryPlan,
    delta_lift,
    fixed_placement,
    lift,
    lifted_pqm,
    median_info_pqm,
    median_mechanism,
)
from aleatory_facility.two_facility import (
    TwoFacilityOutcome,
    TwoInstance,
    endpoint_mechanism,
    esc2,
    fixed_pair,
    solve_optimal2,
)

logger = logging.getLogger(__name__)

AnyInstance = Instance | TwoInstance
Mechanism = Callable[[Any, PiecewiseUniform | None], Any]
Generator = Callable[[int], tuple[AnyInstance, PiecewiseUniform]]


@dataclass(frozen=True)
class InstanceFamily:
    """A parameterized worst-case construction.

    Attributes:
        name: Identifier used by the CLI
        generator: Maps ℓ to an (instance, distribution) pair
        limit_claim: Ratio the mechanism under test approaches; ``inf`` for
            divergent families
        mechanism: Mechanism the construction targets
        bound: Regime-wide bound the family illustrates, when one exists
        two_facility: Whether the generator yields two-facility instances
    """

    name: str
    generator: Generator
    limit_claim: float
    mechanism: Mechanism
    description: str = ""
    bound: float | None = None
    two_facility: bool = False

    def generate(self, ell: int) -> tuple[AnyInstance, PiecewiseUniform]:
        if ell < 1:
            raise InvalidFamilyError(f"ell must be a positive integer, got {ell}")
        return self.generator(ell)


@dataclass(frozen=True)
class RatioTrace:
    """Cost ratios of a mechanism along an ℓ schedule; ``inf`` marks divergence."""

    ells: tuple[int, ...]
    ratios: tuple[float, ...]
    limit_claim: float

    def __post_init__(self) -> None:
        if len(self.ells) != len(self.ratios):
            raise DomainError("one ratio per ell is required")
        if any(b <= a for a, b in zip(self.ells, self.ells[1:])):
            raise DomainError(f"ell schedule must be strictly increasing, got {self.ells}")

    @property
    def final(self) -> float:
        return self.ratios[-1]

    @property
    def diverged(self) -> bool:
        """True if a ratio hit the sentinel or the family claims no finite limit."""
        return math.isinf(self.limit_claim) or any(math.isinf(r) for r in self.ratios)

    def is_nondecreasing(self, tol: float = 1e-6, skip_first: bool = True) -> bool:
        values = self.ratios[1:] if skip_first else self.ratios
        return all(b >= a - tol for a, b in zip(values, values[1:]))

    def is_strictly_increasing(self) -> bool:
        return all(b > a for a, b in zip(self.ratios, self.ratios[1:]))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"ell": list(self.ells), "ratio": list(self.ratios)})


def ratio_of(cost: float, optimum: float, floor: float = DEFAULT_CONFIG.divergence_floor) -> float:
    """cost / optimum, with 1 when both vanish and ``inf`` when only the optimum does."""
    if optimum <= floor:
        if cost <= floor:
            return 1.0
        logger.warning("optimal cost %.3g below floor while mechanism pays %.3g", optimum, cost)
        return math.inf
    return cost / optimum


def _costs(mechanism: Mechanism, inst: AnyInstance, mu: PiecewiseUniform, two_facility: bool) -> tuple[float, float]:
    if two_facility:
        return esc2(inst, mu, mechanism(inst, mu)), esc2(inst, mu, solve_optimal2(inst, mu))
    return esc(inst, mu, mechanism(inst, mu)), esc(inst, mu, solve_optimal(inst, mu).canonical)


def empirical_sar(
    mechanism: Mechanism,
    family: InstanceFamily,
    schedule: Sequence[int] | None = None,
) -> RatioTrace:
    """Evaluate a mechanism on a family at every ℓ of the schedule."""
    ells = tuple(schedule) if schedule is not None else DEFAULT_CONFIG.ell_schedule
    ratios = []
    for ell in ells:
        inst, mu = family.generate(ell)
        cost, optimum = _costs(mechanism, inst, mu, family.two_facility)
        ratio = ratio_of(cost, optimum)
        logger.debug("%s ell=%d cost=%.12g optimum=%.12g ratio=%.12g", family.name, ell, cost, optimum, ratio)
        ratios.append(ratio)
    return RatioTrace(ells=ells, ratios=tuple(ratios), limit_claim=family.limit_claim)


# Families


def _require_odd(n: int) -> None:
    if n % 2 == 0:
        raise ParityError(f"single-facility families need odd n, got n={n}")


def _split_reports(zeros: int, total: int, other: float = 1.0) -> tuple[float, ...]:
    return (0.0,) * zeros + (other,) * (total - zeros)


def family_zero_info(n: int, n_r: int) -> InstanceFamily:
    """Half the reports at 0, the rest at 1, and μ_ℓ concentrating at 1."""
    _require_odd(n)
    if not 1 <= n_r <= n:
        raise DomainError(f"need 1 <= n_r <= n, got n_r={n_r}, n={n}")
    reports = _split_reports((n_r + 1) // 2, n_r)
    concentration = ConcentrationFamily(((1.0, 1.0),), Side.LEFT)

    def generate(ell: int) -> tuple[Instance, PiecewiseUniform]:
        return Instance(n, reports), concentration.realize(ell)

    limit = sar_lower(Regime.ZERO, n, n_r)
    return InstanceFamily(
        name="zero",
        generator=generate,
        limit_claim=limit,
        mechanism=median_mechanism,
        description=f"zero-information lower bound, n={n}, n_r={n_r}",
        bound=limit,
    )


def family_median_info(n: int, n_r: int) -> InstanceFamily:
    """Reports split at 0 and 1 with μ_ℓ's median pushed just past the gap to 1.

    The mass near 1 exceeds 1/2 by η = θ/ℓ so that the median of μ_ℓ lands
    at 1 while the pooled population still has its median at 0.
    """
    _require_odd(n)
    n_u = n - n_r
    if not 2 <= n_u <= n - 2:
        raise RegimeError(f"the median-information family needs 2 <= n_u <= n-2, got n_u={n_u}")
    zeros = min((n - 1) // 2, n_r)
    reports = _split_reports(zeros, n_r)
    theta = min((n_u - 1) / (2 * n_u), n_r / (2 * n_u))

    def generate(ell: int) -> tuple[Instance, PiecewiseUniform]:
        eta = theta / ell
        atoms = ((0.0, 0.5 - eta), (1.0, 0.5 + eta))
        return Instance(n, reports), ConcentrationFamily(atoms, Side.LEFT).realize(ell)

    return InstanceFamily(
        name="median",
        generator=generate,
        limit_claim=sar_upper(Regime.MEDIAN, n, n_r),
        mechanism=median_info_pqm(),
        description=f"median-information construction, n={n}, n_r={n_r}",
        bound=sar_lower(Regime.MEDIAN, n, n_r),
    )


def _limit_cost(reports: Sequence[float], n_u: int, fam: ConcentrationFamily, y: float) -> float:
    return sum(abs(x - y) for x in reports) + n_u * fam.limit_mean_abs_dev(y)


def family_k_quantile(n: int, n_r: int, k: int, responder: float = 0.5) -> InstanceFamily:
    """Even-grid lower-bound construction against a fixed response ``y``.

    With p = 1/2 - 1/(2k), one branch has ceil(n_r/2) reports at y, the rest
    at 1 and mass p at 0; its mirror has ceil(n_r/2) reports at 0, the rest
    at y and mass 1-p at 0. Both put the queried quantiles q_{k/2} and
    q_{k/2+1} at the atoms. The family keeps whichever branch hurts the
    responder more.

    Raises:
        UnsupportedPlanError: for odd k or k not dividing n_u
    """
    _require_odd(n)
    n_u = n - n_r
    if k < 2 or k % 2 == 1:
        raise UnsupportedPlanError(f"only the even-k construction exists, got k={k}")
    if n_u == 0 or n_u % k != 0:
        raise UnsupportedPlanError(f"k={k} must divide n_u={n_u}")
    if not 0.0 < responder < 1.0:
        raise DomainError(f"responder must lie in (0, 1), got {responder}")

    p = 0.5 - 1.0 / (2 * k)
    heavy, light = (n_r + 1) // 2, n_r // 2
    branches = [
        ((responder,) * heavy + (1.0,) * light, ConcentrationFamily(((0.0, p), (1.0, 1.0 - p)))),
        ((0.0,) * heavy + (responder,) * light, ConcentrationFamily(((0.0, 1.0 - p), (1.0, p)))),
    ]

    def limit_ratio(reports: tuple[float, ...], fam: ConcentrationFamily) -> float:
        optimum = min(_limit_cost(reports, n_u, fam, t) for t in (0.0, responder, 1.0))
        return _limit_cost(reports, n_u, fam, responder) / optimum

    limits = [limit_ratio(reports, fam) for reports, fam in branches]
    pick = int(np.argmax(limits))
    reports, concentration = branches[pick]
    logger.debug("k-quantile family picked branch %d with limit %.12g", pick, limits[pick])

    def generate(ell: int) -> tuple[Instance, PiecewiseUniform]:
        return Instance(n, reports), concentration.realize(ell)

    return InstanceFamily(
        name="k-quantile",
        generator=generate,
        limit_claim=limits[pick],
        mechanism=fixed_placement(responder),
        description=f"even-grid construction, n={n}, n_r={n_r}, k={k}, y={responder}",
        bound=sar_lower(Regime.K_QUANTILE, n, n_r, k=k),
    )


def family_lifted_plan(n_r: int, n_u: int, q: QueryPlan) -> InstanceFamily:
    """Tight instances for the PQM with the lift of ``q``.

    Takes the relevant index j whose lifted level w_j is farthest from its
    target t_j, puts (n+1)/2 - j reports at 0 and the rest at 1, and sets the
    mass of μ at 0 so that the j-th phantom sits on the wrong side of the gap.
    The ratio tends to 1 + 4(1-λ)Δ / (1 - 2(1-λ)Δ) with Δ = |w_j - t_j|.
    """
    n = n_r + n_u
    _require_odd(n)
    if n_u < 1:
        raise RegimeError("the lifted-plan family needs at least one aleatory agent")
    indices = relevant_quantiles(n_r, n_u)
    w = np.asarray(lift(q, n_r, n_u).levels)[np.asarray(indices) - 1]
    gaps = np.abs(w - target_levels(indices, n_u))
    pos = int(np.argmax(gaps))
    j, level, gap = indices[pos], float(w[pos]), float(gaps[pos])
    undershoot = level <= float(target_levels([j], n_u)[0])
    reports = _split_reports((n + 1) // 2 - j, n_r)

    def mass_at_zero(ell: int) -> float:
        shift = gap / (2 * ell)
        return level + shift if undershoot else level - shift

    def generate(ell: int) -> tuple[Instance, PiecewiseUniform]:
        a = mass_at_zero(ell)
        fam = ConcentrationFamily(((0.0, a), (1.0, 1.0 - a)), Side.LEFT)
        return Instance(n, reports), fam.realize(ell)

    return InstanceFamily(
        name="lifted",
        generator=generate,
        limit_claim=sar_upper(Regime.K_QUANTILE, n, n_r, q=q),
        mechanism=lifted_pqm(q),
        description=f"lifted plan {q.levels}, n_r={n_r}, n_u={n_u}, gap={delta_lift(q, n_r, n_u):.6g}",
    )


def family_two_facility_unbounded(c: int, n_r: int) -> InstanceFamily:
    """All reports at 1, μ_ℓ shrinking onto 0 and 1 so that the optimum tends to 0.

    Raises:
        RegimeError: if n_r > c
    """
    if n_r > c:
        raise RegimeError(f"n_r={n_r} > c={c}: the inner gap mechanism is bounded here")
    n_u = 2 * c - n_r
    atoms = tuple((p, w) for p, w in ((0.0, c / n_u), (1.0, (n_u - c) / n_u)) if w > 0.0)
    concentration = ConcentrationFamily(atoms, Side.CENTERED)
    reports = (1.0,) * n_r

    def generate(ell: int) -> tuple[TwoInstance, PiecewiseUniform]:
        return TwoInstance(c, reports), concentration.realize(ell)

    return InstanceFamily(
        name="two-unbounded",
        generator=generate,
        limit_claim=math.inf,
        mechanism=fixed_pair(0.25, 0.75),
        description=f"no bounded mechanism without quantiles, c={c}, n_r={n_r}",
        two_facility=True,
    )


BAD_QUANTILE_PLAN = QueryPlan((0.05, 0.1, 0.15))


def family_bad_quantile(far: float = 1.0) -> InstanceFamily:
    """c=3, two reports at 0 and μ_ℓ = ¼U[-1/ℓ, 0] + ¾U[far-1/ℓ, far].

    Every query of the plan (0.05, 0.1, 0.15) lands near 0, so the endpoint
    rule opens both facilities there while three quarters of the aleatory
    agents sit at ``far``.
    """
    if far <= 0.0:
        raise DomainError(f"far must be positive, got {far}")
    c = 3

    def generate(ell: int) -> tuple[TwoInstance, PiecewiseUniform]:
        width = 1.0 / ell
        if far - width < 0.0:
            raise InvalidFamilyError(f"segments overlap at ell={ell}")
        mu = PiecewiseUniform((Segment(-width, 0.0, 0.25), Segment(far - width, far, 0.75)))
        return TwoInstance(c, (0.0, 0.0)), mu

    return InstanceFamily(
        name="bad-quantile",
        generator=generate,
        limit_claim=math.inf,
        mechanism=endpoint_mechanism(BAD_QUANTILE_PLAN),
        description="endpoint rule with a plan clustered near 0",
        two_facility=True,
    )


@dataclass(frozen=True)
class FuzzCase:
    """A fixed (instance, agent, misreport) triple the fuzzer always checks."""

    instance: AnyInstance
    mu: PiecewiseUniform | None
    index: int
    misreport: float


def manipulation_example() -> FuzzCase:
    """The agent at 2 gains by reporting 0.75 to the exact optimal rule (cost 7 drops to 1.25)."""
    inst = TwoInstance(5, (0.0, 1.0, 1.0, 2.0, 9.0, 9.0, 9.0, 9.0))
    return FuzzCase(instance=inst, mu=PiecewiseUniform.uniform(0.0, 1.0), index=3, misreport=0.75)


FAMILY_BUILDERS: dict[str, Callable[..., InstanceFamily]] = {
    "zero": family_zero_info,
    "median": family_median_info,
    "k-quantile": family_k_quantile,
    "lifted": family_lifted_plan,
    "two-unbounded": family_two_facility_unbounded,
    "bad-quantile": family_bad_quantile,
}


def build_family(name: str, **params: Any) -> InstanceFamily:
    """Look up a family constructor by CLI name and call it."""
    try:
        builder = FAMILY_BUILDERS[name]
    except KeyError:
        known = ", ".join(sorted(FAMILY_BUILDERS))
        raise InvalidFamilyError(f"unknown family {name!r}; expected one of {known}") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise InvalidFamilyError(f"bad parameters for family {name!r}: {exc}") from exc


# Random instances


def random_distribution(
    rng: np.random.Generator,
    max_segments: int = DEFAULT_CONFIG.max_segments,
    box: tuple[float, float] = DEFAULT_CONFIG.report_box,
) -> PiecewiseUniform:
    """1 to ``max_segments`` disjoint segments inside ``box`` with Dirichlet masses."""
    count = int(rng.integers(1, max_segments + 1))
    while True:
        ends = np.sort(rng.uniform(box[0], box[1], size=2 * count))
        lo, hi = ends[0::2], ends[1::2]
        if np.all(hi > lo):
            break
    masses = rng.dirichlet(np.ones(count)) + 0.05
    masses = masses / masses.sum()
    return PiecewiseUniform(tuple(Segment(float(a), float(b), float(m)) for a, b, m in zip(lo, hi, masses)))


def random_reports(
    rng: np.random.Generator,
    n_r: int,
    box: tuple[float, float] = DEFAULT_CONFIG.report_box,
) -> tuple[float, ...]:
    """Uniform reports, about 30% snapped to integers so that ties occur."""
    values = rng.uniform(box[0], box[1], size=n_r)
    snap = rng.random(n_r) < 0.3
    values[snap] = np.round(values[snap])
    return tuple(float(v) for v in values)


def random_instance(
    rng: np.random.Generator,
    max_agents: int = DEFAULT_CONFIG.max_agents,
    min_reports: int = 1,
    max_segments: int = DEFAULT_CONFIG.max_segments,
) -> tuple[Instance, PiecewiseUniform]:
    """A single-facility instance with odd n."""
    n = 2 * int(rng.integers(0, (max_agents + 1) // 2)) + 1
    n_r = int(rng.integers(min(min_reports, n), n + 1))
    return Instance(n, random_reports(rng, n_r)), random_distribution(rng, max_segments)


def random_two_instance(
    rng: np.random.Generator,
    regime: str = "any",
    max_capacity: int = DEFAULT_CONFIG.max_capacity,
    min_capacity: int = 1,
    max_segments: int = DEFAULT_CONFIG.max_segments,
) -> tuple[TwoInstance, PiecewiseUniform]:
    """A two-facility instance with at least one report.

    Args:
        regime: ``few`` (n_r <= c), ``many`` (n_r > c) or ``any``
    """
    c = int(rng.integers(min_capacity, max_capacity + 1))
    if regime == "few":
        lo, hi = 1, c
    elif regime == "many":
        lo, hi = c + 1, 2 * c
    elif regime == "any":
        lo, hi = 1, 2 * c
    else:
        raise DomainError(f"unknown regime {regime!r}")
    n_r = int(rng.integers(lo, hi + 1))
    return TwoInstance(c, random_reports(rng, n_r)), random_distribution(rng, max_segments)


Sampler = Callable[[np.random.Generator], tuple[AnyInstance, PiecewiseUniform | None]]


def two_facility_sampler(regime: str = "any", min_capacity: int = 1) -> Sampler:
    def sample(rng: np.random.Generator) -> tuple[TwoInstance, PiecewiseUniform]:
        return random_two_instance(rng, regime, min_capacity=min_capacity)

    return sample


def single_facility_sampler(max_agents: int = DEFAULT_CONFIG.max_agents) -> Sampler:
    def sample(rng: np.random.Generator) -> tuple[Instance, PiecewiseUniform]:
        return random_instance(rng, max_agents=max_agents)

    return sample


# Truthfulness


@dataclass(frozen=True)
class FuzzWitness:
    """The most profitable deviation found."""

    instance: AnyInstance
    index: int
    misreport: float
    truthful_cost: float
    deviating_cost: float


@dataclass(frozen=True)
class FuzzReport:
    worst_regret: float
    trials: int
    witness: FuzzWitness | None = None
    checked: int = field(default=0)

    def is_truthful(self, tol: float = 1e-12) -> bool:
        return self.worst_regret <= tol


def _agent_cost(output: Any, inst: AnyInstance, value: float, position: float) -> float:
    """Cost of the agent with true location ``value`` that reported ``position``.

    For two facilities every sorted index holding ``position`` is a
    candidate and the largest distance counts. Outcomes only match sorted
    indices, so when a misreport equals another agent's report the deviator
    is charged the worse of the tied seats. A misreport that pays off only
    under a favourable tie-break is not counted as a regret.
    """
    if isinstance(output, TwoFacilityOutcome):
        held = np.flatnonzero(inst.x == position)
        return max(abs(value - output.position_of(output.matching[i])) for i in held)
    return abs(value - float(output))


def _facility_points(output: Any) -> list[float]:
    if isinstance(output, TwoFacilityOutcome):
        return [output.y1, output.y2, (output.y1 + output.y2) / 2.0]
    return [float(output)]


def _misreports(rng: np.random.Generator, inst: AnyInstance, index: int, output: Any) -> list[float]:
    value = inst.x[index]
    box = DEFAULT_CONFIG.report_box
    candidates = [float(rng.uniform(box[0], box[1]))]
    candidates += [float(x) for j, x in enumerate(inst.x) if j != index]
    for y in _facility_points(output):
        candidates += [y, y - 1e-6, y + 1e-6]
    candidates.append(float(value + rng.normal(scale=0.5)))
    return [m for m in candidates if m != value]


def _deviation(
    mechanism: Mechanism,
    inst: AnyInstance,
    mu: PiecewiseUniform | None,
    index: int,
    misreport: float,
    truthful: Any,
) -> FuzzWitness:
    value = float(inst.x[index])
    deviated = inst.replace_report(index, misreport)
    truthful_cost = _agent_cost(truthful, inst, value, value)
    deviating_cost = _agent_cost(mechanism(deviated, mu), deviated, value, misreport)
    return FuzzWitness(inst, index, misreport, truthful_cost, deviating_cost)


def truthfulness_fuzz(
    mechanism: Mechanism,
    trials: int,
    seed: int = DEFAULT_CONFIG.seed,
    sampler: Sampler | None = None,
    extra_cases: Sequence[FuzzCase] = (),
) -> FuzzReport:
    """Search for profitable misreports.

    Each trial samples an instance and an agent, then tries a random
    misreport plus the structured ones most likely to pay off: the other
    reports, the facility positions and points just beside them. The
    report carries the largest truthful-minus-deviating cost seen.

    Args:
        mechanism: Single or two-facility mechanism
        trials: Number of sampled (instance, agent) pairs, at least 1
        seed: Seed for the sampler and the misreports
        sampler: Instance generator; single-facility instances by default
        extra_cases: Fixed triples checked before the random ones

    Returns:
        FuzzReport with the worst regret and its witness
    """
    if trials < 1:
        raise DomainError(f"trials must be at least 1, got {trials}")
    rng = np.random.default_rng(seed)
    draw = sampler or single_facility_sampler()

    worst = -math.inf
    witness: FuzzWitness | None = None
    checked = 0

    def consider(found: FuzzWitness) -> None:
        nonlocal worst, witness, checked
        checked += 1
        regret = found.truthful_cost - found.deviating_cost
        if regret > worst:
            worst, witness = regret, found

    for case in extra_cases:
        truthful = mechanism(case.instance, case.mu)
        consider(_deviation(mechanism, case.instance, case.mu, case.index, case.misreport, truthful))

    for trial in range(trials):
        inst, mu = draw(rng)
        if inst.n_r == 0:
            continue
        index = int(rng.integers(0, inst.n_r))
        truthful = mechanism(inst, mu)
        for misreport in _misreports(rng, inst, index, truthful):
            consider(_deviation(mechanism, inst, mu, index, misreport, truthful))
        if trial and trial % 10000 == 0:
            logger.debug("fuzz trial %d, worst regret %.3g", trial, worst)

    worst = max(worst, 0.0)
    return FuzzReport(worst_regret=worst, trials=trials, witness=witness, checked=checked)
