"""Single-facility problem objects: instances, ex-ante social cost, the mixed CDF and the exact optimum."""

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from aleatory_facility.config import DEFAULT_CONFIG
from aleatory_facility.distributions import PiecewiseUniform
from aleatory_facility.errors import DomainError, ParityError


@dataclass(frozen=True)
class Instance:
    """A facility of capacity ``n`` and the sorted reports of the agents already known.

    The remaining ``n_u = n - n_r`` places go to aleatory agents drawn from
    the population distribution.
    """

    n: int
    reports: tuple[float, ...] = ()
    _x: NDArray[np.float64] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"capacity must be a positive integer, got {self.n!r}")
        x = np.sort(np.asarray(self.reports, dtype=float).reshape(-1))
        if len(x) > self.n:
            raise DomainError(f"{len(x)} reports exceed capacity {self.n}")
        if np.any(~np.isfinite(x)):
            raise DomainError("reports must be finite")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "reports", tuple(float(v) for v in x))
        object.__setattr__(self, "_x", x)

    @property
    def x(self) -> NDArray[np.float64]:
        """Reports as a sorted array."""
        return self._x

    @property
    def n_r(self) -> int:
        return len(self.reports)

    @property
    def n_u(self) -> int:
        return self.n - self.n_r

    @property
    def lam(self) -> float:
        """Share of reported agents, λ = n_r / n."""
        return self.n_r / self.n

    def replace_report(self, index: int, value: float) -> "Instance":
        """Instance with the ``index``-th sorted report changed to ``value``."""
        values = list(self.reports)
        values[index] = value
        return Instance(self.n, tuple(values))


def _require_mu(mu: PiecewiseUniform | None, n_u: int) -> None:
    if mu is None and n_u > 0:
        raise DomainError("a distribution is required when aleatory agents are present")


def esc(inst: Instance, mu: PiecewiseUniform | None, y: ArrayLike) -> float | NDArray[np.float64]:
    """Ex-ante social cost Σ|x_i - y| + n_u E|X - y|.

    ``y`` may be an array; the result then has the same shape.
    """
    _require_mu(mu, inst.n_u)
    y_arr = np.asarray(y, dtype=float)
    cost = np.abs(y_arr[..., np.newaxis] - inst.x).sum(axis=-1)
    if inst.n_u > 0:
        cost = cost + inst.n_u * mu.mean_abs_dev(y_arr)
    return float(cost) if np.ndim(cost) == 0 else cost


def esc_slopes(inst: Instance, mu: PiecewiseUniform | None, y: float) -> tuple[float, float]:
    """Left and right derivatives of ``esc`` at ``y``.

    ESC is convex, so ``y`` is optimal exactly when the left slope is <= 0
    and the right slope is >= 0.
    """
    _require_mu(mu, inst.n_u)
    x = inst.x
    aleatory = inst.n_u * (2.0 * mu.cdf(y) - 1.0) if inst.n_u > 0 else 0.0
    below = int(np.searchsorted(x, y, side="left"))
    at_or_below = int(np.searchsorted(x, y, side="right"))
    left = below - (inst.n_r - below) + aleatory
    right = at_or_below - (inst.n_r - at_or_below) + aleatory
    return float(left), float(right)


def population_crossing(
    points: Sequence[float] | NDArray[np.float64],
    mu: PiecewiseUniform | None,
    weight: float,
    target: float,
    window: tuple[float, float] = (0.0, 1.0),
    strict: bool = False,
) -> float:
    """Leftmost position where a point-plus-density population reaches ``target``.

    The population counts every point with weight one and the part of
    ``mu`` whose cdf level lies inside ``window`` with total weight
    ``weight * (window[1] - window[0])``::

        G(t) = #{points <= t} + weight * (clip(F(t), w0, w1) - w0)

    Returns ``inf{t : G(t) >= target}``, or ``inf{t : G(t) > target}`` when
    ``strict``. G is linear between consecutive breakpoints (points, segment
    endpoints and the window edges), so the crossing is found by scanning
    them and solving the single linear piece that straddles the target.

    Args:
        points: Sorted unit-weight atoms
        mu: Density part, ignored when ``weight`` is zero
        weight: Scale of the density part
        target: Level in count units, positive
        window: Range of cdf levels of ``mu`` that belong to the population
        strict: Search for the first point strictly above ``target``

    Returns:
        The crossing position; the last breakpoint if G never gets there
    """
    if target <= 0.0:
        raise DomainError(f"crossing target must be positive, got {target!r}")
    pts = np.sort(np.asarray(points, dtype=float))
    w0, w1 = window
    use_mu = mu is not None and weight > 0.0 and w1 > w0

    pieces = [pts]
    if use_mu:
        pieces.append(mu.breakpoints)
        for level in (w0, w1):
            if 0.0 < level < 1.0:
                pieces.append(np.array([mu.quantile(level)]))
    breaks = np.unique(np.concatenate(pieces)) if any(len(p) for p in pieces) else np.array([])
    if len(breaks) == 0:
        raise DomainError("empty population has no quantiles")

    tol = DEFAULT_CONFIG.tie_tolerance * max(1.0, target)

    def density_part(t: float) -> float:
        if not use_mu:
            return 0.0
        return weight * (min(max(mu.cdf(t), w0), w1) - w0)

    def reached(value: float) -> bool:
        return value > target + tol if strict else value >= target - tol

    prev_t = -math.inf
    prev_val = 0.0
    for b in breaks:
        b = float(b)
        dens = density_part(b)
        left_val = int(np.searchsorted(pts, b, side="left")) + dens
        if prev_t > -math.inf and reached(left_val) and left_val > prev_val:
            if abs(left_val - target) <= tol:
                return b
            t = prev_t + (target - prev_val) / (left_val - prev_val) * (b - prev_t)
            return float(min(max(t, prev_t), b))
        right_val = int(np.searchsorted(pts, b, side="right")) + dens
        if reached(right_val):
            return b
        prev_t, prev_val = b, right_val
    return float(breaks[-1])


@dataclass(frozen=True)
class MixedCdf:
    """λ F_x + (1 - λ) F_μ, the cdf of reports and aleatory agents pooled."""

    instance: Instance
    mu: PiecewiseUniform | None

    def __post_init__(self) -> None:
        _require_mu(self.mu, self.instance.n_u)

    def count(self, t: float) -> float:
        """Pooled number of agents at or below ``t``: #{x_i <= t} + n_u F_μ(t)."""
        inst = self.instance
        below = int(np.searchsorted(inst.x, t, side="right"))
        if inst.n_u == 0:
            return float(below)
        return below + inst.n_u * self.mu.cdf(t)

    def __call__(self, t: float) -> float:
        return self.count(t) / self.instance.n

    def crossing(self, count_target: float, strict: bool = False) -> float:
        inst = self.instance
        return population_crossing(inst.x, self.mu, float(inst.n_u), count_target, strict=strict)

    def quantile(self, p: float) -> float:
        """inf{t : F(t) >= p} for p in (0, 1]."""
        if not (0.0 < p <= 1.0) or math.isnan(p):
            raise DomainError(f"quantile level must lie in (0, 1], got {p!r}")
        return self.crossing(p * self.instance.n)


def mixed_cdf_eval(F: MixedCdf, t: float) -> float:
    """F_{λ,μ,x}(t)."""
    return F(t)


def mixed_quantile(F: MixedCdf, p: float) -> float:
    """inf{t : F_{λ,μ,x}(t) >= p}."""
    return F.quantile(p)


@dataclass(frozen=True)
class OptimalSet:
    """The closed interval of optimal facility positions."""

    lo: float
    hi: float
    canonical: float

    def __contains__(self, y: float) -> bool:
        return self.lo <= y <= self.hi


def solve_optimal(inst: Instance, mu: PiecewiseUniform | None) -> OptimalSet:
    """Exact optimum: the median set of the mixed cdf.

    ``lo`` is the inf of the medians and ``hi`` the first position where the
    pooled count strictly exceeds n/2. ESC is flat on [lo, hi].
    """
    F = MixedCdf(inst, mu)
    half = inst.n / 2.0
    lo = F.crossing(half)
    hi = max(lo, F.crossing(half, strict=True))
    return OptimalSet(lo=lo, hi=hi, canonical=lo)


def candidate_levels(n: int, n_u: int) -> list[float]:
    """Quantile levels that can host an optimum: (2j-1)/(2n_u) for odd n, j/n_u for even n."""
    if n_u <= 0:
        return []
    if n % 2 == 1:
        return [(2 * j - 1) / (2 * n_u) for j in range(1, n_u + 1)]
    return [j / n_u for j in range(1, n_u + 1)]


def candidate_set(n: int, n_u: int, mu: PiecewiseUniform) -> list[float]:
    """μ-quantiles that, together with the reports, always contain an optimum."""
    return sorted(mu.quantile(p) for p in candidate_levels(n, n_u))


def relevant_quantiles(n_r: int, n_u: int) -> list[int]:
    """Indices j whose (2j-1)/(2n_u)-quantile is optimal for some report vector.

    Enumerates k = #{x_i <= y}: j = (n+1)/2 - k for every feasible k.

    Raises:
        ParityError: if n = n_r + n_u is even
        DomainError: if n_u < 1
    """
    n = n_r + n_u
    if n % 2 == 0:
        raise ParityError(f"relevant quantiles are defined for odd n, got n={n}")
    if n_u < 1 or n_r < 0:
        raise DomainError(f"need n_u >= 1 and n_r >= 0, got n_r={n_r}, n_u={n_u}")
    mid = (n + 1) // 2
    k_lo = max(0, mid - n_u)
    k_hi = min(n_r, (n - 1) // 2)
    return sorted(mid - k for k in range(k_lo, k_hi + 1))


def target_levels(indices: Iterable[int], n_u: int) -> NDArray[np.float64]:
    """(2j-1)/(2n_u) for each index j."""
    return np.array([(2 * j - 1) / (2 * n_u) for j in indices], dtype=float)
