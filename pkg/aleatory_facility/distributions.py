"""Piecewise-uniform probability measures and the concentration sequences built from them.

Every measure on the line used by the library is a finite mixture of uniform
segments. That class is absolutely continuous with bounded support, and its
cdf, pseudo-inverse and expected absolute deviation all have closed forms,
so no quadrature is ever needed.
"""

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from aleatory_facility.config import DEFAULT_CONFIG
from aleatory_facility.errors import DomainError, InvalidFamilyError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Segment:
    """A uniform piece ``mass * U[lo, hi]``."""

    lo: float
    hi: float
    mass: float


def _normalized_masses(masses: NDArray[np.float64], what: str) -> NDArray[np.float64]:
    if np.any(~np.isfinite(masses)) or np.any(masses <= 0.0):
        raise DomainError(f"{what} must be finite and positive, got {masses.tolist()}")
    total = float(masses.sum())
    if abs(total - 1.0) > DEFAULT_CONFIG.normalize_tolerance:
        raise DomainError(f"{what} sum to {total!r}, expected 1")
    if abs(total - 1.0) > DEFAULT_CONFIG.mass_tolerance:
        logger.debug("renormalizing %s from total %r", what, total)
        masses = masses / total
    return masses


@dataclass(frozen=True)
class PiecewiseUniform:
    """Mixture of uniform segments with disjoint interiors.

    Segments are sorted by ``lo`` on construction. Masses are renormalized
    when they miss 1 by less than ``normalize_tolerance``; larger errors are
    rejected.
    """

    segments: tuple[Segment, ...]
    _lo: NDArray[np.float64] = field(init=False, repr=False, compare=False)
    _hi: NDArray[np.float64] = field(init=False, repr=False, compare=False)
    _mass: NDArray[np.float64] = field(init=False, repr=False, compare=False)
    _cum: NDArray[np.float64] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.segments:
            raise DomainError("a distribution needs at least one segment")
        ordered = sorted(self.segments, key=lambda s: (s.lo, s.hi))
        lo = np.array([s.lo for s in ordered], dtype=float)
        hi = np.array([s.hi for s in ordered], dtype=float)
        if np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)):
            raise DomainError("segment endpoints must be finite")
        if np.any(hi <= lo):
            raise DomainError("every segment needs lo < hi")
        if np.any(lo[1:] < hi[:-1]):
            raise DomainError("segment interiors overlap")
        mass = _normalized_masses(np.array([s.mass for s in ordered], dtype=float), "segment masses")

        cum = np.concatenate(([0.0], np.cumsum(mass)))
        cum[-1] = 1.0

        object.__setattr__(
            self,
            "segments",
            tuple(Segment(float(a), float(b), float(m)) for a, b, m in zip(lo, hi, mass)),
        )
        object.__setattr__(self, "_lo", lo)
        object.__setattr__(self, "_hi", hi)
        object.__setattr__(self, "_mass", mass)
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "PiecewiseUniform":
        """The uniform distribution on [lo, hi]."""
        return cls((Segment(lo, hi, 1.0),))

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[float, float, float]]) -> "PiecewiseUniform":
        """Build from ``(lo, hi, mass)`` triples."""
        return cls(tuple(Segment(float(a), float(b), float(m)) for a, b, m in triples))

    @property
    def support(self) -> tuple[float, float]:
        """Smallest closed interval carrying all the mass."""
        return float(self._lo[0]), float(self._hi[-1])

    @property
    def breakpoints(self) -> NDArray[np.float64]:
        """Sorted distinct segment endpoints."""
        return np.unique(np.concatenate((self._lo, self._hi)))

    def mean(self) -> float:
        return float(np.dot(self._mass, (self._lo + self._hi) / 2.0))

    def cdf(self, t: ArrayLike) -> float | NDArray[np.float64]:
        """F(t), exact and piecewise linear."""
        t_arr = np.asarray(t, dtype=float)
        idx = np.searchsorted(self._lo, t_arr, side="right") - 1
        safe = np.clip(idx, 0, len(self._lo) - 1)
        frac = np.clip((t_arr - self._lo[safe]) / (self._hi[safe] - self._lo[safe]), 0.0, 1.0)
        value = np.where(idx < 0, 0.0, self._cum[safe] + self._mass[safe] * frac)
        return float(value) if value.ndim == 0 else value

    def quantile(self, p: float, allow_zero: bool = False) -> float:
        """Pseudo-inverse ``inf{t : F(t) >= p}``.

        Args:
            p: Probability level in (0, 1]
            allow_zero: Map ``p == 0`` to the infimum of the support, the
                limit of the quantile function as p decreases to 0

        Returns:
            The p-quantile; on a flat stretch of F the left end of the gap
        """
        if allow_zero and p == 0.0:
            return float(self._lo[0])
        if not (0.0 < p <= 1.0) or math.isnan(p):
            raise DomainError(f"quantile level must lie in (0, 1], got {p!r}")
        i = int(np.searchsorted(self._cum[1:], p, side="left"))
        i = min(i, len(self._lo) - 1)
        a, b, m = self._lo[i], self._hi[i], self._mass[i]
        if p >= self._cum[i + 1]:
            return float(b)
        t = a + (p - self._cum[i]) / m * (b - a)
        return float(min(max(t, a), b))

    def quantiles(self, levels: Iterable[float], allow_zero: bool = False) -> NDArray[np.float64]:
        """Vector form of :meth:`quantile`."""
        return np.array([self.quantile(float(p), allow_zero=allow_zero) for p in levels], dtype=float)

    def mean_abs_dev(self, y: ArrayLike) -> float | NDArray[np.float64]:
        """E|X - y|, exact for every segment."""
        return self.abs_moment(y)

    def abs_moment(
        self,
        y: ArrayLike,
        lower: float = -math.inf,
        upper: float = math.inf,
    ) -> float | NDArray[np.float64]:
        """Integral of |x - y| against the measure restricted to (lower, upper].

        With the default window this is the expected absolute deviation.
        Segments cut by the window keep the mass of the part inside it.
        """
        a = np.maximum(self._lo, lower)
        b = np.minimum(self._hi, upper)
        keep = b > a
        y_arr = np.asarray(y, dtype=float)
        if not np.any(keep):
            zero = np.zeros_like(y_arr)
            return float(zero) if zero.ndim == 0 else zero
        a, b = a[keep], b[keep]
        m = self._mass[keep] * (b - a) / (self._hi[keep] - self._lo[keep])

        yy = y_arr[..., np.newaxis]
        u = np.clip(yy, a, b)
        per_segment = ((u - a) ** 2 + (b - u) ** 2) / (2.0 * (b - a)) + np.abs(yy - u)
        value = per_segment @ m
        return float(value) if value.ndim == 0 else value

    def mass_between(self, lower: float = -math.inf, upper: float = math.inf) -> float:
        """μ((lower, upper])."""
        a = np.maximum(self._lo, lower)
        b = np.minimum(self._hi, upper)
        width = np.clip(b - a, 0.0, None)
        return float(np.dot(self._mass, width / (self._hi - self._lo)))


class Side(Enum):
    """Where a realized segment sits relative to its atom."""

    LEFT = "left"
    RIGHT = "right"
    CENTERED = "centered"


@dataclass(frozen=True)
class ConcentrationFamily:
    """A sequence of measures that concentrates onto weighted atoms.

    ``realize(ell)`` puts a width ``1/ell`` uniform segment at every atom,
    so the sequence converges weakly to the discrete measure ``Σ w δ_a``.
    """

    atoms: tuple[tuple[float, float], ...]
    side: Side = Side.LEFT

    def __post_init__(self) -> None:
        if not self.atoms:
            raise InvalidFamilyError("a concentration family needs at least one atom")
        ordered = sorted((float(p), float(w)) for p, w in self.atoms)
        points = [p for p, _ in ordered]
        if len(set(points)) != len(points):
            raise InvalidFamilyError(f"duplicate atoms in {points}")
        try:
            weights = _normalized_masses(np.array([w for _, w in ordered]), "atom weights")
        except DomainError as exc:
            raise InvalidFamilyError(str(exc)) from exc
        object.__setattr__(self, "atoms", tuple(zip(points, (float(w) for w in weights))))

    def segment_for(self, point: float, ell: int) -> tuple[float, float]:
        width = 1.0 / ell
        if self.side is Side.LEFT:
            return point - width, point
        if self.side is Side.RIGHT:
            return point, point + width
        return point - width / 2.0, point + width / 2.0

    def realize(self, ell: int) -> PiecewiseUniform:
        """The ell-th measure of the sequence.

        Raises:
            InvalidFamilyError: if ell < 1 or two realized segments overlap
        """
        if ell < 1:
            raise InvalidFamilyError(f"ell must be a positive integer, got {ell}")
        spans = [self.segment_for(p, ell) for p, _ in self.atoms]
        for (_, hi), (lo, _) in zip(spans, spans[1:]):
            if lo < hi:
                raise InvalidFamilyError(f"segments of width 1/{ell} overlap for atoms {self.atoms}")
        return PiecewiseUniform(tuple(Segment(a, b, w) for (a, b), (_, w) in zip(spans, self.atoms)))

    def limit_mean_abs_dev(self, y: float) -> float:
        """Σ w |a - y|, the limit of ``realize(ell).mean_abs_dev(y)``."""
        return sum(w * abs(p - y) for p, w in self.atoms)


def cdf(d: PiecewiseUniform, t: float) -> float:
    """F_d(t)."""
    return d.cdf(t)


def quantile(d: PiecewiseUniform, p: float) -> float:
    """inf{t : F_d(t) >= p} for p in (0, 1]."""
    return d.quantile(p)


def mean_abs_dev(d: PiecewiseUniform, y: float) -> float:
    """E|X - y| for X ~ d."""
    return d.mean_abs_dev(y)


def realize(fam: ConcentrationFamily, ell: int) -> PiecewiseUniform:
    """The width-1/ell member of a concentration family."""
    return fam.realize(ell)
