"""Brute-force optimality oracles, independent of the closed-form solvers."""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from aleatory_facility.distributions import PiecewiseUniform
from aleatory_facility.errors import DomainError
from aleatory_facility.instance import Instance, candidate_set, esc
from aleatory_facility.two_facility import TwoInstance

logger = logging.getLogger(__name__)

MAX_ORACLE_REPORTS = 12


def grid_oracle(
    inst: Instance,
    mu: PiecewiseUniform | None,
    box: tuple[float, float],
    step: float,
) -> tuple[float, float]:
    """Scan ESC over a grid plus every breakpoint and return ``(argmin, min)``.

    The extra points are the reports, the segment endpoints of μ and the
    candidate quantiles, so the scan hits the exact optimum whenever the
    optimum is one of them.

    Raises:
        DomainError: if the box is empty, ``step <= 0`` or the box misses
            a report or part of the support
    """
    lo, hi = box
    if not hi > lo:
        raise DomainError(f"empty search box {box}")
    if step <= 0.0:
        raise DomainError(f"grid step must be positive, got {step}")

    extras = [inst.x]
    if inst.n_u > 0:
        if mu is None:
            raise DomainError("a distribution is required when aleatory agents are present")
        extras.append(mu.breakpoints)
        extras.append(np.asarray(candidate_set(inst.n, inst.n_u, mu)))
    extra = np.concatenate(extras)
    if len(extra) and (extra.min() < lo or extra.max() > hi):
        raise DomainError(f"box {box} does not enclose the reports and the support")

    grid = np.arange(lo, hi + step / 2.0, step)
    points = np.unique(np.concatenate((grid, extra)))
    costs = esc(inst, mu, points)
    best = int(np.argmin(costs))
    logger.debug("grid oracle scanned %d points", len(points))
    return float(points[best]), float(costs[best])


@dataclass(frozen=True)
class OraclePair:
    """Cheapest facility pair found by exhaustive search, with its report matching."""

    y1: float
    y2: float
    cost: float
    matching: tuple[int, ...]


def pair_positions(inst: TwoInstance, mu: PiecewiseUniform | None) -> NDArray[np.float64]:
    """Positions that always contain an optimal pair.

    A facility serving a group of reports plus a threshold slice of μ sits at
    the median of that group: a report, or a μ-quantile at level
    (c - 2k)/(2n_u) or (3c - 2k)/(2n_u) for some k in 0..n_r. The levels
    (2j-1)/(2n_u) are added as well.
    """
    pieces = [inst.x]
    n_u, c = inst.n_u, inst.c
    if n_u > 0:
        if mu is None:
            raise DomainError("a distribution is required when aleatory agents are present")
        levels = {(2 * j - 1) / (2 * n_u) for j in range(1, n_u + 1)}
        for k in range(inst.n_r + 1):
            levels.add((c - 2 * k) / (2 * n_u))
            levels.add((3 * c - 2 * k) / (2 * n_u))
        usable = sorted(p for p in levels if 0.0 < p <= 1.0)
        pieces.append(mu.quantiles(usable))
    return np.unique(np.concatenate(pieces))


def optimal_pair_oracle(inst: TwoInstance, mu: PiecewiseUniform | None) -> OraclePair:
    """Minimum ESC over every report subset sent to facility 1 and every pair of positions.

    Aleatory agents are split at the threshold quantile of the spare
    capacity. For a fixed subset the two facilities decouple, so each is
    minimized over :func:`pair_positions` on its own.

    Raises:
        DomainError: if there are more than 12 reports
    """
    n_r, n_u, c = inst.n_r, inst.n_u, inst.c
    if n_r > MAX_ORACLE_REPORTS:
        raise DomainError(f"exhaustive search is limited to {MAX_ORACLE_REPORTS} reports, got {n_r}")
    positions = pair_positions(inst, mu)

    masks = ((np.arange(2**n_r)[:, np.newaxis] >> np.arange(n_r)) & 1).astype(float)
    sizes = masks.sum(axis=1).astype(int)
    dist = np.abs(inst.x[:, np.newaxis] - positions[np.newaxis, :])
    near = masks @ dist
    far = dist.sum(axis=0)[np.newaxis, :] - near

    best: OraclePair | None = None
    for m1 in range(max(0, n_r - c), min(n_r, c) + 1):
        rows = np.flatnonzero(sizes == m1)
        if n_u > 0:
            z = mu.quantile((c - m1) / n_u, allow_zero=True)
            left = n_u * np.asarray(mu.abs_moment(positions, upper=z))
            right = n_u * np.asarray(mu.abs_moment(positions, lower=z))
        else:
            left = right = np.zeros(len(positions))
        cost1 = near[rows] + left
        cost2 = far[rows] + right
        i1 = np.argmin(cost1, axis=1)
        i2 = np.argmin(cost2, axis=1)
        totals = cost1[np.arange(len(rows)), i1] + cost2[np.arange(len(rows)), i2]
        r = int(np.argmin(totals))
        if best is None or totals[r] < best.cost:
            row = masks[rows[r]]
            best = OraclePair(
                y1=float(positions[i1[r]]),
                y2=float(positions[i2[r]]),
                cost=float(totals[r]),
                matching=tuple(1 if bit else 2 for bit in row),
            )
    assert best is not None
    return best
