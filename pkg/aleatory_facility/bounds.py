"""Closed-form worst-case approximation ratios for the single-facility mechanisms.

All formulas are evaluated in rational arithmetic; ``exact=True`` returns the
``Fraction`` itself, otherwise a float. An unbounded ratio is ``math.inf``.
"""

import math
from enum import Enum
from fractions import Fraction

from aleatory_facility.errors import DomainError, ParityError, RegimeError, UnsupportedPlanError
from aleatory_facility.mechanisms import QueryPlan, delta_lift

Ratio = float | Fraction


class Regime(Enum):
    """How much the designer knows about the population distribution."""

    ZERO = "zero"
    MEDIAN = "median"
    K_QUANTILE = "k"
    FULL = "full"


class LowerVariant(Enum):
    """Which form of the k-quantile lower bound to report."""

    THEOREM = "theorem"
    TABLE = "table"
    ODD_REPORTS = "odd-reports"


def _check(n: int, n_r: int) -> None:
    if n < 1 or not (0 <= n_r <= n):
        raise DomainError(f"need n >= 1 and 0 <= n_r <= n, got n={n}, n_r={n_r}")
    if n % 2 == 0:
        raise ParityError(f"ratio bounds are stated for odd n, got n={n}")


def _out(value: Fraction, exact: bool) -> Ratio:
    return value if exact else float(value)


def _zero_information(n: int, n_r: int) -> Fraction | None:
    n_u = n - n_r
    if n_r == 0:
        return None
    if n_u == 0:
        return Fraction(1)
    if n_r % 2 == 1:
        return Fraction(2 * n_u + n_r - 1, n_r + 1)
    return Fraction(2 * n_u + n_r, n_r)


def _small_share(lam: Fraction) -> Fraction:
    return 1 + 2 * lam / (1 - lam)


def pqm_ratio_bound(lam: Ratio, delta: Ratio) -> Ratio:
    """1 + 4(1-λ)Δ / (1 - 2(1-λ)Δ); infinite once the denominator vanishes."""
    spread = 2 * (1 - lam) * delta
    if spread >= 1:
        return math.inf
    return 1 + 2 * spread / (1 - spread)


def sar_upper(
    regime: Regime,
    n: int,
    n_r: int,
    q: QueryPlan | None = None,
    exact: bool = False,
) -> Ratio:
    """Worst-case ratio achieved by the best known truthful mechanism of a regime.

    Args:
        regime: Information regime
        n: Capacity, odd
        n_r: Number of reports
        q: Query plan, required for ``Regime.K_QUANTILE``
        exact: Return a Fraction when the value is rational

    Returns:
        The ratio bound; ``math.inf`` for the zero-information regime without reports
    """
    _check(n, n_r)
    n_u = n - n_r
    lam = Fraction(n_r, n)

    if regime is Regime.ZERO:
        value = _zero_information(n, n_r)
        return math.inf if value is None else _out(value, exact)

    if regime is Regime.MEDIAN:
        if n_u in (0, 1, n):
            return _out(Fraction(1), exact)
        if lam >= Fraction(1, 2):
            return _out(max(Fraction(2 * n, n_r + 1), Fraction(2)) - 1, exact)
        return _out(_small_share(lam), exact)

    if regime is Regime.K_QUANTILE:
        if q is None:
            raise DomainError("the k-quantile bound needs a query plan")
        if n_u == 0:
            return _out(Fraction(1), exact)
        gap = Fraction(delta_lift(q, n_r, n_u))
        value = pqm_ratio_bound(lam, gap)
        if value == math.inf:
            return math.inf
        return _out(value, exact)

    return _out(Fraction(1), exact)


def sar_upper_even_grid(n: int, n_r: int, k: int, exact: bool = False) -> Ratio:
    """Ratio of the lifted even-grid PQM at its largest possible gap (σ-1)/(2n_u), σ = n_u/k."""
    _check(n, n_r)
    n_u = n - n_r
    if k < 1 or n_u == 0 or n_u % k != 0:
        raise UnsupportedPlanError(f"k={k} must divide n_u={n_u}")
    sigma = Fraction(n_u, k)
    share = 1 - Fraction(n_r, n)
    return _out(1 + 2 * share * (sigma - 1) / (n_u - share * (sigma - 1)), exact)


def sar_lower(
    regime: Regime,
    n: int,
    n_r: int,
    k: int | None = None,
    asymptotic: bool = False,
    variant: LowerVariant = LowerVariant.THEOREM,
    exact: bool = False,
) -> Ratio:
    """Ratio no truthful mechanism of the regime can beat.

    For ``Regime.K_QUANTILE`` the bound applies to mechanisms that only see
    the even-grid quantiles (2s-1)/(2k), and needs k | n_u.
    """
    _check(n, n_r)
    n_u = n - n_r
    lam = Fraction(n_r, n)

    if regime is Regime.ZERO:
        value = _zero_information(n, n_r)
        return math.inf if value is None else _out(value, exact)

    if regime is Regime.MEDIAN:
        if lam < Fraction(1, 3):
            return _out(_small_share(lam), exact)
        if asymptotic:
            return _out(max(Fraction(4) / (1 + lam), Fraction(2)) - 1, exact)
        quarter = (n + n_r) // 4
        inner = min(Fraction(n, quarter + 1), Fraction(2 * n, 2 * n - 2 * quarter - n_u))
        return _out(max(inner, Fraction(2)) - 1, exact)

    if regime is Regime.K_QUANTILE:
        if k is None or k < 1:
            raise DomainError(f"the k-quantile bound needs k >= 1, got {k}")
        if n_u == 0 or k >= n_u:
            return _out(Fraction(1), exact)
        if n_u % k != 0:
            raise UnsupportedPlanError(f"k={k} does not divide n_u={n_u}")
        if k == 1:
            return sar_lower(Regime.MEDIAN, n, n_r, asymptotic=asymptotic, exact=exact)
        sigma = Fraction(n_u, k)
        if variant is LowerVariant.TABLE:
            return _out(1 + 2 * (1 - lam) * sigma / ((1 + lam) * n_u + (1 - lam) * sigma), exact)
        if variant is LowerVariant.ODD_REPORTS:
            if k % 2 == 1 or n_r % 2 == 0:
                raise RegimeError("the odd-reports refinement needs even k and odd n_r")
            return _out(1 + (2 * sigma - 1) / (n + n_u + 1 - 2 * sigma), exact)
        if k % 2 == 0:
            return _out(1 + 2 * sigma / (n + n_u - 2 * sigma), exact)
        return _out(1 + 6 * sigma / (n + n_u - 5 * sigma), exact)

    return _out(Fraction(1), exact)
