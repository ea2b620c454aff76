"""Closed-form tail bounds.

Chernoff (additive and multiplicative), additive Azuma, and the
multiplicative Azuma family for supermartingales (upper tail) and
submartingales (lower tail), together with the two bounds used to analyze
the (P, M)-recycling game.

Every bound is evaluated in log space; :class:`TailBound` keeps the raw
exponent alongside the probability clamped to ``[0, 1]`` so that values like
``exp(-64)`` (or far smaller) stay reportable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, NamedTuple, Sequence

from .errors import BoundDomainError

Tail = Literal["upper", "lower"]
ChernoffVariant = Literal["additive", "mult_upper", "mult_lower"]


@dataclass(frozen=True)
class TailBound:
    value: float
    log_value: float

    @classmethod
    def from_log(cls, log_value: float) -> "TailBound":
        log_value = float(log_value) + 0.0  # normalizes -0.0
        if log_value >= 0.0:
            return cls(1.0, log_value)
        return cls(math.exp(log_value), log_value)


def _check_finite(**kwargs: float) -> None:
    for name, x in kwargs.items():
        if not math.isfinite(x):
            raise BoundDomainError(f"{name} must be finite, got {x!r}")


@dataclass(frozen=True)
class BoundQuery:
    """Budget ``mu``, range width ``c`` and relative deviation ``delta``."""

    mu: float
    c: float
    delta: float

    def __post_init__(self):
        _check_finite(mu=self.mu, c=self.c, delta=self.delta)
        if self.mu < 0:
            raise BoundDomainError(f"mu must be >= 0, got {self.mu}")
        if self.c <= 0:
            raise BoundDomainError(f"c must be > 0, got {self.c}")
        if self.delta < 0:
            raise BoundDomainError(f"delta must be >= 0, got {self.delta}")


@dataclass(frozen=True)
class AdditiveQuery:
    eps: float
    c_list: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "c_list", tuple(float(c) for c in self.c_list))
        _check_finite(eps=self.eps)
        if self.eps <= 0:
            raise BoundDomainError(f"eps must be > 0, got {self.eps}")
        if not self.c_list:
            raise BoundDomainError("c_list must be non-empty")
        if any(not (c > 0 and math.isfinite(c)) for c in self.c_list):
            raise BoundDomainError("every c_i must be a finite positive number")


@dataclass(frozen=True)
class ChernoffQuery:
    n: int
    mu: float = 0.0
    eps: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        _check_finite(mu=self.mu, eps=self.eps, delta=self.delta)
        if int(self.n) != self.n or self.n < 1:
            raise BoundDomainError(f"n must be a positive integer, got {self.n}")
        if self.mu < 0:
            raise BoundDomainError(f"mu must be >= 0, got {self.mu}")


def rel_entropy_term(x: float) -> float:
    """``(1 + x) ln(1 + x) - x`` for ``x >= -1``, accurate near 0.

    The sharp upper-tail exponent is ``-(mu/c) * rel_entropy_term(delta)`` and
    the sharp lower-tail exponent is ``-(mu/c) * rel_entropy_term(-delta)``.
    """
    if x < -1.0:
        raise BoundDomainError(f"x must be >= -1, got {x}")
    if x == -1.0:
        return 1.0
    if abs(x) < 0.1:
        # sum_{k>=2} (-1)^k x^k / (k (k - 1)); |x| < 0.1 means 30 terms is far past 1 ulp
        total = 0.0
        power = x * x
        for k in range(2, 32):
            term = power / (k * (k - 1))
            total += term if k % 2 == 0 else -term
            power *= x
        return total
    return (1.0 + x) * math.log1p(x) - x


def mult_azuma_upper(q: BoundQuery) -> TailBound:
    """``exp(-delta^2 mu / ((2 + delta) c))``."""
    d = q.delta
    return TailBound.from_log(-(d * (d / (2.0 + d))) * (q.mu / q.c))


def mult_azuma_upper_sharp(q: BoundQuery) -> TailBound:
    """``(e^delta / (1 + delta)^(1 + delta)) ^ (mu / c)``."""
    return TailBound.from_log(-(q.mu / q.c) * rel_entropy_term(q.delta))


def _require_lower(q: BoundQuery) -> None:
    if q.delta >= 1.0:
        raise BoundDomainError(f"lower-tail bounds need delta < 1, got {q.delta}")


def mult_azuma_lower(q: BoundQuery) -> TailBound:
    """``exp(-delta^2 mu / (2 c))``, for ``0 <= delta < 1``."""
    _require_lower(q)
    d = q.delta
    return TailBound.from_log(-(d * d / 2.0) * (q.mu / q.c))


def mult_azuma_lower_sharp(q: BoundQuery) -> TailBound:
    """``(e^-delta / (1 - delta)^(1 - delta)) ^ (mu / c)``, for ``0 <= delta < 1``."""
    _require_lower(q)
    return TailBound.from_log(-(q.mu / q.c) * rel_entropy_term(-q.delta))


def additive_azuma(q: AdditiveQuery) -> TailBound:
    """``exp(-eps^2 / (2 sum c_i^2))``."""
    return TailBound.from_log(-(q.eps * q.eps) / (2.0 * math.fsum(c * c for c in q.c_list)))


def chernoff(q: ChernoffQuery, variant: ChernoffVariant) -> TailBound:
    """Chernoff bounds for sums of ``n`` independent ``{0, 1}`` variables with mean ``mu``."""
    if variant == "additive":
        if q.eps <= 0:
            raise BoundDomainError("additive Chernoff needs eps > 0")
        return TailBound.from_log(-2.0 * q.eps * q.eps / q.n)
    d = q.delta
    if d < 0:
        raise BoundDomainError(f"delta must be >= 0, got {d}")
    if variant == "mult_upper":
        return TailBound.from_log(-(d * (d / (2.0 + d))) * q.mu)
    if variant == "mult_lower":
        if d >= 1.0:
            raise BoundDomainError(f"lower-tail Chernoff needs delta < 1, got {d}")
        return TailBound.from_log(-(d * d / 2.0) * q.mu)
    raise BoundDomainError(f"unknown Chernoff variant {variant!r}")


def log_mgf_bound(t: float, a: float, b: float) -> float:
    """Log of ``exp((a/(a+b)) (e^{t(a+b)} - 1) - t a)``.

    Upper-bounds ``ln E[e^{tX}]`` for ``X`` in ``[-a, b]`` with ``E[X] <= 0``
    when ``t > 0``, and with ``E[X] >= 0`` when ``t < 0``.
    """
    _check_finite(t=t, a=a, b=b)
    if a < 0 or b < 0:
        raise BoundDomainError(f"a and b must be >= 0, got a={a}, b={b}")
    width = a + b
    if width <= 0:
        raise BoundDomainError(f"a + b must be > 0, got {width}")
    if t * width > 709.0:
        return math.inf if a > 0 else 0.0
    return (a / width) * math.expm1(t * width) - t * a


def mgf_bound(t: float, a: float, b: float) -> float:
    """MGF upper bound; may exceed 1 and overflows to ``inf`` rather than raising."""
    x = log_mgf_bound(t, a, b)
    return math.exp(x) if x < 709.0 else math.inf


class RecyclingBound(NamedTuple):
    threshold: float
    failure_prob: float
    case: Literal["large_M", "small_M"]


def recycling_delay_bound(P: int, M: int, eps: float) -> RecyclingBound:
    """Delay threshold ``3M + 2P ln(1/eps)`` exceeded with probability at most ``eps``.

    ``case`` records which of the two substitutions (``delta = 2`` when
    ``M >= P ln(1/eps)``, otherwise ``delta = 2P ln(1/eps) / M``) establishes it;
    ties go to ``large_M``.
    """
    if P < 1 or M < 1:
        raise BoundDomainError(f"P and M must be >= 1, got P={P}, M={M}")
    if not 0.0 < eps < 1.0:
        raise BoundDomainError(f"eps must lie in (0, 1), got {eps}")
    log_inv = -math.log(eps)
    case = "large_M" if M >= P * log_inv else "small_M"
    return RecyclingBound(3.0 * M + 2.0 * P * log_inv, eps, case)


class RecyclingComparison(NamedTuple):
    good: TailBound
    bad: TailBound


def compare_recycling_bounds(P: int, M: int, delta: float) -> RecyclingComparison:
    """Bounds on ``Pr[D > (1 + delta) M]`` from the multiplicative (good) and
    additive (bad) Azuma inequalities with per-toss range ``P``."""
    if P < 1 or M < 1:
        raise BoundDomainError(f"P and M must be >= 1, got P={P}, M={M}")
    _check_finite(delta=delta)
    if delta < 0:
        raise BoundDomainError(f"delta must be >= 0, got {delta}")
    d = delta
    good = TailBound.from_log(-(d * (d / (2.0 + d))) * M / P)
    bad = TailBound.from_log(-(d * d) * M / (2.0 * P * P))
    return RecyclingComparison(good, bad)


@dataclass(frozen=True)
class InequalityPoint:
    delta: float
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    @property
    def holds(self) -> bool:
        return self.slack <= 0.0


def check_log_inequalities(grid: Sequence[float], tail: Tail = "upper") -> list[InequalityPoint]:
    """Evaluate both sides of the exponent inequality behind each simplified bound.

    upper: ``delta - (1+delta) ln(1+delta) <= -delta^2 / (2+delta)`` for ``delta >= 0``
    lower: ``-delta - (1-delta) ln(1-delta) <= -delta^2 / 2`` for ``0 <= delta < 1``

    Violations are reported through :attr:`InequalityPoint.holds`, never raised.
    """
    points = []
    for d in grid:
        d = float(d)
        if tail == "upper":
            if not (d >= 0 and math.isfinite(d)):
                raise BoundDomainError(f"upper grid needs delta >= 0, got {d}")
            points.append(InequalityPoint(d, -rel_entropy_term(d), -(d * (d / (2.0 + d)))))
        elif tail == "lower":
            if not 0 <= d < 1:
                raise BoundDomainError(f"lower grid needs 0 <= delta < 1, got {d}")
            points.append(InequalityPoint(d, -rel_entropy_term(-d), -(d * d) / 2.0))
        else:
            raise BoundDomainError(f"unknown tail {tail!r}")
    return points
