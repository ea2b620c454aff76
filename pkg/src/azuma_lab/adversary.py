"""Adaptive-adversary martingale simulation.

An adversary builds ``X_1, ..., X_n`` in ``[0, c]`` one step at a time: after
seeing ``X_1..X_{i-1}`` it proposes a finite distribution ``D_i`` and the
engine draws ``X_i`` from it. The engine, not the adversary, computes each
``E[X_i | D_i]`` and charges it against the mean budget ``mu``: a cap for
upper-tail experiments, a floor for lower-tail ones.

Adversaries are deterministic callables
``adversary(history, remaining, step, constraint) -> IncrementDistribution``
where ``history`` is the tuple of realized increments, ``remaining`` is
``mu`` minus the budget already charged and ``step`` is 1-based. All
randomness lives in the engine's :class:`~azuma_lab.rng.SplitMix64` stream.

Catalog adversaries do plain arithmetic only, so they run unchanged on
:class:`fractions.Fraction` inputs; the exact oracle relies on this.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from numbers import Real
from typing import Any, Callable, Literal, Mapping, Protocol

from .bounds import BoundQuery, TailBound, mult_azuma_lower, mult_azuma_upper
from .errors import BudgetViolation, SupportViolation
from .parallel import map_chunks
from .rng import SplitMix64, derive_seed
from .stats import clopper_pearson

Direction = Literal["upper", "lower"]

BUDGET_RTOL = 1e-12
PROB_ATOL = 1e-12


@dataclass(frozen=True)
class IncrementDistribution:
    """Finite distribution given as ``((value, prob), ...)``."""

    support: tuple[tuple[Real, Real], ...]

    def __post_init__(self):
        support = tuple((v, p) for v, p in self.support)
        if not support:
            raise ValueError("support must be non-empty")
        if any(not 0 <= p <= 1 for _, p in support):
            raise ValueError(f"probabilities must lie in [0, 1]: {support}")
        if abs(sum(p for _, p in support) - 1) > PROB_ATOL:
            raise ValueError(f"probabilities must sum to 1: {support}")
        object.__setattr__(self, "support", support)

    @property
    def mean(self):
        return sum(v * p for v, p in self.support)

    @classmethod
    def point(cls, value) -> "IncrementDistribution":
        return cls(((value, 1),))

    @classmethod
    def two_point(cls, c, mean) -> "IncrementDistribution":
        """Mass on ``{0, c}`` with the given mean; the widest spread for that mean."""
        p = mean / c
        return cls(tuple((v, q) for v, q in ((0, 1 - p), (c, p)) if q > 0))

    @classmethod
    def three_point(cls, c, mean, weight) -> "IncrementDistribution":
        """Mass ``weight`` on ``mean`` itself, the rest split over ``{0, c}``."""
        p = mean / c
        atoms = ((0, (1 - weight) * (1 - p)), (mean, weight), (c, (1 - weight) * p))
        merged: dict = {}
        for v, q in atoms:
            if q > 0:
                merged[v] = merged.get(v, 0) + q
        return cls(tuple(merged.items()))


@dataclass(frozen=True)
class BudgetConstraint:
    c: float
    mu: float
    n: int
    direction: Direction = "upper"

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be > 0, got {self.c}")
        if not self.mu >= 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if self.direction not in ("upper", "lower"):
            raise ValueError(f"direction must be 'upper' or 'lower', got {self.direction!r}")
        if self.direction == "lower" and self.mu > self.n * self.c:
            raise ValueError(f"a floor of mu={self.mu} is unreachable with n*c={self.n * self.c}")

    def threshold(self, delta):
        """Sum defining the tail event: ``(1+delta) mu`` above, ``(1-delta) mu`` below."""
        return (1 + delta) * self.mu if self.direction == "upper" else (1 - delta) * self.mu

    def in_tail(self, total, delta) -> bool:
        t = self.threshold(delta)
        return total >= t if self.direction == "upper" else total <= t

    def bound(self, delta: float) -> TailBound:
        q = BoundQuery(float(self.mu), float(self.c), float(delta))
        return mult_azuma_upper(q) if self.direction == "upper" else mult_azuma_lower(q)


class Adversary(Protocol):
    def __call__(
        self, history: tuple, remaining, step: int, constraint: BudgetConstraint
    ) -> IncrementDistribution: ...


@dataclass(frozen=True)
class ProcessTrace:
    increments: tuple[float, ...]
    means: tuple[float, ...]
    sum: float
    budget_used: float

    @property
    def martingale(self) -> list[float]:
        """``Z_0..Z_n`` with ``Z_i = sum_{j<=i} (X_j - a_j)``."""
        z, out = 0.0, [0.0]
        for x, a in zip(self.increments, self.means):
            z += x - a
            out.append(z)
        return out


@dataclass(frozen=True)
class TailEstimate:
    trials: int
    hits: int
    point: float
    ci_lower: float
    ci_upper: float
    confidence: float

    @classmethod
    def from_counts(cls, hits: int, trials: int, confidence: float) -> "TailEstimate":
        lo, hi = clopper_pearson(hits, trials, confidence)
        return cls(trials, hits, hits / trials, lo, hi, confidence)


class Verdict(str, enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"

    def __str__(self) -> str:
        return self.value


def charge(dist: IncrementDistribution, constraint: BudgetConstraint):
    """Mean of ``dist`` after checking its support lies in ``[0, c]``."""
    c = constraint.c
    for v, _ in dist.support:
        if not 0 <= v <= c:
            raise SupportViolation(f"increment {v} outside [0, {c}]")
    return dist.mean


def _sample(dist: IncrementDistribution, u: float):
    acc = 0.0
    last = None
    for v, p in dist.support:
        if p <= 0:
            continue
        acc += p
        last = v
        if u < acc:
            return v
    return last  # u landed in the rounding gap above the last cumulative sum


def run_trial(adversary: Adversary, constraint: BudgetConstraint, seed: int) -> ProcessTrace:
    rng = SplitMix64(seed)
    mu = constraint.mu
    cap = mu * (1 + BUDGET_RTOL)
    history: list = []
    means: list = []
    used = 0
    total = 0
    for step in range(1, constraint.n + 1):
        dist = adversary(tuple(history), mu - used, step, constraint)
        a = charge(dist, constraint)
        used += a
        if constraint.direction == "upper" and used > cap:
            raise BudgetViolation(f"step {step}: means sum to {used} > mu={mu}")
        x = _sample(dist, rng.random())
        history.append(x)
        means.append(a)
        total += x
    if constraint.direction == "lower" and used < mu * (1 - BUDGET_RTOL):
        raise BudgetViolation(f"means sum to {used} < mu={mu}")
    return ProcessTrace(tuple(history), tuple(means), total, used)


def _count_hits(adversary, constraint, delta, seed, start, stop) -> int:
    hits = 0
    for k in range(start, stop):
        try:
            trace = run_trial(adversary, constraint, derive_seed(seed, k))
        except (BudgetViolation, SupportViolation) as exc:
            raise exc.with_trial(k) from exc
        hits += constraint.in_tail(trace.sum, delta)
    return hits


def estimate_tail(
    adversary: Adversary,
    constraint: BudgetConstraint,
    delta: float,
    trials: int,
    seed: int,
    confidence: float = 0.99,
) -> TailEstimate:
    """Monte Carlo estimate of ``Pr[sum >= (1+delta) mu]`` (or ``<= (1-delta) mu``).

    Trial ``k`` runs on ``derive_seed(seed, k)``, so the result does not depend
    on how trials are spread across workers.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not delta >= 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    hits = sum(map_chunks(_count_hits, trials, (adversary, constraint, delta, seed)))
    return TailEstimate.from_counts(hits, trials, confidence)


def verify_bound(estimate: TailEstimate, bound: TailBound) -> Verdict:
    """PASS unless the whole confidence interval sits above the bound."""
    return Verdict.PASS if estimate.ci_lower <= bound.value else Verdict.FAIL


# -- catalog -----------------------------------------------------------------


def feasible_mean(desired, remaining, step: int, constraint: BudgetConstraint):
    """Clamp ``desired`` to the means that keep the budget satisfiable.

    Under a cap the mean may not exceed what is left; under a floor it must be
    large enough that the remaining steps, each at most ``c``, can still reach it.
    """
    c = constraint.c
    if constraint.direction == "upper":
        lo, hi = 0, min(c, max(remaining, 0))
    else:
        steps_after = constraint.n - step
        lo, hi = max(0, min(c, remaining - steps_after * c)), c
    return min(max(desired, lo), hi)


@dataclass(frozen=True)
class _CatalogAdversary:
    name = "abstract"

    def params(self) -> dict[str, Any]:
        return {}

    def describe(self) -> str:
        args = ",".join(f"{k}={v}" for k, v in self.params().items())
        return f"{self.name}({args})" if args else self.name

    def desired(self, history, remaining, step, constraint):
        raise NotImplementedError

    def __call__(self, history, remaining, step, constraint):
        a = feasible_mean(self.desired(history, remaining, step, constraint), remaining, step, constraint)
        return IncrementDistribution.two_point(constraint.c, a)


@dataclass(frozen=True)
class PointMassZero(_CatalogAdversary):
    """Always 0. Under a floor it falls back to the smallest forced value."""

    name = "point_mass_zero"

    def __call__(self, history, remaining, step, constraint):
        return IncrementDistribution.point(feasible_mean(0, remaining, step, constraint))


@dataclass(frozen=True)
class IidBernoulli(_CatalogAdversary):
    """Non-adaptive baseline: ``{0, c}`` with mean ``mu / n`` every step."""

    name = "iid_bernoulli"

    def desired(self, history, remaining, step, constraint):
        return constraint.mu / constraint.n


@dataclass(frozen=True)
class FrontLoaded(_CatalogAdversary):
    """Spends the budget as early as the range ``c`` allows."""

    name = "front_loaded"

    def desired(self, history, remaining, step, constraint):
        return remaining


@dataclass(frozen=True)
class BackLoaded(_CatalogAdversary):
    """Hoards the budget, spending only what the last steps cannot absorb."""

    name = "back_loaded"

    def desired(self, history, remaining, step, constraint):
        return remaining - (constraint.n - step) * constraint.c


@dataclass(frozen=True)
class ReactiveChaser(_CatalogAdversary):
    """Multiplies its fair share by ``aggression`` while the sum is ahead of the
    budget spent so far, and divides it otherwise."""

    name = "reactive_chaser"
    aggression: Real = 2

    def params(self):
        return {"aggression": self.aggression}

    def desired(self, history, remaining, step, constraint):
        fair = remaining / (constraint.n - step + 1)
        spent = constraint.mu - remaining
        return fair * self.aggression if sum(history) > spent else fair / self.aggression


@dataclass(frozen=True)
class ThreePoint(_CatalogAdversary):
    """Fair-share spender on the support ``{0, a, c}`` with mass ``weight`` on ``a``."""

    name = "three_point"
    weight: Real = 0.5

    def params(self):
        return {"weight": self.weight}

    def __call__(self, history, remaining, step, constraint):
        fair = remaining / (constraint.n - step + 1)
        a = feasible_mean(fair, remaining, step, constraint)
        return IncrementDistribution.three_point(constraint.c, a, self.weight)


@dataclass(frozen=True)
class Scheduled:
    """Declarative adversary: each rule hands steps up to ``until`` to a catalog entry.

    ``rules`` is a sequence of ``(until, adversary)`` pairs with increasing
    ``until``; ``None`` means "every remaining step".
    """

    rules: tuple[tuple[int | None, Any], ...] = field(default_factory=tuple)
    name = "scheduled"

    def describe(self) -> str:
        parts = [f"{'*' if u is None else u}:{a.describe()}" for u, a in self.rules]
        return f"scheduled[{';'.join(parts)}]"

    def __call__(self, history, remaining, step, constraint):
        for until, adversary in self.rules:
            if until is None or step <= until:
                return adversary(history, remaining, step, constraint)
        return IncrementDistribution.point(feasible_mean(0, remaining, step, constraint))


_CATALOG: dict[str, Callable[..., Any]] = {
    cls.name: cls
    for cls in (IidBernoulli, FrontLoaded, BackLoaded, ReactiveChaser, PointMassZero, ThreePoint)
}


def builtin_adversaries() -> dict[str, Callable[..., Any]]:
    """Name -> factory for every catalog adversary."""
    return dict(_CATALOG)


def make_adversary(name: str, **params) -> Any:
    try:
        factory = _CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown adversary {name!r}; choose from {sorted(_CATALOG)}") from None
    return factory(**params)


def adversary_from_spec(spec: str | Mapping[str, Any]) -> Any:
    """Build an adversary from a name or a declarative mapping.

    Accepted shapes::

        "front_loaded"
        {"name": "reactive_chaser", "params": {"aggression": 3}}
        {"schedule": [{"until": 2, "family": "front_loaded"},
                      {"family": "three_point", "weight": 0.25}]}
    """
    if isinstance(spec, str):
        return make_adversary(spec)
    if "schedule" in spec:
        rules = []
        last = 0
        for rule in spec["schedule"]:
            rule = dict(rule)
            until = rule.pop("until", None)
            family = rule.pop("family")
            params = dict(rule.pop("params", {}))
            params.update(rule)
            if until is not None:
                until = int(until)
                if until <= last:
                    raise ValueError("schedule 'until' values must increase")
                last = until
            rules.append((until, make_adversary(family, **params)))
        return Scheduled(tuple(rules))
    return make_adversary(spec["name"], **dict(spec.get("params", {})))


def describe(adversary) -> str:
    fn = getattr(adversary, "describe", None)
    return fn() if fn else getattr(adversary, "__name__", type(adversary).__name__)
