"""Brute-force ground truth on small instances.

Adversary trees are walked depth first in exact rational arithmetic: the
budget is converted to :class:`~fractions.Fraction`, every proposed value and
probability is converted exactly (a float is a dyadic rational), and each
proposed distribution is renormalized so its probabilities sum to exactly 1.
Path weights, sums and tail thresholds are therefore exact, and rounding
cannot manufacture a bound violation.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Literal

from .adversary import BUDGET_RTOL, BudgetConstraint, IncrementDistribution, charge
from .errors import BudgetViolation, StrategyStalled, TooLarge
from .recycling import GameConfig, GameState, Strategy, decide_tosses, finish_step, land

MAX_PATHS = 10**7


@dataclass(frozen=True)
class OutcomePath:
    values: tuple[Fraction, ...]
    prob: Fraction

    @property
    def total(self) -> Fraction:
        return sum(self.values, Fraction(0))


def _exact(dist: IncrementDistribution) -> list[tuple[Fraction, Fraction]]:
    atoms = [(Fraction(v), Fraction(p)) for v, p in dist.support if p > 0]
    mass = sum(p for _, p in atoms)
    return [(v, p / mass) for v, p in atoms]


def exact_constraint(constraint: BudgetConstraint) -> BudgetConstraint:
    return BudgetConstraint(Fraction(constraint.c), Fraction(constraint.mu), constraint.n,
                            constraint.direction)


def enumerate_paths(adversary, constraint: BudgetConstraint,
                    max_paths: int = MAX_PATHS) -> Iterator[OutcomePath]:
    """Yield every realization of the adversary's decision tree with its probability.

    Raises :class:`TooLarge` as soon as the product of support sizes along the
    first descent, or the running leaf count, passes ``max_paths``.
    """
    cons = exact_constraint(constraint)
    mu, n = cons.mu, cons.n
    cap = mu * (1 + Fraction(BUDGET_RTOL))
    floor = mu * (1 - Fraction(BUDGET_RTOL))
    leaves = 0
    first_estimate = 1
    first_descent = True

    def walk(history: tuple, used: Fraction, prob: Fraction):
        nonlocal leaves, first_estimate, first_descent
        step = len(history) + 1
        if step > n:
            if cons.direction == "lower" and used < floor:
                raise BudgetViolation(f"means sum to {used} < mu={mu}")
            leaves += 1
            if leaves > max_paths:
                raise TooLarge(f"more than {max_paths} paths")
            first_descent = False
            yield OutcomePath(history, prob)
            return
        dist = adversary(history, mu - used, step, cons)
        charge(dist, cons)
        atoms = _exact(dist)
        if first_descent:
            first_estimate *= len(atoms)
            if first_estimate > max_paths:
                raise TooLarge(f"first descent already implies more than {max_paths} paths")
        a = sum(v * p for v, p in atoms)
        used = used + a
        if cons.direction == "upper" and used > cap:
            raise BudgetViolation(f"step {step}: means sum to {used} > mu={mu}")
        for v, p in atoms:
            yield from walk(history + (v,), used, prob * p)

    yield from walk((), Fraction(0), Fraction(1))


def exact_sum_distribution(adversary, constraint: BudgetConstraint,
                           max_paths: int = MAX_PATHS) -> dict[Fraction, Fraction]:
    """Exact law of ``X_1 + ... + X_n`` as ``{sum: probability}``."""
    dist: dict[Fraction, Fraction] = defaultdict(Fraction)
    for path in enumerate_paths(adversary, constraint, max_paths):
        dist[path.total] += path.prob
    total = sum(dist.values())
    if abs(total - 1) > Fraction(1, 10**9):
        raise AssertionError(f"path probabilities sum to {float(total)}")
    return dict(dist)


def tail_from_distribution(dist: dict[Fraction, Fraction], threshold,
                           direction: Literal["upper", "lower"] = "upper") -> Fraction:
    t = Fraction(threshold)
    if direction == "upper":
        return sum((p for s, p in dist.items() if s >= t), Fraction(0))
    return sum((p for s, p in dist.items() if s <= t), Fraction(0))


def exact_tail(adversary, constraint: BudgetConstraint, threshold,
               direction: Literal["upper", "lower"] | None = None,
               max_paths: int = MAX_PATHS) -> Fraction:
    """Exact ``Pr[sum >= threshold]`` (``direction="upper"``) or ``Pr[sum <= threshold]``.

    ``direction`` defaults to the constraint's own direction.
    """
    dist = exact_sum_distribution(adversary, constraint, max_paths)
    return tail_from_distribution(dist, threshold, direction or constraint.direction)


def exact_tail_at(adversary, constraint: BudgetConstraint, delta) -> Fraction:
    """Exact probability of the tail event ``sum >= (1+delta) mu`` / ``sum <= (1-delta) mu``."""
    cons = exact_constraint(constraint)
    return exact_tail(adversary, constraint, cons.threshold(Fraction(delta)))


def exact_game(config: GameConfig, strategy: Strategy,
               max_paths: int = MAX_PATHS) -> dict[int, Fraction]:
    """Exact law of the total delay ``D`` for a deterministic strategy.

    Every sequence of bin choices is enumerated with weight ``P**-tosses``;
    ``P**M`` must not exceed ``max_paths``.
    """
    if not strategy.deterministic:
        raise ValueError(f"{strategy.describe()} draws its own randomness; exact_game needs a deterministic strategy")
    P, M = config.P, config.M
    if P ** M > max_paths:
        raise TooLarge(f"P**M = {P}**{M} exceeds {max_paths}")
    dist: dict[int, Fraction] = defaultdict(Fraction)

    def explore(state: GameState, weight: Fraction):
        if state.terminated:
            dist[sum(state.occupancy_history)] += weight
            return
        balls = decide_tosses(state, strategy, None)
        share = weight / P ** len(balls)
        for targets in itertools.product(range(1, P + 1), repeat=len(balls)):
            nxt = state.copy()
            for ball, b in zip(balls, targets):
                land(nxt, ball, b)
            finish_step(nxt, strategy, len(balls))
            if nxt.idle_steps >= config.stall_cap:
                raise StrategyStalled(f"{strategy.describe()} stalled during enumeration")
            explore(nxt, share)

    explore(GameState.initial(config), Fraction(1))
    if sum(dist.values()) != 1:
        raise AssertionError("game outcome probabilities do not sum to 1")
    return dict(sorted(dist.items()))


def exact_mgf(dist: IncrementDistribution, t: float, shift: float = 0.0) -> float:
    """``sum p e^{t (x - shift)}`` over the support."""
    return math.fsum(float(p) * math.exp(t * (float(x) - shift)) for x, p in dist.support)
