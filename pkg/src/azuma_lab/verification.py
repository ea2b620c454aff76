"""Sweeps that pit every bound against exact or seeded ground truth.

Each sweep returns a :class:`CheckResult`; ``worst`` is the largest
``observed - allowed`` margin seen (``<= 0`` means every case held).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from . import adversary as adv
from .adversary import BudgetConstraint, IncrementDistribution, Verdict
from .bounds import (
    BoundQuery,
    TailBound,
    check_log_inequalities,
    compare_recycling_bounds,
    mgf_bound,
    mult_azuma_lower,
    mult_azuma_lower_sharp,
    mult_azuma_upper,
    mult_azuma_upper_sharp,
)
from .oracle import exact_game, exact_mgf, exact_sum_distribution, tail_from_distribution
from .recycling import Counterexample, Eager, GameConfig, SingleFile

BoundFn = Callable[[BoundQuery], TailBound]


@dataclass(frozen=True)
class CheckResult:
    name: str
    cases: int
    violations: int
    worst: float
    detail: str = ""

    @property
    def verdict(self) -> Verdict:
        return Verdict.PASS if self.violations == 0 else Verdict.FAIL


def frange(start: float, stop: float, step: float) -> list[float]:
    """Inclusive grid built from integer multiples, so no drift accumulates."""
    count = int(round((stop - start) / step))
    return [round(start + i * step, 12) for i in range(count + 1)]


def inequality_sweep(upper_grid: Sequence[float] | None = None,
                     lower_grid: Sequence[float] | None = None) -> list[CheckResult]:
    upper_grid = frange(0.01, 10.0, 0.01) if upper_grid is None else upper_grid
    lower_grid = frange(0.0, 0.999, 0.001) if lower_grid is None else lower_grid
    out = []
    for tail, grid in (("upper", upper_grid), ("lower", lower_grid)):
        points = check_log_inequalities(grid, tail)
        bad = [p for p in points if not p.holds]
        out.append(CheckResult(f"log_inequality_{tail}", len(points), len(bad),
                               max(p.slack for p in points)))
    return out


def mgf_test_distributions(count: int, sign: int, seed: int = 2024) -> list[tuple[IncrementDistribution, float, float]]:
    """``(dist, a, b)`` triples on ``[-a, b]`` with ``sign * mean <= 0``.

    Half two-point, half three-point, plus the endpoint distributions with
    mean exactly 0 where the chord argument is tight.
    """
    rng = np.random.default_rng(seed)
    out = []
    widths = [(0.5, 0.5), (0.5, 2.0), (1.0, 1.0), (2.0, 0.5), (1.0, 3.0), (3.0, 1.0)]
    for a, b in widths:
        p = a / (a + b)
        d = IncrementDistribution(((-a, 1 - p), (b, p)))
        if sign * d.mean <= 0:
            out.append((d, a, b))
    while len(out) < count:
        a, b = widths[int(rng.integers(len(widths)))]
        k = 2 if len(out) % 2 == 0 else 3
        xs = np.sort(rng.uniform(-a, b, size=k))
        ps = rng.dirichlet(np.ones(k))
        ps[-1] = 1.0 - ps[:-1].sum()
        if ps[-1] < 0:
            continue
        d = IncrementDistribution(tuple(zip(xs.tolist(), ps.tolist())))
        if sign * d.mean <= 0:
            out.append((d, a, b))
    return out


def mgf_sweep(count: int = 10_000, t_values: Sequence[float] | None = None,
              rtol: float = 1e-12) -> list[CheckResult]:
    """``E[e^{tX}] <= mgf_bound(t, a, b)`` for mean <= 0 with ``t > 0`` and mean >= 0 with ``t < 0``."""
    t_values = frange(0.1, 4.0, 0.1) if t_values is None else t_values
    out = []
    for sign, name in ((1, "mgf_positive_t"), (-1, "mgf_negative_t")):
        cases = violations = 0
        worst = -math.inf
        for dist, a, b in mgf_test_distributions(count, sign):
            for t in t_values:
                t = sign * t
                exact = exact_mgf(dist, t)
                bound = mgf_bound(t, a, b)
                cases += 1
                worst = max(worst, exact / bound - 1.0)
                if exact > bound * (1 + rtol):
                    violations += 1
        out.append(CheckResult(name, cases, violations, worst))
    return out


def sweep_adversaries() -> list:
    return [
        adv.IidBernoulli(),
        adv.FrontLoaded(),
        adv.BackLoaded(),
        adv.ReactiveChaser(),
        adv.ReactiveChaser(aggression=4),
        adv.PointMassZero(),
        adv.ThreePoint(),
        adv.ThreePoint(weight=Fraction(1, 4)),
        adv.Scheduled(((1, adv.BackLoaded()), (None, adv.ReactiveChaser()))),
    ]


def adversary_sweep(n_values: Iterable[int] = range(2, 9),
                    c_values: Sequence[float] = (1.0, 2.5),
                    budget_ratios: Sequence[float] = (0.5, 1.5),
                    upper_deltas: Sequence[float] | None = None,
                    lower_deltas: Sequence[float] = (0.0, 0.25, 0.5, 0.75),
                    adversaries: Sequence | None = None,
                    upper_bound: BoundFn = mult_azuma_upper,
                    lower_bound: BoundFn = mult_azuma_lower) -> list[CheckResult]:
    """Exact tail vs bound for every adversary, ``n``, ``c`` and budget ``mu = ratio * c``.

    A third budget, ``mu = 0.6 n c``, exercises the regime where the budget
    is a large share of the maximum possible sum. The sharp bounds are
    checked alongside the simplified ones.
    """
    upper_deltas = frange(0.25, 6.0, 0.25) if upper_deltas is None else upper_deltas
    adversaries = sweep_adversaries() if adversaries is None else adversaries
    tallies = {k: [0, 0, -math.inf] for k in ("upper", "upper_sharp", "lower", "lower_sharp")}
    checks = {
        "upper": (upper_deltas, (("upper", upper_bound), ("upper_sharp", mult_azuma_upper_sharp))),
        "lower": (lower_deltas, (("lower", lower_bound), ("lower_sharp", mult_azuma_lower_sharp))),
    }
    for a in adversaries:
        for n in n_values:
            for c in c_values:
                for mu in [r * c for r in budget_ratios] + [0.6 * n * c]:
                    for direction, (deltas, bounds) in checks.items():
                        cons = BudgetConstraint(c, mu, n, direction)
                        law = exact_sum_distribution(a, cons)
                        mu_q = Fraction(mu)
                        for delta in deltas:
                            d = Fraction(delta)
                            thr = (1 + d) * mu_q if direction == "upper" else (1 - d) * mu_q
                            p = float(tail_from_distribution(law, thr, direction))
                            for key, fn in bounds:
                                b = fn(BoundQuery(mu, c, delta)).value
                                t = tallies[key]
                                t[0] += 1
                                t[1] += p > b
                                t[2] = max(t[2], p - b)
    return [CheckResult(f"exact_adversary_{k}", *v) for k, v in tallies.items()]


GAME_CONFIGS = ((1, 4), (2, 1), (2, 2), (2, 3), (2, 4), (2, 8), (2, 12), (3, 1), (3, 2), (3, 3),
                (3, 6), (4, 4), (4, 6), (5, 5), (6, 4), (7, 3))


def game_sweep(configs: Sequence[tuple[int, int]] = GAME_CONFIGS) -> CheckResult:
    """Exact delay law vs ``Pr[D >= (1+delta) M] <= exp(-delta^2 M / ((2+delta) P))``."""
    cases = violations = 0
    worst = -math.inf
    for P, M in configs:
        for strategy in (Eager(), SingleFile(), Counterexample()):
            law = exact_game(GameConfig(P, M), strategy)
            for d in law:
                delta = d / M - 1.0
                if delta <= 0:
                    continue
                tail = float(sum(p for x, p in law.items() if x >= d))
                b = mult_azuma_upper(BoundQuery(float(M), float(P), delta)).value
                cases += 1
                violations += tail > b
                worst = max(worst, tail - b)
    return CheckResult("exact_game_vs_bound", cases, violations, worst)


def comparison_sweep(P_values: Iterable[int] = range(2, 65),
                     M_values: Sequence[int] = (16, 1024)) -> CheckResult:
    """Multiplicative bound never weaker than additive for ``2 <= delta <= P``."""
    cases = violations = 0
    worst = -math.inf
    for P in P_values:
        for M in M_values:
            for delta in frange(2.0, float(P), 0.25):
                good, bad = compare_recycling_bounds(P, M, delta)
                cases += 1
                margin = good.log_value - bad.log_value
                violations += margin > 0 or good.value > bad.value
                worst = max(worst, margin)
    return CheckResult("recycling_bound_comparison", cases, violations, worst)


def monte_carlo_agreement(seed: int, trials: int = 20_000, confidence: float = 1 - 1e-6) -> CheckResult:
    """Seeded estimates against exact values, at a confidence where a miss means a bug."""
    from scipy.stats import binom

    from .recycling import GameState, conditional_mean_check, land

    cases = violations = 0
    worst = -math.inf
    n, c, mu = 20, 1.0, 2.0
    cons = BudgetConstraint(c, mu, n)
    for delta in (0.5, 1.0, 2.0):
        est = adv.estimate_tail(adv.IidBernoulli(), cons, delta, trials, seed, confidence)
        k = math.ceil((1 + delta) * mu / c - 1e-12)
        exact = float(binom.sf(k - 1, n, mu / (n * c)))
        cases += 1
        miss = max(est.ci_lower - exact, exact - est.ci_upper)
        violations += miss > 0
        worst = max(worst, miss)
    state = GameState.initial(GameConfig(4, 8))
    for ball in (2, 3, 4):
        land(state, ball, 1)
    m = conditional_mean_check(state, trials, seed, confidence)
    cases += 1
    violations += not m.consistent
    worst = max(worst, max(m.ci_lower - m.exact, m.exact - m.ci_upper))
    return CheckResult("monte_carlo_agreement", cases, violations, worst)
