import math
from fractions import Fraction
from itertools import product

import mpmath
import pytest

from azuma_lab import adversary as adv
from azuma_lab.adversary import BudgetConstraint, IncrementDistribution
from azuma_lab.bounds import BoundQuery, mgf_bound, mult_azuma_lower, mult_azuma_upper
from azuma_lab.errors import BudgetViolation, TooLarge
from azuma_lab.oracle import (
    enumerate_paths,
    exact_game,
    exact_mgf,
    exact_sum_distribution,
    exact_tail,
    exact_tail_at,
)
from azuma_lab.recycling import Counterexample, Eager, GameConfig, RandomThrottle, SingleFile


def test_point_mass_tail_is_one():
    assert exact_tail(adv.PointMassZero(), BudgetConstraint(1, 1, 4), 0) == 1


def test_fair_coin_tail():
    # i.i.d. {0,1} with p = 1/2, n = 4: Pr[sum >= 3] = 5/16
    cons = BudgetConstraint(1, 2, 4)
    assert exact_tail(adv.IidBernoulli(), cons, 3) == Fraction(5, 16)


def test_front_loaded_tail():
    assert exact_tail(adv.FrontLoaded(), BudgetConstraint(1, 0.5, 3), 1) == Fraction(1, 2)
    assert exact_tail_at(adv.FrontLoaded(), BudgetConstraint(1, 0.5, 3), 1) == Fraction(1, 2)


def test_paths_sum_to_one_and_match_brute_force():
    cons = BudgetConstraint(1, 1.5, 5)
    paths = list(enumerate_paths(adv.IidBernoulli(), cons))
    assert len(paths) == 32
    assert sum(p.prob for p in paths) == 1
    p = Fraction(1.5) / 5
    brute = sum(
        math.prod(p if x else 1 - p for x in xs) for xs in product((0, 1), repeat=5) if sum(xs) >= 3
    )
    assert exact_tail(adv.IidBernoulli(), cons, 3) == brute


def test_adaptive_tree_feeds_history_back():
    cons = BudgetConstraint(1, 1, 3)
    dist = exact_sum_distribution(adv.ReactiveChaser(), cons)
    assert sum(dist.values()) == 1
    # the chaser's mean after a hit differs from its mean after a miss
    seen = {p.values[:1]: p for p in enumerate_paths(adv.ReactiveChaser(), cons)}
    assert len(seen) == 2


def test_too_large():
    with pytest.raises(TooLarge):
        exact_sum_distribution(adv.ThreePoint(), BudgetConstraint(1, 3, 20), max_paths=1000)


def test_oracle_surfaces_budget_violation():
    class Greedy:
        def __call__(self, history, remaining, step, constraint):
            return IncrementDistribution.point(constraint.c)

    with pytest.raises(BudgetViolation):
        exact_tail(Greedy(), BudgetConstraint(1, 1, 3), 1)


@pytest.mark.parametrize("name", sorted(adv.builtin_adversaries()))
def test_exact_tail_below_bounds(name):
    a = adv.make_adversary(name)
    for n in (2, 4, 6):
        for mu in (0.5, 1.5, 0.6 * n):
            up = exact_sum_distribution(a, BudgetConstraint(1, mu, n))
            lo = exact_sum_distribution(a, BudgetConstraint(1, mu, n, "lower"))
            for i in range(1, 25):
                d = i / 4
                tail = sum(p for s, p in up.items() if s >= (1 + Fraction(d)) * Fraction(mu))
                assert tail <= mult_azuma_upper(BoundQuery(mu, 1, d)).value
            for d in (0, 0.25, 0.5, 0.75):
                tail = sum(p for s, p in lo.items() if s <= (1 - Fraction(d)) * Fraction(mu))
                assert tail <= mult_azuma_lower(BoundQuery(mu, 1, d)).value


def test_exact_game_examples():
    assert exact_game(GameConfig(2, 2), Eager()) == {0: Fraction(1, 2), 1: Fraction(1, 2)}
    assert exact_game(GameConfig(1, 5), Eager()) == {0: 1}
    law = exact_game(GameConfig(3, 3), Eager())
    assert law == {0: Fraction(6, 27), 1: Fraction(18, 27), 3: Fraction(3, 27)}
    assert exact_game(GameConfig(3, 4), SingleFile()) == {0: 1}


def test_exact_game_rejects_random_and_large():
    with pytest.raises(ValueError):
        exact_game(GameConfig(2, 2), RandomThrottle(0.5))
    with pytest.raises(TooLarge):
        exact_game(GameConfig(10, 10), Eager())


def test_counterexample_exact_small():
    law = exact_game(GameConfig(3, 4), Counterexample())
    assert sum(law.values()) == 1
    assert max(law) <= 2 * 4


def test_exact_game_tail_below_bound():
    for P, M in ((2, 1), (2, 2), (2, 3), (2, 4), (3, 1), (3, 2), (3, 3)):
        law = exact_game(GameConfig(P, M), Eager())
        for d in range(0, (P - 1) * M + 2):
            tail = sum(p for x, p in law.items() if x >= d)
            delta = max(d / M - 1, 0.0)
            assert tail <= mult_azuma_upper(BoundQuery(M, P, delta)).value


def test_exact_mgf():
    d = IncrementDistribution(((-1, 0.5), (1, 0.5)))
    assert exact_mgf(d, 0.0) == 1.0
    assert exact_mgf(d, 1.0) == pytest.approx(float(mpmath.cosh(1)), rel=1e-15)
    assert exact_mgf(d, 1.0, shift=d.mean) == exact_mgf(d, 1.0)


def test_mgf_bound_dominates_two_point_grid():
    for a, b in ((1, 1), (0.5, 2)):
        for i in range(1, 21):
            for j in range(0, 21):
                x1, x2 = -a * i / 20, b * j / 20
                pmax = -x1 / (x2 - x1)
                for f in (0.2, 0.6, 1.0):
                    p = pmax * f
                    dist = IncrementDistribution(((x1, 1 - p), (x2, p)))
                    if dist.mean > 0:
                        continue
                    for t in (0.5, 1, 2, 4):
                        assert exact_mgf(dist, t) <= mgf_bound(t, a, b) * (1 + 1e-12)
