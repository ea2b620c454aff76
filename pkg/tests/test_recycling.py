import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from azuma_lab import _kernels
from azuma_lab.errors import CollisionNeverAchieved, IllegalRemoval, IllegalToss, StrategyStalled
from azuma_lab.recycling import (
    Counterexample,
    Eager,
    GameConfig,
    GameState,
    RandomThrottle,
    SingleFile,
    Strategy,
    conditional_mean_check,
    counterexample_experiment,
    delay_tail_experiment,
    finish_step,
    land,
    make_strategy,
    play,
    play_many,
    step,
)
from azuma_lab.rng import SplitMix64, derive_seed


class Fixed:
    """rng stand-in that lands tosses in a fixed bin sequence (1-based)."""

    def __init__(self, bins):
        self.bins = list(bins)

    def randbelow(self, n):
        return self.bins.pop(0) - 1


def test_collision_step_delays():
    state = GameState.initial(GameConfig(2, 2))
    step(state, Eager(), Fixed([1, 1]))
    assert [t.delay for t in state.toss_log] == [0, 1]
    assert state.occupancy_history == [1]
    state.check_invariants()


def test_no_collision_step():
    state = GameState.initial(GameConfig(2, 2))
    step(state, Eager(), Fixed([1, 2]))
    assert [t.delay for t in state.toss_log] == [0, 0]
    assert state.occupancy_history == [0]


def test_idle_step_drains_one_per_bin():
    class Idle(Strategy):
        def tosses(self, state, rng):
            return []

    state = GameState.initial(GameConfig(3, 3))
    land(state, 1, 1)
    land(state, 2, 1)
    land(state, 3, 2)
    step(state, Idle(), None)
    assert state.toss_log[-1].step == 1  # no new tosses
    assert state.bins == [[2], [], []]
    assert state.occupancy_history == [1]


def test_p1_never_delays():
    r = play(GameConfig(1, 5), Eager(), 3)
    assert r.total_delay == 0 and r.delays == (0,) * 5


def test_single_file_never_delays():
    for s in range(50):
        r = play(GameConfig(5, 12), SingleFile(), s)
        assert r.total_delay == 0 and r.steps == 12


def test_illegal_toss_and_removal():
    class Cheat(Strategy):
        def tosses(self, state, rng):
            return [1, 1]

    class Phantom(Strategy):
        def tosses(self, state, rng):
            return [99]

    class OverBudget(Strategy):
        def tosses(self, state, rng):
            return sorted(state.reservoir)

    class BadRemove(Eager):
        def removals(self, state):
            return {1: 42}

    for cls, exc in ((Cheat, IllegalToss), (Phantom, IllegalToss), (BadRemove, IllegalRemoval)):
        with pytest.raises(exc):
            play(GameConfig(3, 6), cls(), 0)
    with pytest.raises(IllegalToss):
        play(GameConfig(3, 2), OverBudget(), 0)


def test_stall():
    class Lazy(Strategy):
        def tosses(self, state, rng):
            return []

    with pytest.raises(StrategyStalled):
        play(GameConfig(2, 3), Lazy(), 0)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 8), st.integers(1, 16), st.floats(0.05, 1.0), st.integers(0, 2**64 - 1))
def test_invariants_every_step(P, M, q, seed):
    strategy = RandomThrottle(q)
    state = GameState.initial(GameConfig(P, M))
    rng = SplitMix64(seed)
    while not state.terminated:
        step(state, strategy, rng)
        state.check_invariants()
        assert all(0 <= t.delay <= P - 1 for t in state.toss_log)
    assert state.total_delay == sum(state.occupancy_history)
    assert len(state.toss_log) == M
    assert state.total_delay <= (P - 1) * M
    assert state.reservoir == set(range(1, P + 1))


@pytest.mark.parametrize("strategy", [Eager(), SingleFile(), RandomThrottle(0.3), RandomThrottle(1.0),
                                      Counterexample(), Counterexample(max_attempts=2)])
@pytest.mark.parametrize("P,M", [(1, 3), (2, 5), (3, 7), (5, 40), (8, 64)])
def test_kernel_matches_python(strategy, P, M):
    config = GameConfig(P, M)
    fast = play_many(config, strategy, 300, 11, fast=True)
    slow = play_many(config, strategy, 300, 11, fast=False)
    assert np.array_equal(fast.delays, slow.delays)
    assert np.array_equal(fast.steps, slow.steps)


def test_kernel_play_mode_matches_python():
    from azuma_lab.recycling import _play_trial

    P, attempts = 4, 30
    config = GameConfig(P, attempts * (P - 1) + P)
    seeds = np.array([derive_seed(5, k) for k in range(400)], dtype=np.uint64)
    out = _kernels.play_batch(P, config.M, _kernels.COUNTEREXAMPLE, 0.0, attempts, seeds, True,
                              config.stall_cap)
    for row, s in zip(out, seeds):
        collided, hit = _play_trial(P, attempts, int(s))
        assert (bool(row[_kernels.COL_COLLIDED]), bool(row[_kernels.COL_HIT])) == (collided, hit)


def test_game_report_fields():
    r = play(GameConfig(4, 10), Eager(), 1)
    assert sum(r.delays) == r.total_delay == sum(r.occupancy)
    assert set(r.record()) == {"seed", "P", "M", "strategy", "D", "T"}
    assert len(r.trace()["delays"]) == 10


def test_counterexample_strategy_reaches_collision():
    strategy = Counterexample()
    state = GameState.initial(GameConfig(3, 30))
    land(state, 2, 1)
    land(state, 3, 1)
    assert strategy.collided_bin(state) == 1
    finish_step(state, strategy, 2)
    assert state.contents(1) == [3] and 2 in state.reservoir
    assert strategy.awaiting_ball_one(state)
    assert strategy.tosses(state, None) == [1]


def test_counterexample_constructed_matches_one_over_P():
    for P in (4, 6, 8):
        r = counterexample_experiment(P, 20_000, 3)
        e = r.estimate
        assert e.ci_lower <= 1 / P <= e.ci_upper
        assert r.falsified and r.falsification_expected
    r3 = counterexample_experiment(3, 5000, 3)
    assert not r3.falsification_expected
    with pytest.raises(ValueError):
        counterexample_experiment(2, 10, 0)


def test_counterexample_play_mode():
    r = counterexample_experiment(4, 5000, 9, mode="play")
    assert r.collided > 4000
    assert r.estimate.ci_lower <= 0.25 <= r.estimate.ci_upper
    with pytest.raises(CollisionNeverAchieved):
        counterexample_experiment(8, 3, 9, max_attempts=1, mode="play")


def test_delay_tail_experiment_pass_and_trivial_threshold():
    config = GameConfig(4, 32)
    rep = delay_tail_experiment(config, Eager(), 0.1, 2000, 1)
    assert rep.passed and rep.estimate.hits == 0
    batch = play_many(config, Eager(), 2000, 1)
    assert batch.delays.max() <= (config.P - 1) * config.M


def test_conditional_mean_examples():
    empty = GameState.initial(GameConfig(4, 8))
    m = conditional_mean_check(empty, 100, 0)
    assert m.exact == 0 and m.mean == 0
    s = GameState.initial(GameConfig(2, 4))
    land(s, 2, 1)
    assert conditional_mean_check(s, 20_000, 1).exact == 0.5
    s = GameState.initial(GameConfig(4, 8))
    for ball in (2, 3, 4):
        land(s, ball, 1)
    m = conditional_mean_check(s, 40_000, 2)
    assert m.exact == 0.75 and m.consistent


def test_make_strategy():
    assert make_strategy("random_throttle", q=0.2).describe() == "random_throttle(q=0.2)"
    with pytest.raises(KeyError):
        make_strategy("nope")
    with pytest.raises(ValueError):
        RandomThrottle(1.5)


def test_randomized_idle_runs_are_not_stalls():
    config = GameConfig(1, 3)
    reps = [play(config, RandomThrottle(0.02), s) for s in range(20)]
    assert max(r.steps for r in reps) > config.stall_cap
    fast = play_many(config, RandomThrottle(0.02), 20, 0, fast=True)
    slow = play_many(config, RandomThrottle(0.02), 20, 0, fast=False)
    assert np.array_equal(fast.steps, slow.steps)
    with pytest.raises(ValueError):
        RandomThrottle(0.0)


def test_stall_cap_value():
    assert GameConfig(3, 5).stall_cap == 80
