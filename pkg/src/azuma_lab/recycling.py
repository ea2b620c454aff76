"""The (P, M)-recycling game.

Balls ``1..P`` start in a reservoir. Each step the player tosses some
reservoir balls into uniformly random bins ``1..P``, then one ball is
removed from every non-empty bin and returned to the reservoir. The game
ends once ``M`` tosses have been made and the bins are empty.

Delay is accounted two ways: per toss (balls already in the target bin,
counting earlier landings of the same step; balls land in ascending label
order) and per step (``n_t``, balls left in bins after the removal phase).
The totals agree when the game ends. At any earlier moment they differ by
``sum_b C(k_b, 2)`` over current bin sizes ``k_b``, which
:meth:`GameState.check_invariants` verifies.

Strategies see the full state, ball identities included, and return
decisions; they hold no memory of their own, so a state copy is all the
exact oracle needs to branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .adversary import TailEstimate, Verdict, verify_bound
from .bounds import BoundQuery, TailBound, mult_azuma_upper, recycling_delay_bound
from .errors import CollisionNeverAchieved, IllegalRemoval, IllegalToss, StrategyStalled
from .parallel import map_chunks
from .rng import SplitMix64, derive_seed


@dataclass(frozen=True)
class GameConfig:
    P: int
    M: int

    def __post_init__(self):
        if int(self.P) != self.P or self.P < 1:
            raise ValueError(f"P must be a positive integer, got {self.P}")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")

    @property
    def stall_cap(self) -> int:
        """Consecutive idle steps with budget left after which a deterministic
        strategy is declared stalled. Randomized strategies are exempt: an idle
        run is a chance event for them, and one with positive toss probability
        terminates with probability 1."""
        return 10 * (self.M + self.P)


class Toss(NamedTuple):
    ball: int
    bin: int
    delay: int
    step: int


@dataclass
class GameState:
    P: int
    M: int
    reservoir: set[int]
    bins: list[list[int]]  # bins[b - 1] is bin b, oldest arrival first
    tosses_used: int = 0
    step: int = 0
    total_delay: int = 0
    occupancy_history: list[int] = field(default_factory=list)
    toss_log: list[Toss] = field(default_factory=list)
    toss_counts: list[int] = field(default_factory=list)  # indexed by ball label
    idle_steps: int = 0

    @classmethod
    def initial(cls, config: GameConfig) -> "GameState":
        P = config.P
        return cls(
            P=P,
            M=config.M,
            reservoir=set(range(1, P + 1)),
            bins=[[] for _ in range(P)],
            toss_counts=[0] * (P + 1),
        )

    def copy(self) -> "GameState":
        return GameState(
            P=self.P,
            M=self.M,
            reservoir=set(self.reservoir),
            bins=[list(b) for b in self.bins],
            tosses_used=self.tosses_used,
            step=self.step,
            total_delay=self.total_delay,
            occupancy_history=list(self.occupancy_history),
            toss_log=list(self.toss_log),
            toss_counts=list(self.toss_counts),
            idle_steps=self.idle_steps,
        )

    @property
    def budget_left(self) -> int:
        return self.M - self.tosses_used

    @property
    def in_bins(self) -> int:
        return sum(len(b) for b in self.bins)

    @property
    def terminated(self) -> bool:
        return self.tosses_used == self.M and self.in_bins == 0

    def occupied(self) -> list[int]:
        return [i + 1 for i, b in enumerate(self.bins) if b]

    def contents(self, bin_no: int) -> list[int]:
        return self.bins[bin_no - 1]

    def check_invariants(self) -> None:
        if len(self.reservoir) + self.in_bins != self.P:
            raise AssertionError("ball conservation broken")
        if self.tosses_used > self.M:
            raise AssertionError("toss budget exceeded")
        pending = sum(len(b) * (len(b) - 1) // 2 for b in self.bins)
        if self.total_delay != sum(self.occupancy_history) + pending:
            raise AssertionError("per-toss and per-step delay accounting disagree")


class Strategy:
    """Base class for players. ``tosses`` must return a subset of the reservoir."""

    name = "abstract"
    deterministic = True

    def tosses(self, state: GameState, rng) -> Iterable[int]:
        raise NotImplementedError

    def removals(self, state: GameState) -> Mapping[int, int]:
        """``{bin: ball}`` overrides; bins left out lose their oldest ball."""
        return {}

    def params(self) -> dict:
        return {}

    def describe(self) -> str:
        args = ",".join(f"{k}={v}" for k, v in self.params().items())
        return f"{self.name}({args})" if args else self.name


def _eager(state: GameState) -> list[int]:
    return sorted(state.reservoir)[: state.budget_left]


class Eager(Strategy):
    """Toss every reservoir ball each step, lowest labels first once the budget runs short."""

    name = "eager"

    def tosses(self, state, rng):
        return _eager(state)


class SingleFile(Strategy):
    name = "single_file"

    def tosses(self, state, rng):
        return [min(state.reservoir)] if state.reservoir else []


class RandomThrottle(Strategy):
    """Toss each reservoir ball independently with probability ``q``.

    One uniform draw per reservoir ball in ascending label order, every step,
    even once the budget caps the selection.
    """

    name = "random_throttle"
    deterministic = False

    def __init__(self, q: float = 0.5):
        if not 0.0 < q <= 1.0:
            raise ValueError(f"q must lie in (0, 1], got {q}")
        self.q = q

    def params(self):
        return {"q": self.q}

    def tosses(self, state, rng):
        chosen = []
        left = state.budget_left
        for ball in sorted(state.reservoir):
            if rng.random() < self.q and len(chosen) < left:
                chosen.append(ball)
        return chosen


class Counterexample(Strategy):
    """Player that breaks the per-ball independence claim for ball 1.

    Tosses balls ``2..P`` together; if they do not share a bin, waits for the
    bins to drain and tries again. Once they collide it removes ball 2, so
    balls ``3..P`` sit together, and then makes the first toss of ball 1.
    After that (or after ``max_attempts`` failures, or when the budget can no
    longer fund an attempt plus ball 1) it plays eagerly.
    """

    name = "counterexample"

    def __init__(self, max_attempts: int | None = None):
        if max_attempts is not None and max_attempts < 1:
            raise ValueError(f"max_attempts must be >= 1, got {max_attempts}")
        self.max_attempts = max_attempts

    def params(self):
        return {} if self.max_attempts is None else {"max_attempts": self.max_attempts}

    @staticmethod
    def _single_bin_holding(state: GameState, balls: set[int]) -> int | None:
        occupied = state.occupied()
        if len(occupied) == 1 and set(state.contents(occupied[0])) == balls:
            return occupied[0]
        return None

    def collided_bin(self, state: GameState) -> int | None:
        """Bin holding exactly ``2..P`` before ball 1 has moved, if any."""
        if state.P < 3 or state.toss_counts[1]:
            return None
        return self._single_bin_holding(state, set(range(2, state.P + 1)))

    def awaiting_ball_one(self, state: GameState) -> bool:
        """True when balls ``3..P`` share a bin and ball 1 is about to make its first toss."""
        if state.P < 3 or state.toss_counts[1]:
            return False
        return self._single_bin_holding(state, set(range(3, state.P + 1))) is not None

    def tosses(self, state, rng):
        P = state.P
        if P < 3 or state.toss_counts[1]:
            return _eager(state)
        if self.awaiting_ball_one(state):
            return [1]
        if state.in_bins:
            return []
        gave_up = self.max_attempts is not None and state.toss_counts[2] >= self.max_attempts
        if gave_up or state.budget_left < P:
            return _eager(state)
        return list(range(2, P + 1))

    def removals(self, state):
        b = self.collided_bin(state)
        return {b: 2} if b is not None else {}


_STRATEGIES = {cls.name: cls for cls in (Eager, SingleFile, RandomThrottle, Counterexample)}


def builtin_strategies() -> dict[str, type[Strategy]]:
    return dict(_STRATEGIES)


def make_strategy(name: str, **params) -> Strategy:
    try:
        return _STRATEGIES[name](**params)
    except KeyError:
        raise KeyError(f"unknown strategy {name!r}; choose from {sorted(_STRATEGIES)}") from None


# -- engine ------------------------------------------------------------------


def decide_tosses(state: GameState, strategy: Strategy, rng) -> list[int]:
    if state.budget_left == 0:
        return []
    proposed = list(strategy.tosses(state, rng))
    balls = sorted(set(proposed))
    if len(balls) != len(proposed):
        raise IllegalToss(f"step {state.step + 1}: duplicate balls in {proposed}")
    missing = [b for b in balls if b not in state.reservoir]
    if missing:
        raise IllegalToss(f"step {state.step + 1}: balls {missing} are not in the reservoir")
    if len(balls) > state.budget_left:
        raise IllegalToss(
            f"step {state.step + 1}: {len(balls)} tosses exceed the remaining budget {state.budget_left}"
        )
    return balls


def land(state: GameState, ball: int, bin_no: int) -> int:
    """Put ``ball`` into ``bin_no`` and return the toss delay."""
    target = state.bins[bin_no - 1]
    delay = len(target)
    target.append(ball)
    state.reservoir.remove(ball)
    state.tosses_used += 1
    state.toss_counts[ball] += 1
    state.total_delay += delay
    state.toss_log.append(Toss(ball, bin_no, delay, state.step + 1))
    return delay


def finish_step(state: GameState, strategy: Strategy, tossed: int) -> None:
    """Removal phase plus per-step bookkeeping."""
    decision = dict(strategy.removals(state))
    for bin_no, ball in decision.items():
        if not 1 <= bin_no <= state.P or ball not in state.bins[bin_no - 1]:
            raise IllegalRemoval(f"step {state.step + 1}: ball {ball} is not in bin {bin_no}")
    for i, contents in enumerate(state.bins):
        if contents:
            ball = decision.get(i + 1, contents[0])
            contents.remove(ball)
            state.reservoir.add(ball)
    state.step += 1
    state.occupancy_history.append(state.in_bins)
    state.idle_steps = 0 if tossed or state.budget_left == 0 else state.idle_steps + 1


def step(state: GameState, strategy: Strategy, rng) -> GameState:
    """Advance one step in place and return ``state``."""
    balls = decide_tosses(state, strategy, rng)
    for ball in balls:
        land(state, ball, rng.randbelow(state.P) + 1)
    finish_step(state, strategy, len(balls))
    return state


@dataclass(frozen=True)
class GameReport:
    config: GameConfig
    strategy: str
    seed: int
    total_delay: int
    steps: int
    delays: tuple[int, ...]
    occupancy: tuple[int, ...]

    RECORD_FIELDS = ("seed", "P", "M", "strategy", "D", "T")

    def record(self) -> dict:
        return {
            "seed": self.seed,
            "P": self.config.P,
            "M": self.config.M,
            "strategy": self.strategy,
            "D": self.total_delay,
            "T": self.steps,
        }

    def trace(self) -> dict:
        return {**self.record(), "delays": list(self.delays), "occupancy": list(self.occupancy)}


def play(config: GameConfig, strategy: Strategy, seed: int) -> GameReport:
    state = GameState.initial(config)
    rng = SplitMix64(seed)
    while not state.terminated:
        step(state, strategy, rng)
        if strategy.deterministic and state.idle_steps >= config.stall_cap:
            raise StrategyStalled(
                f"{strategy.describe()} left {state.budget_left} tosses unspent for "
                f"{state.idle_steps} steps"
            )
    delays = tuple(t.delay for t in state.toss_log)
    return GameReport(
        config, strategy.describe(), seed, sum(state.occupancy_history), state.step, delays,
        tuple(state.occupancy_history),
    )


# -- batched play --------------------------------------------------------------


@dataclass(frozen=True)
class GameBatch:
    config: GameConfig
    strategy: str
    seeds: np.ndarray
    delays: np.ndarray  # total delay D per game
    steps: np.ndarray

    def records(self) -> Iterable[dict]:
        for s, d, t in zip(self.seeds, self.delays, self.steps):
            yield {"seed": int(s), "P": self.config.P, "M": self.config.M,
                   "strategy": self.strategy, "D": int(d), "T": int(t)}


def kernel_spec(strategy: Strategy) -> tuple[int, float, int] | None:
    """``(kind, q, max_attempts)`` for strategies the compiled kernel reproduces exactly."""
    from . import _kernels as k

    kind = type(strategy)
    if kind is Eager:
        return k.EAGER, 0.0, -1
    if kind is SingleFile:
        return k.SINGLE_FILE, 0.0, -1
    if kind is RandomThrottle:
        return k.THROTTLE, float(strategy.q), -1
    if kind is Counterexample:
        return k.COUNTEREXAMPLE, 0.0, -1 if strategy.max_attempts is None else strategy.max_attempts
    return None


NO_STALL_CAP = 2**62


def _seed_array(seed: int, start: int, stop: int) -> np.ndarray:
    return np.array([derive_seed(seed, k) for k in range(start, stop)], dtype=np.uint64)


def _kernel_chunk(config, spec, seed, stop_at_ball_one, start, stop):
    from . import _kernels as k

    kind, q, max_attempts = spec
    cap = NO_STALL_CAP if kind == k.THROTTLE else config.stall_cap
    out = k.play_batch(config.P, config.M, kind, q, max_attempts, _seed_array(seed, start, stop),
                       stop_at_ball_one, cap)
    stalled = np.flatnonzero(out[:, k.COL_STALLED])
    if stalled.size:
        raise StrategyStalled(f"game {start + int(stalled[0])} stalled")
    if not stop_at_ball_one and np.any(out[:, k.COL_D_TOSS] != out[:, k.COL_D_OCC]):
        raise AssertionError("per-toss and per-step delay totals disagree")
    return out


def _python_chunk(config, strategy, seed, start, stop):
    out = np.zeros((stop - start, 2), dtype=np.int64)
    for i, k in enumerate(range(start, stop)):
        try:
            report = play(config, strategy, derive_seed(seed, k))
        except StrategyStalled as exc:
            raise StrategyStalled(f"game {k}: {exc}") from exc
        out[i] = report.total_delay, report.steps
    return out


def play_many(config: GameConfig, strategy: Strategy, trials: int, seed: int,
              fast: bool | None = None) -> GameBatch:
    """Play ``trials`` games; game ``k`` uses ``derive_seed(seed, k)``.

    Built-in strategies run in the compiled kernel unless ``fast=False``;
    both paths produce identical games.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    spec = kernel_spec(strategy) if fast is not False else None
    if fast and spec is None:
        raise ValueError(f"no compiled kernel for {strategy.describe()}")
    if spec is not None:
        from . import _kernels as k

        out = np.concatenate(map_chunks(_kernel_chunk, trials, (config, spec, seed, False), min_chunk=20000))
        delays, steps = out[:, k.COL_D_OCC], out[:, k.COL_T]
    else:
        out = np.concatenate(map_chunks(_python_chunk, trials, (config, strategy, seed), min_chunk=500))
        delays, steps = out[:, 0], out[:, 1]
    return GameBatch(config, strategy.describe(), _seed_array(seed, 0, trials), delays, steps)


# -- experiments ---------------------------------------------------------------


@dataclass(frozen=True)
class DeltaCheck:
    delta: float
    threshold: float
    estimate: TailEstimate
    bound: TailBound
    verdict: Verdict


@dataclass(frozen=True)
class DelayTailReport:
    config: GameConfig
    strategy: str
    eps: float
    seed: int
    threshold: float
    case: str
    estimate: TailEstimate
    verdict: Verdict
    checks: tuple[DeltaCheck, ...]
    max_delay: int
    mean_delay: float

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS and all(c.verdict is Verdict.PASS for c in self.checks)


def delay_tail_experiment(config: GameConfig, strategy: Strategy, eps: float, trials: int,
                          seed: int, confidence: float = 0.99, fast: bool | None = None,
                          batch: GameBatch | None = None) -> DelayTailReport:
    """Check ``Pr[D >= 3M + 2P ln(1/eps)] <= eps`` on seeded games.

    Also checks ``Pr[D >= (1+delta) M]`` against the multiplicative bound with
    mean budget ``M`` and range ``P`` at ``delta = 2`` and
    ``delta = 2P ln(1/eps) / M``. Pass ``batch`` to reuse games already played.
    """
    rb = recycling_delay_bound(config.P, config.M, eps)
    if batch is None:
        batch = play_many(config, strategy, trials, seed, fast=fast)
    D = batch.delays
    n = len(D)
    est = TailEstimate.from_counts(int(np.count_nonzero(D >= rb.threshold)), n, confidence)
    verdict = Verdict.PASS if est.ci_lower <= eps else Verdict.FAIL
    checks = []
    for delta in (2.0, 2.0 * config.P * math.log(1.0 / eps) / config.M):
        thr = (1.0 + delta) * config.M
        e = TailEstimate.from_counts(int(np.count_nonzero(D >= thr)), n, confidence)
        b = mult_azuma_upper(BoundQuery(float(config.M), float(config.P), delta))
        checks.append(DeltaCheck(delta, thr, e, b, verify_bound(e, b)))
    return DelayTailReport(config, batch.strategy, eps, seed, rb.threshold, rb.case, est, verdict,
                           tuple(checks), int(D.max()), float(D.mean()))


@dataclass(frozen=True)
class CounterexampleReport:
    P: int
    mode: str
    trials: int
    collided: int
    hits: int
    estimate: TailEstimate
    corrected_value: float
    claimed_value: float

    @property
    def no_collision_fraction(self) -> float:
        return 1.0 - self.collided / self.trials

    @property
    def falsified(self) -> bool:
        """True when the confidence interval excludes the claimed bound."""
        e = self.estimate
        return not e.ci_lower <= self.claimed_value <= e.ci_upper

    @property
    def falsification_expected(self) -> bool:
        return self.P >= 4


def _constructed_trial(P: int, seed: int) -> bool:
    strategy = Counterexample()
    rng = SplitMix64(seed)
    state = GameState.initial(GameConfig(P, P))
    target = rng.randbelow(P) + 1
    for ball in range(2, P + 1):
        land(state, ball, target)
    finish_step(state, strategy, P - 1)  # the strategy itself pulls ball 2 back out
    assert strategy.awaiting_ball_one(state)
    step(state, strategy, rng)
    first = state.toss_log[-1]
    assert first.ball == 1
    return first.delay == P - 2


def _constructed_chunk(P, seed, start, stop):
    return sum(_constructed_trial(P, derive_seed(seed, k)) for k in range(start, stop))


def _play_trial(P: int, max_attempts: int, seed: int) -> tuple[bool, bool]:
    strategy = Counterexample(max_attempts)
    config = GameConfig(P, max_attempts * (P - 1) + P)
    state = GameState.initial(config)
    rng = SplitMix64(seed)
    while not state.terminated:
        awaiting = strategy.awaiting_ball_one(state)
        step(state, strategy, rng)
        if state.toss_counts[1]:
            first = next(t for t in state.toss_log if t.ball == 1)
            return awaiting, awaiting and first.delay == P - 2
    return False, False


def counterexample_experiment(P: int, trials: int, seed: int, max_attempts: int | None = None,
                              mode: str = "constructed", confidence: float = 0.99,
                              fast: bool | None = None) -> CounterexampleReport:
    """Estimate the chance that ball 1's first toss joins balls ``3..P``.

    ``constructed`` mode starts every trial from the post-collision state
    (balls ``3..P`` in one random bin, ball 2 back in the reservoir).
    ``play`` mode runs the counterexample strategy from an empty game with
    ``max_attempts`` collision attempts and conditions on the collision.
    """
    if P < 3:
        raise ValueError(f"P must be >= 3, got {P}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if mode == "constructed":
        hits = sum(map_chunks(_constructed_chunk, trials, (P, seed), min_chunk=5000))
        collided = trials
    elif mode == "play":
        if max_attempts is None:
            max_attempts = int(math.ceil(20 * P ** (P - 2)))
        config = GameConfig(P, max_attempts * (P - 1) + P)
        strategy = Counterexample(max_attempts)
        if fast is not False:
            from . import _kernels as k

            out = np.concatenate(map_chunks(
                _kernel_chunk, trials, (config, kernel_spec(strategy), seed, True), min_chunk=20000))
            collided = int(out[:, k.COL_COLLIDED].sum())
            hits = int(out[:, k.COL_HIT].sum())
        else:
            results = [_play_trial(P, max_attempts, derive_seed(seed, k)) for k in range(trials)]
            collided = sum(c for c, _ in results)
            hits = sum(h for _, h in results)
    else:
        raise ValueError(f"mode must be 'constructed' or 'play', got {mode!r}")
    if collided == 0:
        raise CollisionNeverAchieved(
            f"no trial collided within {max_attempts} attempts at P={P}; raise max_attempts")
    estimate = TailEstimate.from_counts(hits, collided, confidence)
    return CounterexampleReport(P, mode, trials, collided, hits, estimate, 1.0 / P,
                                float(P) ** -(P - 2))


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    ci_lower: float
    ci_upper: float
    exact: float
    cap: float

    @property
    def consistent(self) -> bool:
        """The interval reaches the exact value and the value respects the cap."""
        return self.ci_lower <= self.exact <= self.ci_upper and self.exact <= self.cap


def conditional_mean_check(state: GameState, trials: int, seed: int,
                           confidence: float = 0.99) -> MeanEstimate:
    """Monte Carlo mean of the next toss's delay from ``state``.

    The exact value is ``(balls in bins) / P``; ``cap`` is ``(P - 1) / P``.
    """
    if not state.reservoir:
        raise ValueError("state has no reservoir ball to toss")
    from scipy.stats import norm

    rng = SplitMix64(seed)
    sizes = [len(b) for b in state.bins]
    samples = np.array([sizes[rng.randbelow(state.P)] for _ in range(trials)], dtype=float)
    mean = float(samples.mean())
    sd = float(samples.std(ddof=1)) if trials > 1 else 0.0
    half = float(norm.ppf(0.5 + confidence / 2)) * sd / math.sqrt(trials)
    return MeanEstimate(mean, mean - half, mean + half, state.in_bins / state.P,
                        (state.P - 1) / state.P)
