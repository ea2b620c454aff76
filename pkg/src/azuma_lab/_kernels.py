"""Compiled recycling-game kernels for the built-in strategies.

Each kernel replays :func:`azuma_lab.recycling.play` step for step: the
same SplitMix64 stream (see :mod:`azuma_lab.rng`), the same draw order, the
same oldest-first removal. For equal seeds the per-game delay and step
count therefore match the Python engine exactly, which the test suite checks.
"""

from __future__ import annotations

import numpy as np
from numba import njit

EAGER, SINGLE_FILE, THROTTLE, COUNTEREXAMPLE = 0, 1, 2, 3
_WAIT = -1

COL_D_TOSS, COL_D_OCC, COL_T, COL_COLLIDED, COL_HIT, COL_STALLED = range(6)

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S11 = np.uint64(11)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_TWO_M53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _uniform(state):
    state[0] += _GAMMA
    z = state[0]
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    z = z ^ (z >> _S31)
    return np.float64(z >> _S11) * _TWO_M53


@njit(cache=True)
def _single_occupied(counts):
    # index of the only non-empty bin, or -1
    found = -1
    for b in range(counts.shape[0]):
        if counts[b] > 0:
            if found >= 0:
                return -1
            found = b
    return found


@njit(cache=True)
def play_game(P, M, kind, q, max_attempts, seed, stop_at_ball_one, stall_cap, out):
    state = np.empty(1, np.uint64)
    state[0] = seed
    bins = np.zeros((P, P), np.int64)
    counts = np.zeros(P, np.int64)
    in_res = np.ones(P + 1, np.bool_)
    in_res[0] = False
    toss_counts = np.zeros(P + 1, np.int64)
    chosen = np.empty(P, np.int64)
    used = 0
    steps = 0
    d_toss = 0
    d_occ = 0
    in_bins = 0
    idle = 0
    out[:] = 0
    while not (used == M and in_bins == 0):
        left = M - used
        nchosen = 0
        awaiting = False
        if left > 0:
            mode = kind
            if kind == COUNTEREXAMPLE:
                if P < 3 or toss_counts[1] > 0:
                    mode = EAGER
                else:
                    b = _single_occupied(counts)
                    awaiting = b >= 0 and counts[b] == P - 2 and in_res[1] and in_res[2]
                    if awaiting:
                        chosen[0] = 1
                        nchosen = 1
                        mode = _WAIT
                    elif in_bins > 0:
                        mode = _WAIT
                    elif (max_attempts >= 0 and toss_counts[2] >= max_attempts) or left < P:
                        mode = EAGER
                    else:
                        for ball in range(2, P + 1):
                            chosen[nchosen] = ball
                            nchosen += 1
                        mode = _WAIT
            if mode == EAGER:
                for ball in range(1, P + 1):
                    if in_res[ball] and nchosen < left:
                        chosen[nchosen] = ball
                        nchosen += 1
            elif mode == SINGLE_FILE:
                for ball in range(1, P + 1):
                    if in_res[ball]:
                        chosen[nchosen] = ball
                        nchosen += 1
                        break
            elif mode == THROTTLE:
                for ball in range(1, P + 1):
                    if in_res[ball]:
                        if _uniform(state) < q and nchosen < left:
                            chosen[nchosen] = ball
                            nchosen += 1

        ball_one_delay = -1
        for i in range(nchosen):
            ball = chosen[i]
            b = int(_uniform(state) * P)
            delay = counts[b]
            d_toss += delay
            bins[b, counts[b]] = ball
            counts[b] += 1
            in_bins += 1
            in_res[ball] = False
            toss_counts[ball] += 1
            used += 1
            if ball == 1 and toss_counts[1] == 1:
                ball_one_delay = delay

        # the counterexample player pulls ball 2 out of the all-but-ball-1 bin
        pull_two = False
        if kind == COUNTEREXAMPLE and P >= 3 and toss_counts[1] == 0:
            b = _single_occupied(counts)
            pull_two = b >= 0 and counts[b] == P - 1 and in_res[1]
        for b in range(P):
            k = counts[b]
            if k > 0:
                idx = 0
                if pull_two:
                    for j in range(k):
                        if bins[b, j] == 2:
                            idx = j
                            break
                ball = bins[b, idx]
                for j in range(idx, k - 1):
                    bins[b, j] = bins[b, j + 1]
                counts[b] = k - 1
                in_bins -= 1
                in_res[ball] = True
        steps += 1
        d_occ += in_bins
        if nchosen > 0 or used == M:
            idle = 0
        else:
            idle += 1

        if ball_one_delay >= 0:
            out[COL_COLLIDED] = 1 if awaiting else 0
            out[COL_HIT] = 1 if (awaiting and ball_one_delay == P - 2) else 0
            if stop_at_ball_one:
                break
        if idle >= stall_cap:
            out[COL_STALLED] = 1
            break
    out[COL_D_TOSS] = d_toss
    out[COL_D_OCC] = d_occ
    out[COL_T] = steps


@njit(cache=True)
def play_batch(P, M, kind, q, max_attempts, seeds, stop_at_ball_one, stall_cap):
    out = np.zeros((seeds.shape[0], 6), np.int64)
    for i in range(seeds.shape[0]):
        play_game(P, M, kind, q, max_attempts, seeds[i], stop_at_ball_one, stall_cap, out[i])
    return out
