"""numba batch kernels: many independent replicas, one stream each.

Replica ``first + r`` uses the stream seeded by ``mix64(seed, first + r)``, so
splitting a batch into chunks never changes any replica's trajectory.
"""
import numpy as np
from numba import njit

from .game import _advance, _stop_holds
from .rng import nb_integers, nb_mix64, nb_random

# internal stop kind: every player is bankrupt or has reached ``param``,
# or two players have reached it
STOP_PSTAR_RESOLVED = 5


@njit(cache=True, nogil=True)
def _pstar_resolved(weights, maxw, w2):
    reached = 0
    open_players = 0
    for i in range(weights.shape[0]):
        if maxw[i] >= w2:
            reached += 1
        elif weights[i] > 0:
            open_players += 1
    return reached >= 2 or open_players == 0


@njit(cache=True, nogil=True)
def simulate_game_batch(
    init, c_inc, c_dec, cap, independent, alive_uniform,
    stop_kind, stop_param, max_steps, seed, first, count,
):
    n = init.shape[0]
    steps = np.zeros(count, np.int64)
    stopped = np.zeros(count, np.bool_)
    extinct = np.zeros(count, np.bool_)
    final = np.zeros((count, n), np.int64)
    first_bk_step = np.full(count, -1, np.int64)
    first_bk = np.zeros((count, n), np.int64)
    maxw = np.zeros((count, n), np.int64)
    audit_fail = np.zeros(count, np.int64)
    p = 1.0 / n
    state = np.zeros(1, np.uint64)
    wins = np.zeros(n, np.bool_)
    for r in range(count):
        state[0] = nb_mix64(seed, first + r)
        w = init.copy()
        alive0 = 0
        running = 0
        for i in range(n):
            maxw[r, i] = w[i]
            running += w[i]
            if w[i] > 0:
                alive0 += 1
        s = 0
        while True:
            if stop_kind == STOP_PSTAR_RESOLVED:
                if _pstar_resolved(w, maxw[r], stop_param):
                    stopped[r] = True
                    break
            elif _stop_holds(w, stop_kind, stop_param, alive0):
                stopped[r] = True
                break
            if s >= max_steps:
                break
            k = 0
            for i in range(n):
                wins[i] = False
                if w[i] > 0:
                    k += 1
            if k == 0:
                extinct[r] = True
                break
            if independent:
                for i in range(n):
                    if w[i] > 0:
                        wins[i] = nb_random(state) < p
            elif alive_uniform:
                j = nb_integers(state, k)
                for i in range(n):
                    if w[i] > 0:
                        if j == 0:
                            wins[i] = True
                            break
                        j -= 1
            else:
                wins[nb_integers(state, n)] = True
            flow = 0
            for i in range(n):
                if w[i] > 0:
                    flow -= c_dec if w[i] > c_dec else w[i]
                    if wins[i]:
                        flow += c_inc
            total = _advance(w, wins, c_inc, c_dec, cap)
            running += flow
            if cap > 0:
                if total > cap:
                    audit_fail[r] += 1
                running = total
            elif total != running:
                audit_fail[r] += 1
            s += 1
            alive = 0
            for i in range(n):
                if w[i] > 0:
                    alive += 1
                if w[i] > maxw[r, i]:
                    maxw[r, i] = w[i]
            if first_bk_step[r] < 0 and alive < alive0:
                first_bk_step[r] = s
                for i in range(n):
                    first_bk[r, i] = w[i]
        steps[r] = s
        for i in range(n):
            final[r, i] = w[i]
    return steps, stopped, extinct, final, first_bk_step, first_bk, maxw, audit_fail


@njit(cache=True, nogil=True)
def simulate_walk_batch(up, p, down, start, wall, reflecting, max_steps, seed, first, count):
    """Outcome codes: 0 absorbed at 0, 1 reached the upper absorbing wall, -1 censored."""
    steps = np.zeros(count, np.int64)
    outcome = np.full(count, -1, np.int64)
    state = np.zeros(1, np.uint64)
    for r in range(count):
        state[0] = nb_mix64(seed, first + r)
        x = start
        s = 0
        while True:
            if x <= 0:
                outcome[r] = 0
                break
            if not reflecting and x >= wall:
                outcome[r] = 1
                break
            if s >= max_steps:
                break
            if nb_random(state) < p:
                x += up
                if reflecting and x > wall:
                    x = wall
            else:
                x -= down
            s += 1
        steps[r] = s
    return steps, outcome
