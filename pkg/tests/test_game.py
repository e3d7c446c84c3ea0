import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from ruin_lab.game import (
    ConfigurationError,
    GameConfig,
    GameState,
    InvalidStateError,
    StopCondition,
    apply_step,
    independent_step,
    init_game,
    run,
    step_random,
)
from ruin_lab.rng import SplitMix64

from oracles import one_step_outcomes


def state(weights, c_inc, c_dec=1, **kw):
    cfg = GameConfig(len(weights), tuple(max(w, 1) for w in weights), c_inc, c_dec, **kw)
    return GameState(cfg, tuple(weights))


class TestConfig:
    def test_init_copies_weights(self):
        s = init_game(GameConfig(2, (3, 3), 2))
        assert s.weights == (3, 3)
        assert s.alive == (True, True)
        assert s.step == 0

    def test_semilocal_total(self):
        s = init_game(GameConfig(4, (18,) * 4, 8, rule="semilocal", w0=72))
        assert s.total == 72

    def test_zero_weight_rejected(self):
        with pytest.raises(ConfigurationError, match="initial weight must be >= 1"):
            GameConfig(2, (0, 3), 2)

    @pytest.mark.parametrize(
        "kwargs, field",
        [
            (dict(n=1, initial_weights=(3,), c_inc=2), "n"),
            (dict(n=2, initial_weights=(3, 3), c_inc=0), "c_inc"),
            (dict(n=2, initial_weights=(3, 3), c_inc=2, c_dec=0), "c_dec"),
            (dict(n=2, initial_weights=(3, 3), c_inc=2, rule="semilocal", w0=7), "w0"),
            (dict(n=2, initial_weights=(3, 3), c_inc=2, rule="semilocal", coupling="independent"), "coupling"),
            (dict(n=3, initial_weights=(3, 3), c_inc=2), "initial_weights"),
        ],
    )
    def test_errors_name_the_field(self, kwargs, field):
        with pytest.raises(ConfigurationError) as exc:
            GameConfig(**kwargs)
        assert str(exc.value).startswith(field + ":")

    def test_dict_round_trip(self):
        cfg = GameConfig(3, (1, 2, 3), 4, rule="semilocal")
        assert GameConfig.from_dict(cfg.to_dict()) == cfg


class TestApplyStep:
    def test_basic(self):
        assert apply_step(state([3, 3], 2), 0).weights == (4, 2)

    def test_weight_one_winner_survives(self):
        assert apply_step(state([1, 5], 3), 0).weights == (3, 4)

    def test_semilocal_clip(self):
        s = init_game(GameConfig(2, (5, 5), 4, rule="semilocal"))
        nxt = apply_step(s, 0)
        assert nxt.weights == (6, 4)
        assert nxt.total == 10

    def test_bankrupt_winner_gets_nothing(self):
        assert apply_step(state([0, 4], 3), 0).weights == (0, 3)

    def test_partial_payment(self):
        # a player poorer than c_dec pays everything it has
        assert apply_step(state([1, 5], 4, c_dec=2), 1).weights == (0, 7)

    def test_step_counter_and_purity(self):
        s = state([3, 4, 5], 3)
        a, b = apply_step(s, 1), apply_step(s, 1)
        assert a == b and a.step == 1 and s.weights == (3, 4, 5)

    def test_no_one_alive(self):
        with pytest.raises(InvalidStateError):
            apply_step(state([0, 0], 2), 0)

    def test_slot_range(self):
        with pytest.raises(ValueError):
            apply_step(state([1, 1], 2), 2)


weights_st = st.lists(st.integers(0, 12), min_size=2, max_size=6).filter(lambda w: any(w))


@given(weights_st, st.integers(1, 15), st.integers(1, 3), st.data())
def test_step_matches_enumeration_oracle(weights, c_inc, c_dec, data):
    s = state(weights, c_inc, c_dec)
    slot = data.draw(st.integers(0, len(weights) - 1))
    assert apply_step(s, slot).weights == one_step_outcomes(weights, c_inc, c_dec)[slot]


@given(weights_st, st.integers(1, 15))
def test_expected_total_and_player_change(weights, c_inc):
    s = state(weights, c_inc)
    n = len(weights)
    k = s.n_alive
    nexts = [apply_step(s, i) for i in range(n)]
    mean_total = np.mean([x.total for x in nexts]) - s.total
    assert mean_total == pytest.approx(-k + k * c_inc / n)
    for i, w in enumerate(weights):
        if w > 0:
            mean_i = np.mean([x.weights[i] for x in nexts]) - w
            assert mean_i == pytest.approx(c_inc / n - 1)


@settings(max_examples=50)
@given(st.lists(st.integers(1, 10), min_size=2, max_size=5), st.integers(1, 12), st.integers(0, 2**32))
def test_reachable_state_invariants(weights, c_inc, seed):
    s = init_game(GameConfig(len(weights), tuple(weights), c_inc))
    rng = SplitMix64(seed)
    alive = s.n_alive
    for _ in range(200):
        if s.n_alive == 0:
            break
        s, _ = step_random(s, rng)
        assert all(isinstance(w, int) and w >= 0 for w in s.weights)
        assert s.alive == tuple(w > 0 for w in s.weights)
        assert s.n_alive <= alive
        alive = s.n_alive


@settings(max_examples=30)
@given(st.lists(st.integers(1, 20), min_size=2, max_size=5), st.integers(2, 20), st.integers(0, 2**32))
def test_semilocal_cap_never_exceeded(weights, c_inc, seed):
    s = init_game(GameConfig(len(weights), tuple(weights), c_inc, rule="semilocal"))
    rng = SplitMix64(seed)
    for _ in range(300):
        if s.n_alive == 0:
            break
        s, _ = step_random(s, rng)
        assert s.total <= s.config.w0


def test_semilocal_cap_bulk():
    from ruin_lab.montecarlo import simulate_games

    cfg = GameConfig(4, (3, 5, 7, 9), 9, rule="semilocal")
    batch = simulate_games(cfg, 0, 0, replicas=1000, seed=5, max_steps=1000)
    # kernel audit counts every step whose total exceeded the cap
    assert batch.audit_failures.sum() == 0
    assert batch.final.sum(axis=1).max() <= cfg.w0


class TestRandomStep:
    def test_uniform_slots(self):
        rng = np.random.default_rng(1)
        s = state([5, 5, 5, 5], 4)
        counts = np.zeros(4)
        draws = rng.integers(4, size=10**6)
        for i in range(4):
            counts[i] = (draws == i).sum()
        assert chisquare(counts).pvalue > 0.001
        # and step_random uses exactly that slot
        r1, r2 = np.random.default_rng(9), np.random.default_rng(9)
        for _ in range(50):
            nxt, slot = step_random(s, r1)
            assert slot == r2.integers(4)
            assert nxt == apply_step(s, slot)

    def test_uniform_slots_splitmix(self):
        rng = SplitMix64(17)
        s = state([10**9] * 4, 4)
        counts = np.zeros(4)
        for _ in range(200_000):
            counts[step_random(s, rng)[1]] += 1
        assert chisquare(counts).pvalue > 0.001

    def test_two_alive_of_four(self):
        s = state([0, 3, 0, 3], 4)
        outcomes = [apply_step(s, i) for i in range(4)]
        up = sum(any(a > b for a, b in zip(o.weights, s.weights)) for o in outcomes)
        assert up / 4 == 0.5

    def test_replay(self):
        s = state([3, 4, 5], 3)
        a = [x[1] for x in _walk(s, SplitMix64(99), 30)]
        b = [x[1] for x in _walk(s, SplitMix64(99), 30)]
        assert a == b

    def test_alive_uniform_flag(self):
        cfg = GameConfig(4, (3, 3, 3, 3), 4, winner_selection="alive")
        s = GameState(cfg, (0, 3, 0, 3))
        rng = SplitMix64(3)
        slots = {step_random(s, rng)[1] for _ in range(100)}
        assert slots == {1, 3}


def _walk(s, rng, steps):
    out = []
    for _ in range(steps):
        if s.n_alive == 0:
            break
        s, slot = step_random(s, rng)
        out.append((s, slot))
    return out


class TestRun:
    def test_two_players_weight_one(self):
        s = init_game(GameConfig(2, (1, 1), 2))
        for seed in range(20):
            res = run(s, StopCondition.one_survivor(), 100, SplitMix64(seed))
            assert res.steps == 1 and res.stopped

    def test_already_stopped(self):
        s = init_game(GameConfig(2, (3, 3), 2))
        res = run(s, StopCondition.total_at_most(6), 100, SplitMix64(0))
        assert res.steps == 0 and res.stopped

    def test_censor_at_zero(self):
        s = init_game(GameConfig(2, (3, 3), 2))
        res = run(s, StopCondition.one_survivor(), 0, SplitMix64(0))
        assert res.steps == 0 and not res.stopped

    def test_first_bankruptcy_counts_from_run_start(self):
        s = GameState(GameConfig(3, (4, 4, 4), 3), (0, 4, 4))
        res = run(s, StopCondition.first_bankruptcy(), 10_000, SplitMix64(4))
        assert res.stopped and res.final_state.n_alive < 2

    def test_reach(self):
        s = init_game(GameConfig(2, (3, 3), 4))
        res = run(s, StopCondition.some_weight_reaches(10), 10_000, SplitMix64(1))
        assert res.stopped and max(res.final_state.weights) >= 10


class TestIndependent:
    def test_single_player_law_matches_coupled(self):
        # one live player among n slots: up-move probability 1/n either way
        cfg_c = GameConfig(3, (5, 5, 5), 3)
        cfg_i = GameConfig(3, (5, 5, 5), 3, coupling="independent")
        sc, si = GameState(cfg_c, (5, 0, 0)), GameState(cfg_i, (5, 0, 0))
        rng_c, rng_i = SplitMix64(1), SplitMix64(2)
        up_c = sum(step_random(sc, rng_c)[0].weights[0] > 5 for _ in range(60_000)) / 60_000
        up_i = sum(independent_step(si, rng_i).weights[0] > 5 for _ in range(60_000)) / 60_000
        assert up_c == pytest.approx(1 / 3, abs=0.01)
        assert up_i == pytest.approx(1 / 3, abs=0.01)

    def test_both_can_win(self):
        cfg = GameConfig(2, (5, 5), 2, coupling="independent")
        s = init_game(cfg)
        rng = SplitMix64(11)
        both = sum(independent_step(s, rng).weights == (6, 6) for _ in range(80_000)) / 80_000
        assert both == pytest.approx(0.25, abs=0.006)

    def test_semilocal_rejected(self):
        with pytest.raises(ConfigurationError):
            GameConfig(2, (5, 5), 2, rule="semilocal", coupling="independent")
