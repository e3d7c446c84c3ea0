"""Coupled n-player weight-transfer game.

Each step every alive player pays ``c_dec`` (or its whole weight if poorer)
and one winner slot, drawn uniformly from all ``n`` original slots, receives
``c_inc``.  Payment and award form a single net update, so a weight-1 winner
survives.  Under the semilocal rule the award is clipped so the total never
exceeds ``w0``.  In independent coupling every alive player flips its own
``1/n`` coin instead of sharing one draw.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np
from numba import njit

RULES = ("local", "semilocal")
COUPLINGS = ("coupled", "independent")
SELECTIONS = ("slot", "alive")

# integer codes shared with the batch kernels
STOP_MAX_STEPS_ONLY = 0
STOP_FIRST_BANKRUPTCY = 1
STOP_ONE_SURVIVOR = 2
STOP_TOTAL_AT_MOST = 3
STOP_SOME_WEIGHT_REACHES = 4
STOP_KINDS = {
    "max_steps_only": STOP_MAX_STEPS_ONLY,
    "first_bankruptcy": STOP_FIRST_BANKRUPTCY,
    "one_survivor": STOP_ONE_SURVIVOR,
    "total_at_most": STOP_TOTAL_AT_MOST,
    "some_weight_reaches": STOP_SOME_WEIGHT_REACHES,
}


class ConfigurationError(ValueError):
    """Invalid game configuration; the message starts with the offending field."""


class InvalidStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class GameConfig:
    n: int
    initial_weights: tuple[int, ...]
    c_inc: int
    c_dec: int = 1
    rule: str = "local"
    coupling: str = "coupled"
    w0: int | None = None
    winner_selection: str = "slot"

    def __post_init__(self):
        weights = tuple(int(w) for w in self.initial_weights)
        object.__setattr__(self, "initial_weights", weights)
        if self.n < 2:
            raise ConfigurationError(f"n: need at least 2 players, got {self.n}")
        if len(weights) != self.n:
            raise ConfigurationError(
                f"initial_weights: expected {self.n} weights, got {len(weights)}"
            )
        if any(w < 1 for w in weights):
            raise ConfigurationError("initial_weights: initial weight must be >= 1")
        if self.c_inc < 1:
            raise ConfigurationError(f"c_inc: must be >= 1, got {self.c_inc}")
        if self.c_dec < 1:
            raise ConfigurationError(f"c_dec: must be >= 1, got {self.c_dec}")
        if self.rule not in RULES:
            raise ConfigurationError(f"rule: expected one of {RULES}, got {self.rule!r}")
        if self.coupling not in COUPLINGS:
            raise ConfigurationError(
                f"coupling: expected one of {COUPLINGS}, got {self.coupling!r}"
            )
        if self.winner_selection not in SELECTIONS:
            raise ConfigurationError(
                f"winner_selection: expected one of {SELECTIONS}, got {self.winner_selection!r}"
            )
        total = sum(weights)
        if self.w0 is None:
            object.__setattr__(self, "w0", total)
        if self.rule == "semilocal":
            if self.w0 != total:
                raise ConfigurationError(
                    f"w0: semilocal cap must equal the initial total {total}, got {self.w0}"
                )
            if self.coupling == "independent":
                raise ConfigurationError(
                    "coupling: the semilocal cap is undefined for independent coupling"
                )
        if self.winner_selection == "alive" and self.coupling == "independent":
            raise ConfigurationError(
                "winner_selection: alive-uniform selection needs coupled mode"
            )

    @classmethod
    def uniform(cls, n: int, initial: int, c_inc: int, **kwargs) -> "GameConfig":
        return cls(n=n, initial_weights=(initial,) * n, c_inc=c_inc, **kwargs)

    @property
    def cap(self) -> int:
        """Total cap passed to the kernels; 0 means uncapped."""
        return self.w0 if self.rule == "semilocal" else 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["initial_weights"] = list(self.initial_weights)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GameConfig":
        return cls(**{**d, "initial_weights": tuple(d["initial_weights"])})


@dataclass(frozen=True)
class GameState:
    config: GameConfig
    weights: tuple[int, ...]
    step: int = 0

    @property
    def alive(self) -> tuple[bool, ...]:
        return tuple(w > 0 for w in self.weights)

    @property
    def total(self) -> int:
        return sum(self.weights)

    @property
    def n_alive(self) -> int:
        return sum(w > 0 for w in self.weights)


@dataclass(frozen=True)
class StopCondition:
    kind: str
    parameter: int | None = None

    def __post_init__(self):
        if self.kind not in STOP_KINDS:
            raise ConfigurationError(f"stop: unknown kind {self.kind!r}")
        needs = self.kind in ("total_at_most", "some_weight_reaches")
        if needs and self.parameter is None:
            raise ConfigurationError(f"stop: {self.kind} needs a parameter")
        if self.parameter is not None and self.parameter < 0:
            raise ConfigurationError("stop: parameter must be >= 0")

    @classmethod
    def one_survivor(cls):
        return cls("one_survivor")

    @classmethod
    def first_bankruptcy(cls):
        return cls("first_bankruptcy")

    @classmethod
    def total_at_most(cls, x: int):
        return cls("total_at_most", x)

    @classmethod
    def some_weight_reaches(cls, w: int):
        return cls("some_weight_reaches", w)

    @classmethod
    def max_steps_only(cls):
        return cls("max_steps_only")

    @property
    def code(self) -> int:
        return STOP_KINDS[self.kind]

    def holds(self, state: GameState, alive_at_start: int) -> bool:
        return bool(
            _stop_holds(
                np.asarray(state.weights, dtype=np.int64),
                self.code,
                self.parameter or 0,
                alive_at_start,
            )
        )


@dataclass(frozen=True)
class RunResult:
    steps: int
    stopped: bool
    final_state: GameState


@njit(cache=True, nogil=True)
def _advance(weights, wins, c_inc, c_dec, cap):
    """Apply one net update in place and return the new total.

    ``wins[i]`` marks slot i as a winner; bankrupt winners get nothing.  With
    ``cap > 0`` awards are clipped, in slot order, so the total stays <= cap.
    """
    n = weights.shape[0]
    total = 0
    for i in range(n):
        w = weights[i]
        if w > 0:
            w -= c_dec if w > c_dec else w
            if wins[i]:
                w += c_inc
            weights[i] = w
            total += w
    if cap > 0 and total > cap:
        excess = total - cap
        for i in range(n):
            if excess <= 0:
                break
            if wins[i] and weights[i] > 0:
                cut = excess if excess < c_inc else c_inc
                weights[i] -= cut
                excess -= cut
                total -= cut
    return total


@njit(cache=True, nogil=True)
def _stop_holds(weights, kind, param, alive_at_start):
    if kind == 0:
        return False
    alive = 0
    total = 0
    top = 0
    for w in weights:
        if w > 0:
            alive += 1
        total += w
        if w > top:
            top = w
    if kind == 1:
        return alive < alive_at_start
    if kind == 2:
        return alive <= 1
    if kind == 3:
        return total <= param
    return top >= param


def init_game(config: GameConfig) -> GameState:
    return GameState(config=config, weights=tuple(config.initial_weights), step=0)


def apply_step(state: GameState, winner_slot: int) -> GameState:
    """Deterministic coupled transition with the given winner slot."""
    cfg = state.config
    if not 0 <= winner_slot < cfg.n:
        raise ValueError(f"winner_slot must lie in [0, {cfg.n}), got {winner_slot}")
    wins = np.zeros(cfg.n, dtype=np.bool_)
    wins[winner_slot] = True
    return _apply_wins(state, wins)


def _apply_wins(state: GameState, wins: np.ndarray) -> GameState:
    if state.n_alive == 0:
        raise InvalidStateError("no players alive")
    cfg = state.config
    w = np.asarray(state.weights, dtype=np.int64)
    _advance(w, wins, cfg.c_inc, cfg.c_dec, cfg.cap)
    return replace(state, weights=tuple(int(x) for x in w), step=state.step + 1)


def step_random(state: GameState, rng) -> tuple[GameState, int]:
    """One coupled step with a random winner.

    ``rng`` is anything with ``integers(high)`` (a numpy Generator or a
    :class:`~ruin_lab.rng.SplitMix64`).  Slot-uniform selection draws from all
    ``n`` slots; alive-uniform draws among the alive ones only.
    """
    if state.n_alive == 0:
        raise InvalidStateError("no players alive")
    cfg = state.config
    if cfg.winner_selection == "slot":
        slot = int(rng.integers(cfg.n))
    else:
        alive = [i for i, w in enumerate(state.weights) if w > 0]
        slot = alive[int(rng.integers(len(alive)))]
    return apply_step(state, slot), slot


def independent_step(state: GameState, rng) -> GameState:
    """Each alive player wins with its own probability-1/n coin, drawn in slot order."""
    cfg = state.config
    if cfg.rule == "semilocal":
        raise ConfigurationError("coupling: the semilocal cap is undefined for independent coupling")
    if state.n_alive == 0:
        raise InvalidStateError("no players alive")
    p = 1.0 / cfg.n
    wins = np.zeros(cfg.n, dtype=np.bool_)
    for i, w in enumerate(state.weights):
        if w > 0:
            wins[i] = rng.random() < p
    return _apply_wins(state, wins)


def run(state: GameState, stop: StopCondition, max_steps: int, rng) -> RunResult:
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    alive_at_start = state.n_alive
    independent = state.config.coupling == "independent"
    steps = 0
    while True:
        if stop.holds(state, alive_at_start):
            return RunResult(steps, True, state)
        if steps >= max_steps:
            return RunResult(steps, False, state)
        if independent:
            state = independent_step(state, rng)
        else:
            state, _ = step_random(state, rng)
        steps += 1
