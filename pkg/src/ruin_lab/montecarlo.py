"""Seed-deterministic replica runs and the estimates built from them.

Replica ``i`` of a run with master ``seed`` draws from the SplitMix64 stream
started at ``mix64(seed, i)`` (see :mod:`ruin_lab.rng`).  Work is split into
contiguous replica chunks across threads and reassembled in index order, so
the worker count never changes a result.
"""
from __future__ import annotations

import math
import os
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from statistics import NormalDist

import numpy as np

from . import _kernels
from .game import GameConfig, StopCondition
from .walks import WalkSpec

DEFAULT_LEVEL = 0.99
MIN_GROUP = 30


def worker_count(workers: int | None = None) -> int:
    """Explicit argument, else ``RUIN_LAB_THREADS`` (0 = auto), else 1."""
    if workers is None:
        workers = int(os.environ.get("RUIN_LAB_THREADS", "1") or 0)
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    ci_low: float
    ci_high: float
    replicas: int
    censored: int
    seed: int
    level: float = DEFAULT_LEVEL

    @classmethod
    def from_samples(cls, samples, censored: int = 0, seed: int = 0,
                     level: float = DEFAULT_LEVEL) -> "Estimate":
        x = np.asarray(samples, dtype=np.float64)
        m = len(x)
        mean = float(x.mean())
        stderr = float(x.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
        z = NormalDist().inv_cdf(0.5 + level / 2)
        return cls(mean, stderr, mean - z * stderr, mean + z * stderr, m, int(censored), seed, level)

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GameBatch:
    """Raw per-replica output of a game run, in replica-index order."""

    steps: np.ndarray
    stopped: np.ndarray
    extinct: np.ndarray
    final: np.ndarray
    first_bankruptcy_step: np.ndarray
    first_bankruptcy_weights: np.ndarray
    max_weights: np.ndarray
    audit_failures: np.ndarray

    @property
    def censored(self) -> np.ndarray:
        return ~self.stopped

    def trace_rows(self):
        alive = (self.final > 0).sum(axis=1)
        total = self.final.sum(axis=1)
        for i in range(len(self.steps)):
            yield i, int(self.steps[i]), bool(self.stopped[i]), int(alive[i]), int(total[i])


def _chunks(replicas: int, workers: int):
    size = max(1, math.ceil(replicas / workers))
    return [(a, min(size, replicas - a)) for a in range(0, replicas, size)]


def _map_chunks(fn, replicas: int, workers: int | None):
    parts = _chunks(replicas, worker_count(workers))
    if len(parts) == 1:
        return [fn(*parts[0])]
    with ThreadPoolExecutor(len(parts)) as pool:
        return list(pool.map(lambda p: fn(*p), parts))


def simulate_games(config: GameConfig, stop_code: int, stop_param: int, replicas: int,
                   seed: int, max_steps: int, workers: int | None = None) -> GameBatch:
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    init = np.asarray(config.initial_weights, dtype=np.int64)
    useed = np.uint64(seed & ((1 << 64) - 1))

    def chunk(first, count):
        return _kernels.simulate_game_batch(
            init, config.c_inc, config.c_dec, config.cap,
            config.coupling == "independent", config.winner_selection == "alive",
            stop_code, stop_param, max_steps, useed, first, count,
        )

    parts = _map_chunks(chunk, replicas, workers)
    return GameBatch(*(np.concatenate([p[j] for p in parts]) for j in range(8)))


def run_replicas(config: GameConfig, stop: StopCondition, replicas: int, seed: int,
                 max_steps: int, workers: int | None = None) -> GameBatch:
    return simulate_games(config, stop.code, stop.parameter or 0, replicas, seed, max_steps, workers)


def estimate_stop_time(config: GameConfig, stop: StopCondition, replicas: int, seed: int,
                       max_steps: int, level: float = DEFAULT_LEVEL,
                       workers: int | None = None, batch: GameBatch | None = None) -> Estimate:
    """Mean number of steps until ``stop`` holds.

    Censored replicas (including ones where every player went bankrupt before
    the stop event) count at ``max_steps``, so the mean is then a lower bound.
    """
    if batch is None:
        batch = run_replicas(config, stop, replicas, seed, max_steps, workers)
    samples = np.where(batch.stopped, batch.steps, max_steps)
    return Estimate.from_samples(samples, int(batch.censored.sum()), seed, level)


def estimate_pstar_event(config: GameConfig, W1: int, W2: int, replicas: int, seed: int,
                         horizon: int, level: float = DEFAULT_LEVEL,
                         workers: int | None = None) -> Estimate:
    """Pr{some player ever reaches W1 and fewer than two ever reach W2} within ``horizon``."""
    if W1 > W2:
        raise ValueError(f"W1={W1} exceeds W2={W2}")
    batch = simulate_games(config, _kernels.STOP_PSTAR_RESOLVED, W2, replicas, seed, horizon, workers)
    mx = batch.max_weights
    event = (mx >= W1).any(axis=1) & ((mx >= W2).sum(axis=1) < 2)
    return Estimate.from_samples(event, int(batch.censored.sum()), seed, level)


def estimate_drift(config: GameConfig, t: int, replicas: int, seed: int, player: int = 0,
                   level: float = DEFAULT_LEVEL, workers: int | None = None) -> Estimate:
    """Mean weight gain of ``player`` after exactly ``t`` steps."""
    batch = simulate_games(config, 0, 0, replicas, seed, t, workers)
    gain = batch.final[:, player] - config.initial_weights[player]
    return Estimate.from_samples(gain, int(batch.extinct.sum()), seed, level)


def simulate_walks(spec: WalkSpec, replicas: int, seed: int, max_steps: int,
                   workers: int | None = None):
    useed = np.uint64(seed & ((1 << 64) - 1))

    def chunk(first, count):
        return _kernels.simulate_walk_batch(
            spec.up_step, spec.up_prob, spec.down_step, spec.start, spec.wall,
            spec.reflecting, max_steps, useed, first, count,
        )

    parts = _map_chunks(chunk, replicas, workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def estimate_hit_probability(spec: WalkSpec, replicas: int, seed: int, max_steps: int,
                             level: float = DEFAULT_LEVEL, workers: int | None = None) -> Estimate:
    if spec.reflecting:
        raise ValueError("hit probability needs an absorbing upper wall")
    _, outcome = simulate_walks(spec, replicas, seed, max_steps, workers)
    return Estimate.from_samples(outcome == 1, int((outcome < 0).sum()), seed, level)


def estimate_walk_absorption(spec: WalkSpec, replicas: int, seed: int, max_steps: int,
                             level: float = DEFAULT_LEVEL, workers: int | None = None) -> Estimate:
    steps, outcome = simulate_walks(spec, replicas, seed, max_steps, workers)
    return Estimate.from_samples(steps, int((outcome < 0).sum()), seed, level)


@dataclass
class EffRecReport:
    lhs: Estimate
    t_one_est: Estimate
    continuation_max: Estimate
    argmax_config: tuple
    configs_observed: list[tuple[int, tuple[int, ...], int]]
    verdict: bool
    status: str
    slack: float
    censored: int
    audit_failures: int
    merged_groups: int
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs.to_dict(),
            "t_one": self.t_one_est.to_dict(),
            "continuation_max": self.continuation_max.to_dict(),
            "argmax_config": list(self.argmax_config),
            "configs_observed": [
                {"survivors": k, "weights": list(w), "frequency": f}
                for k, w, f in self.configs_observed
            ],
            "verdict": self.verdict,
            "status": self.status,
            "slack": self.slack,
            "censored": self.censored,
            "audit_failures": self.audit_failures,
            "merged_groups": self.merged_groups,
            "notes": list(self.notes),
        }


def verify_eff_rec(config: GameConfig, replicas: int, seed: int, max_steps: int,
                   level: float = DEFAULT_LEVEL, workers: int | None = None) -> EffRecReport:
    """Split each run to one survivor at its first bankruptcy and compare the parts.

    The continuation after the first bankruptcy is grouped by the surviving
    weight multiset; the right-hand side uses the largest group mean.  Groups
    with fewer than ``MIN_GROUP`` members are pooled by survivor count.  The
    maximum is over observed configurations only, so it under-estimates the
    maximum over all reachable ones.
    """
    batch = run_replicas(config, StopCondition.one_survivor(), replicas, seed, max_steps, workers)
    total = np.where(batch.stopped, batch.steps, max_steps)
    fb = batch.first_bankruptcy_step
    t_one = np.where(fb >= 0, fb, max_steps)
    cont = total - t_one
    censored = int(batch.censored.sum())

    groups: dict[tuple, list[int]] = defaultdict(list)
    for i in np.flatnonzero(fb >= 0):
        surv = tuple(sorted(int(w) for w in batch.first_bankruptcy_weights[i] if w > 0))
        groups[(len(surv), surv)].append(i)
    observed = sorted(((k, w, len(ix)) for (k, w), ix in groups.items()),
                      key=lambda r: (r[0], r[1]))

    pooled: dict[tuple, list[int]] = {}
    merged = 0
    for (k, w), ix in groups.items():
        if len(ix) >= MIN_GROUP:
            pooled[(k, w)] = ix
        else:
            merged += 1
            pooled.setdefault((k, ("merged",)), []).extend(ix)
    notes = ["continuation maximum is over observed configurations only"]
    if merged:
        notes.append(f"{merged} configuration groups below {MIN_GROUP} replicas pooled by survivor count")

    lhs = Estimate.from_samples(total, censored, seed, level)
    t_est = Estimate.from_samples(t_one, censored, seed, level)
    if pooled:
        best_key = max(pooled, key=lambda key: (cont[pooled[key]].mean(), key[0]))
        cmax = Estimate.from_samples(cont[sorted(pooled[best_key])], 0, seed, level)
    else:
        best_key = (0, ())
        cmax = Estimate.from_samples([0.0], 0, seed, level)
    slack = 3.0 * math.sqrt(lhs.stderr**2 + t_est.stderr**2 + cmax.stderr**2)
    verdict = lhs.mean <= t_est.mean + cmax.mean + slack
    if censored:
        status = "inconclusive"
        notes.append(f"{censored} replicas censored at max_steps={max_steps}")
    else:
        status = "pass" if verdict else "fail"
    return EffRecReport(
        lhs=lhs, t_one_est=t_est, continuation_max=cmax, argmax_config=best_key,
        configs_observed=observed, verdict=bool(verdict), status=status, slack=slack,
        censored=censored, audit_failures=int(batch.audit_failures.sum()),
        merged_groups=merged, notes=notes,
    )
