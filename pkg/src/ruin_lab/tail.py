"""Exact lower tails of Binomial(t, 1/n) and the anti-concentration check."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

DEFAULT_ALPHA = math.sqrt(math.pi / 12)
MAX_GRID_CELLS = 10**7


class GridSizeError(ValueError):
    pass


@dataclass(frozen=True)
class TailResult:
    t: int
    n: int
    threshold: float
    s_max: int
    prob: float
    holds: bool
    alpha: float
    prob_above_mean: float
    middle_band: float

    @property
    def median_piece_ok(self) -> bool:
        return self.prob_above_mean <= 0.5

    def to_dict(self) -> dict:
        d = asdict(self)
        d["median_piece_ok"] = self.median_piece_ok
        return d


def _log_pmf(t: int, n: int, i: int) -> float:
    return (
        math.lgamma(t + 1) - math.lgamma(i + 1) - math.lgamma(t - i + 1)
        - i * math.log(n) + (t - i) * math.log1p(-1.0 / n)
    )


def binom_lower_tail(t: int, n: int, s: int) -> float:
    """Pr{S <= s} for S ~ Binomial(t, 1/n), summed exactly term by term."""
    if t < 1 or n < 2:
        raise ValueError(f"need t >= 1 and n >= 2, got t={t}, n={n}")
    if s < 0:
        return 0.0
    if s >= t:
        return 1.0
    if s * n <= t:
        return min(1.0, math.fsum(math.exp(_log_pmf(t, n, i)) for i in range(s + 1)))
    # above the mean the complement has the small terms
    upper = math.fsum(math.exp(_log_pmf(t, n, i)) for i in range(s + 1, t + 1))
    return max(0.0, 1.0 - upper)


def anticb_check(t: int, n: int, alpha: float = DEFAULT_ALPHA) -> TailResult:
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    mean = t / n
    threshold = mean - alpha * math.sqrt(mean)
    s_max = math.floor(threshold)
    prob = binom_lower_tail(t, n, s_max)
    at_mean = binom_lower_tail(t, n, t // n)
    return TailResult(
        t=t, n=n, threshold=threshold, s_max=s_max, prob=prob,
        holds=prob > 1.0 / 3.0, alpha=alpha,
        prob_above_mean=1.0 - at_mean,
        middle_band=at_mean - prob,
    )


@dataclass
class TailRegion:
    cells: list[TailResult]

    @property
    def failing(self) -> list[TailResult]:
        return [c for c in self.cells if not c.holds]

    def summary(self) -> dict:
        fails = self.failing
        by_n: dict[int, int] = {}
        for c in fails:
            by_n[c.n] = max(by_n.get(c.n, 0), c.t)
        return {
            "cells": len(self.cells),
            "failing": len(fails),
            "largest_failing_t_by_n": {str(k): v for k, v in sorted(by_n.items())},
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "n", "threshold", "s_max", "prob", "holds"])
        for c in self.cells:
            w.writerow([c.t, c.n, repr(c.threshold), c.s_max, repr(c.prob), str(c.holds).lower()])
        return buf.getvalue()


def anticb_region(t_max: int, n_max: int, alpha: float = DEFAULT_ALPHA) -> TailRegion:
    """Verdicts for every t in [1, t_max] and n in [2, n_max], rows ordered by t."""
    if t_max < 2 or n_max < 2:
        raise ValueError("t_max and n_max must be >= 2")
    if t_max * (n_max - 1) > MAX_GRID_CELLS:
        raise GridSizeError(f"grid of {t_max * (n_max - 1)} cells exceeds {MAX_GRID_CELLS}")
    return TailRegion(
        [anticb_check(t, n, alpha) for t in range(1, t_max + 1) for n in range(2, n_max + 1)]
    )
