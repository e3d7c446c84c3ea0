"""Exact solvers for one-dimensional integer random walks.

A walk moves ``+up_step`` with probability ``up_prob`` and ``-down_step``
otherwise.  Position 0 (and anything below) is absorbing.  The upper wall is
either absorbing (any position >= ``wall`` counts as having reached it) or
reflecting, in which case positions above ``wall`` are clamped to ``wall``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

WALL_KINDS = ("absorbing", "reflecting")


class WalkDomainError(ValueError):
    pass


class WalkSolveError(ArithmeticError):
    pass


@dataclass(frozen=True)
class WalkSpec:
    up_step: int
    up_prob: float
    wall: int
    start: int = 0
    down_step: int = 1
    wall_kind: str = "absorbing"
    note: str = ""

    def __post_init__(self):
        # up_step 0 is a lazy walk: the winner's gain only offsets its payment
        if self.up_step < 0:
            raise WalkDomainError(f"up_step must be >= 0, got {self.up_step}")
        if self.down_step < 1:
            raise WalkDomainError(f"down_step must be >= 1, got {self.down_step}")
        if not 0.0 < self.up_prob < 1.0:
            raise WalkDomainError(f"up_prob must lie in (0, 1), got {self.up_prob}")
        if self.wall < 1:
            raise WalkDomainError(f"wall must be >= 1, got {self.wall}")
        if not 0 <= self.start <= self.wall:
            raise WalkDomainError(f"start must lie in [0, {self.wall}], got {self.start}")
        if self.wall_kind not in WALL_KINDS:
            raise WalkDomainError(f"wall_kind must be one of {WALL_KINDS}")

    @property
    def reflecting(self) -> bool:
        return self.wall_kind == "reflecting"

    @property
    def transient(self) -> range:
        return range(1, self.wall + 1) if self.reflecting else range(1, self.wall)

    def with_start(self, start: int) -> "WalkSpec":
        return WalkSpec(**{**asdict(self), "start": start})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EVector:
    """Expected one-level descent times ``e_x`` for x in ``[1, wall]``."""

    values: np.ndarray
    residual: float

    def __getitem__(self, x: int) -> float:
        if not 1 <= x <= len(self.values):
            raise IndexError(x)
        return float(self.values[x - 1])

    def __len__(self):
        return len(self.values)

    def passage(self, frm: int, to: int) -> float:
        return float(self.values[to:frm].sum())


def poorest_walk(n: int, w0: int, k: int, c_inc: int) -> WalkSpec:
    """Walk of the currently poorest of ``k`` survivors, started at the wall."""
    if k < 1:
        raise WalkDomainError(f"k must be >= 1, got {k}")
    if c_inc < 2:
        raise WalkDomainError(f"c_inc must be >= 2 for an upward move, got {c_inc}")
    wall = w0 // k
    note = "" if w0 % k == 0 else f"w0/k = {w0}/{k} truncated to {wall}"
    return WalkSpec(
        up_step=c_inc - 1, up_prob=1.0 / n, down_step=1,
        start=wall, wall=wall, wall_kind="reflecting", note=note,
    )


def total_walk(n: int, w0: int, k: int, c_inc: int, halved: bool = False) -> WalkSpec:
    """Walk of the total weight of ``k`` survivors under the semilocal cap ``w0``.

    With ``halved=True`` (``k == 2`` only) positions and steps are divided by 2.
    """
    if k < 1:
        raise WalkDomainError(f"k must be >= 1, got {k}")
    if c_inc <= k:
        raise WalkDomainError(f"degenerate walk: c_inc={c_inc} <= k={k} gives no upward motion")
    if k >= n:
        raise WalkDomainError(f"degenerate walk: k={k} >= n={n} makes every step an up-step")
    if not halved:
        return WalkSpec(
            up_step=c_inc - k, up_prob=k / n, down_step=k,
            start=w0, wall=w0, wall_kind="reflecting",
        )
    if k != 2 or c_inc % 2:
        raise WalkDomainError("halved total walk needs k == 2 and even c_inc")
    wall = w0 // 2
    note = "" if w0 % 2 == 0 else f"w0/2 = {w0}/2 truncated to {wall}"
    return WalkSpec(
        up_step=c_inc // 2 - 1, up_prob=2.0 / n, down_step=1,
        start=wall, wall=wall, wall_kind="reflecting", note=note,
    )


def _system(spec: WalkSpec):
    """First-step equations ``(I - Q) v = b`` over the transient positions.

    Returns the matrix and the one-step probability of jumping onto the upper
    absorbing wall from each transient position.
    """
    states = spec.transient
    m = len(states)
    A = np.eye(m)
    up_exit = np.zeros(m)
    p, q = spec.up_prob, 1.0 - spec.up_prob
    for idx, x in enumerate(states):
        y = x + spec.up_step
        if spec.reflecting:
            y = min(y, spec.wall)
        if not spec.reflecting and y >= spec.wall:
            up_exit[idx] += p
        else:
            A[idx, y - 1] -= p
        z = x - spec.down_step
        if z > 0:
            A[idx, z - 1] -= q
    return A, up_exit


def _solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise WalkSolveError(f"singular first-step system of size {len(b)}: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise WalkSolveError(f"non-finite solution, condition number {np.linalg.cond(A):.3g}")
    return x


def hit_probabilities(spec: WalkSpec) -> np.ndarray:
    """Probability of reaching the upper wall from every position 0..wall."""
    if spec.reflecting:
        raise WalkDomainError("hit probability needs an absorbing upper wall")
    A, up_exit = _system(spec)
    h = np.empty(spec.wall + 1)
    h[0], h[-1] = 0.0, 1.0
    h[1:-1] = _solve(A, up_exit)
    return h


def exact_hit_probability(spec: WalkSpec) -> float:
    return float(hit_probabilities(spec)[spec.start])


def absorption_times(spec: WalkSpec) -> np.ndarray:
    """Expected steps to absorption from every position 0..wall."""
    A, _ = _system(spec)
    t = np.zeros(spec.wall + 1)
    t[1: 1 + len(spec.transient)] = _solve(A, np.ones(len(spec.transient)))
    return t


def exact_expected_absorption(spec: WalkSpec) -> float:
    return float(absorption_times(spec)[spec.start])


def solve_e_recurrence(spec: WalkSpec) -> EVector:
    """Backward solve of ``e_x = 1/q + (p/q) * sum_{z=x+1}^{min(x+u, B)} e_z``.

    ``e_x`` is the expected time to first step from x down to x-1 on a
    reflecting walk with unit down-steps; the up-move lands on
    ``min(x+u, B)``, from which the walk must descend through every level back
    to x-1.
    """
    if not spec.reflecting:
        raise WalkDomainError("the e-recurrence needs a reflecting upper wall")
    if spec.down_step != 1:
        raise WalkDomainError("the e-recurrence needs unit down-steps")
    p = spec.up_prob
    q = 1.0 - p
    B, u = spec.wall, spec.up_step
    e = np.zeros(B + 2)  # e[x] for x in 1..B; e[B+1] unused padding
    window = 0.0  # sum of e[x+1 .. min(x+u, B)]
    for x in range(B, 0, -1):
        e[x] = (1.0 + p * window) / q
        window += e[x]
        if u == 0:
            window = 0.0
        elif x + u <= B:
            window -= e[x + u]
    values = e[1: B + 1].copy()
    return EVector(values=values, residual=e_residual(spec, values))


def e_residual(spec: WalkSpec, values: np.ndarray) -> float:
    """Largest violation of the defining recurrence, scaled by ``max(1, e_x)``."""
    p = spec.up_prob
    q = 1.0 - p
    B, u = spec.wall, spec.up_step
    worst = 0.0
    for x in range(1, B + 1):
        s = values[x: min(x + u, B)].sum()
        err = abs(q * values[x - 1] - 1.0 - p * s) / max(1.0, values[x - 1])
        worst = max(worst, err)
    return float(worst)


def exact_first_passage(spec: WalkSpec, frm: int, to: int) -> float:
    """Expected steps to first descend from ``frm`` to ``to`` on a reflecting walk."""
    if to >= frm:
        raise WalkDomainError(f"first passage needs to < from, got from={frm}, to={to}")
    if to < 0 or frm > spec.wall:
        raise WalkDomainError(f"positions must lie in [0, {spec.wall}]")
    return solve_e_recurrence(spec).passage(frm, to)
