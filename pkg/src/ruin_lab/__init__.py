"""Simulation and exact analysis of the n-player bankruptcy game and its random-walk reductions."""
from .bounds import (
    BoundDomainError,
    BoundReport,
    expected_drift,
    pstar_upper,
    ruin_prob_bounds,
    semilocal_report,
    sp_upper,
    st2_lower,
)
from .game import (
    ConfigurationError,
    GameConfig,
    GameState,
    InvalidStateError,
    RunResult,
    StopCondition,
    apply_step,
    independent_step,
    init_game,
    run,
    step_random,
)
from .montecarlo import (
    EffRecReport,
    Estimate,
    estimate_drift,
    estimate_hit_probability,
    estimate_pstar_event,
    estimate_stop_time,
    estimate_walk_absorption,
    verify_eff_rec,
)
from .rng import SplitMix64, mix64
from .tail import TailResult, anticb_check, anticb_region, binom_lower_tail
from .walks import (
    EVector,
    WalkDomainError,
    WalkSolveError,
    WalkSpec,
    exact_expected_absorption,
    exact_first_passage,
    exact_hit_probability,
    poorest_walk,
    solve_e_recurrence,
    total_walk,
)

__version__ = "0.1.0"
