"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline;
they are also collected in the terminal summary.
"""
import itertools
import math
import time

import numpy as np
import pytest

from ruin_lab import bounds, tail, walks
from ruin_lab.cli import main
from ruin_lab.game import GameConfig
from ruin_lab.montecarlo import (
    estimate_drift,
    estimate_hit_probability,
    estimate_pstar_event,
    estimate_walk_absorption,
    verify_eff_rec,
)

from oracles import binomial_pmf_dp


def test_c1_exact_solver(acceptance_line):
    start = time.perf_counter()
    worst = 0.0
    for W in (5, 10, 50):
        spec = walks.WalkSpec(1, 0.5, W)
        h = walks.hit_probabilities(spec)
        d = walks.absorption_times(spec)
        x = np.arange(W + 1)
        worst = max(worst, np.abs(h - x / W).max(), np.abs(d - x * (W - x)).max())
    for p, B in [(0.3, 10), (0.6, 12), (0.45, 50), (0.25, 7)]:
        h = walks.hit_probabilities(walks.WalkSpec(1, p, B))
        rho = (1 - p) / p
        ref = np.array([(1 - rho**x) / (1 - rho**B) for x in range(B + 1)])
        worst = max(worst, np.abs(h - ref).max())
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 1.0
    acceptance_line("C1 exact solver", ok, f"max error {worst:.2e}, {elapsed:.3f}s")
    assert ok


def test_c2_ruin_sandwich(acceptance_line):
    start = time.perf_counter()
    cells = bad = 0
    for n, W in itertools.product(range(2, 7), (5, 10, 20)):
        h = walks.hit_probabilities(walks.WalkSpec(n - 1, 1 / n, W))
        for I in range(1, W):
            lo, hi = bounds.ruin_prob_bounds(I, W, n)
            cells += 1
            bad += not (lo - 1e-12 <= h[I] <= hi + 1e-12)
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 10.0
    acceptance_line("C2 ruin-probability sandwich", ok, f"{cells - bad}/{cells} cells inside, {elapsed:.3f}s")
    assert ok


def test_c3_descent_bound_and_product_form(acceptance_line):
    cells = inductive_bad = product_bad = 0
    worst_residual = 0.0
    example = None
    for n in range(3, 7):
        r = 1 + 1 / (n - 1)
        for k, c_inc in itertools.product(range(2, n + 1), sorted({2, n, 2 * n})):
            for w0 in range(k, 61):
                spec = walks.poorest_walk(n, w0, k, c_inc)
                ev = walks.solve_e_recurrence(spec)
                worst_residual = max(worst_residual, ev.residual)
                desc = ev.values[::-1]
                inductive = all(desc[x] <= r**x * (1 + 1e-9) for x in range(spec.wall))
                absorb = walks.exact_expected_absorption(spec)
                product = absorb <= bounds.sp_upper(k, n, w0).upper * (1 + 1e-9)
                cells += 1
                inductive_bad += not inductive
                product_bad += not product
                if not product and example is None:
                    example = (n, k, w0, c_inc, absorb, bounds.sp_upper(k, n, w0).upper)
    ok = inductive_bad == 0 and product_bad == 0 and worst_residual < 1e-9
    detail = (f"{cells} walks, residual {worst_residual:.1e}; inductive bound fails on "
              f"{inductive_bad}, product form fails on {product_bad}")
    if example:
        detail += " (e.g. n={} k={} w0={} c_inc={}: {:.4g} > {:.4g})".format(*example)
    acceptance_line("C3 descent-time bound", ok, detail)
    assert ok


def test_c4_total_walk_domination(acceptance_line):
    pairs = bad = 0
    example = None
    for n in (4, 6):
        c_inc = 2 * n
        for w0 in range(4, 41, 2):
            spec = walks.total_walk(n, w0, 2, c_inc, halved=True)
            for frm in range(1, spec.wall + 1):
                for to in range(frm):
                    passage = walks.exact_first_passage(spec, frm, to)
                    lb = bounds.st2_lower(2 * frm, 2 * to, n, w0, c_inc)
                    pairs += 1
                    if passage < lb * (1 - 1e-12):
                        bad += 1
                        if example is None or lb / passage > example[-1] / example[-2]:
                            example = (n, w0, frm, to, passage, lb)
    ok = bad == 0
    detail = f"{pairs - bad}/{pairs} from/to pairs dominate the closed form"
    if example:
        detail += " (worst ratio: n={} w0={} {}->{}: exact {:.4g} < {:.4g})".format(*example)
    acceptance_line("C4 halved-total-walk domination", ok, detail)
    assert ok


def test_c5_semilocal_desk_scale(acceptance_line):
    n, I, c_inc = 4, 18, 8
    w0 = n * I
    rep = bounds.semilocal_report(n, I, c_inc)
    to_half = walks.exact_first_passage(walks.total_walk(n, w0, 2, c_inc, halved=True), w0 // 2, w0 // 4)
    to_one = math.fsum(
        walks.exact_expected_absorption(walks.poorest_walk(n, w0, k, c_inc)) for k in range(2, n + 1)
    )
    ok = rep.conditions_met and to_half > to_one
    acceptance_line("C5 semilocal desk scale", ok,
                    f"conditions_met={rep.conditions_met}, halving {to_half:.6g} > one-survivor chain {to_one:.6g}")
    assert ok


def test_c6_binomial_tails(acceptance_line):
    worst = 0.0
    for t, n in itertools.product((1, 2, 7, 40, 333, 2000), (2, 3, 7, 20)):
        cdf = np.cumsum(binomial_pmf_dp(t, n))
        step = 1 if t <= 333 else 37
        for s in sorted(set(range(0, t + 1, step)) | {t // n - 1, t // n, t // n + 1}):
            if 0 <= s <= t:
                worst = max(worst, abs(tail.binom_lower_tail(t, n, s) - cdf[s]))
    start = time.perf_counter()
    region = tail.anticb_region(100, 20)
    csv_text = region.to_csv()
    spots = (tail.anticb_check(5, 5), tail.anticb_check(2, 2))
    elapsed = time.perf_counter() - start
    median = [c for c in region.cells if c.t % c.n == 0]
    median_ok = all(c.median_piece_ok for c in median)
    spot_ok = (spots[0].prob == pytest.approx(0.32768, abs=1e-12) and not spots[0].holds
               and spots[1].prob == pytest.approx(0.25, abs=1e-12))
    rows = csv_text.count("\n") - 1
    ok = worst <= 1e-10 and rows == 1900 and spot_ok and median_ok and elapsed < 5.0
    acceptance_line("C6 binomial tails", ok,
                    f"oracle error {worst:.1e}, {rows} map rows ({len(region.failing)} cells below 1/3), "
                    f"spots {spots[0].prob:.5f}/{spots[1].prob:.2f}, median piece on {len(median)} cells, "
                    f"{elapsed:.2f}s")
    assert ok


@pytest.mark.parametrize("n, c_inc", [(4, 8), (4, 4), (3, 3)])
def test_c7_drift(acceptance_line, n, c_inc):
    t = 1000
    # start above t so no one can go bankrupt within the horizon
    est = estimate_drift(GameConfig.uniform(n, t + 1, c_inc), t, 100_000, 20240 + n + c_inc)
    expected = bounds.expected_drift(t, n, c_inc)
    ok = abs(est.mean - expected) <= 3 * est.stderr
    if expected == 0:
        ok = ok and est.ci_low < 0 < est.ci_high
    acceptance_line(f"C7 drift n={n} c_inc={c_inc}", ok,
                    f"mean {est.mean:.3f} vs {expected:g} (se {est.stderr:.3f})")
    assert ok


PSTAR_GRID = [
    (2, 3, 6, 12), (2, 3, 10, 20), (2, 5, 6, 12), (2, 5, 10, 10), (3, 3, 6, 12),
    (3, 3, 6, 20), (3, 5, 10, 20), (3, 2, 4, 8), (4, 3, 6, 12), (4, 4, 8, 16),
]


def test_c8_pstar(acceptance_line):
    worst, censored, bad = -math.inf, 0, 0
    for idx, (n, I, W1, W2) in enumerate(PSTAR_GRID):
        cfg = GameConfig.uniform(n, I, n, coupling="independent")
        est = estimate_pstar_event(cfg, W1, W2, 20_000, 500 + idx, 10**6)
        ub = bounds.pstar_upper(I, W1, W2, n)
        bad += est.mean > ub + 3 * est.stderr
        worst = max(worst, (est.mean - ub) / max(est.stderr, 1e-300))
        censored += est.censored
    ok = bad == 0
    acceptance_line("C8 P'* bound", ok,
                    f"{len(PSTAR_GRID) - bad}/{len(PSTAR_GRID)} cells under bound + 3se, "
                    f"closest approach {worst:.1f} se, censored {censored}")
    assert ok


def test_c9_recursive_bound(acceptance_line):
    two = verify_eff_rec(GameConfig(2, (3, 3), 2), 100_000, 1, 10**7)
    three = verify_eff_rec(GameConfig(3, (3, 3, 3), 3), 100_000, 1, 10**7)
    ok = (two.verdict and three.verdict and two.continuation_max.mean == 0.0
          and two.status == three.status == "pass")
    acceptance_line("C9 recursive stopping-time bound", ok,
                    f"n=2 lhs {two.lhs.mean:.3f} = {two.t_one_est.mean:.3f} + 0; "
                    f"n=3 lhs {three.lhs.mean:.3f} <= {three.t_one_est.mean:.3f} + {three.continuation_max.mean:.3f}")
    assert ok


COVERAGE_WALKS = [
    walks.WalkSpec(1, 0.5, 10, 3), walks.WalkSpec(1, 0.4, 8, 5), walks.WalkSpec(2, 1 / 3, 4, 2),
    walks.WalkSpec(2, 1 / 3, 12, 7), walks.WalkSpec(3, 0.25, 15, 4), walks.WalkSpec(4, 0.2, 20, 10),
    walks.WalkSpec(5, 1 / 6, 9, 1), walks.WalkSpec(1, 0.7, 6, 2), walks.WalkSpec(3, 0.2, 11, 8),
    walks.WalkSpec(2, 0.3, 7, 3),
]


def test_c10_reproducibility_and_coverage(acceptance_line, tmp_path, capsys):
    invocations = [
        ["simulate", "--players", "2", "--initial", "3", "--c-inc", "2", "--replicas", "20000", "--seed", "7"],
        ["simulate", "--weights", "4,4,4,4", "--c-inc", "8", "--rule", "semilocal", "--stop", "total-half",
         "--replicas", "2000", "--seed", "3"],
        ["exact", "first-passage", "--model", "total-halved", "--n", "4", "--w0", "72", "--c-inc", "8",
         "--from", "36", "--to", "18"],
        ["bounds", "semilocal", "--n", "4", "--initial", "30", "--c-inc", "8"],
        ["tail", "region", "--t-max", "100", "--n-max", "20"],
        ["verify", "eff-rec", "--players", "3", "--initial", "3", "--c-inc", "3", "--replicas", "5000", "--seed", "1"],
        ["verify", "pstar", "--replicas", "2000", "--seed", "5"],
    ]
    identical = 0
    for i, argv in enumerate(invocations):
        outs = []
        for rep in range(2):
            path = tmp_path / f"{i}_{rep}.out"
            main(argv + ["--out", str(path)])
            outs.append(path.read_bytes())
        identical += outs[0] == outs[1] and len(outs[0]) > 0
    capsys.readouterr()

    covered = 0
    for idx, spec in enumerate(COVERAGE_WALKS):
        hit = estimate_hit_probability(spec, 20_000, 900 + idx, 10**6)
        covered += hit.covers(walks.exact_hit_probability(spec))
        dur = estimate_walk_absorption(spec, 20_000, 950 + idx, 10**6)
        covered += dur.covers(walks.exact_expected_absorption(spec))
    cells = 2 * len(COVERAGE_WALKS)
    ok = identical == len(invocations) and covered >= math.ceil(0.95 * cells)
    acceptance_line("C10 reproducibility and coverage", ok,
                    f"{identical}/{len(invocations)} invocations byte-identical, 99% CI covered {covered}/{cells} cells")
    assert ok
