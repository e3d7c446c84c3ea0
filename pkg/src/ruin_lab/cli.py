"""Command-line front end.

Exit codes: 0 success, 1 a deterministic verification check failed,
2 usage or domain error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction

from . import bounds, montecarlo, tail, walks
from .game import ConfigurationError, GameConfig, StopCondition

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
SIM_HEADER = ["quantity", "mean", "stderr", "ci_low", "ci_high", "replicas", "censored", "seed"]


class UsageError(ValueError):
    pass


# --- argument value parsers -------------------------------------------------

def int_list(text: str) -> list[int]:
    """``"5,10,20"``, ``"2:6"`` (inclusive) or ``"4:40:2"``."""
    out: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if ":" in part:
            bits = [int(b) for b in part.split(":")]
            lo, hi = bits[0], bits[1]
            step = bits[2] if len(bits) > 2 else 1
            out.extend(range(lo, hi + 1, step))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty integer list {text!r}")
    return out


def prob(text: str) -> float:
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a probability: {text!r}") from exc


def scaled_list(text: str, n: int) -> list[int]:
    """Comma list of integers or multiples of n such as ``n`` or ``2n``."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if part.endswith("n"):
            out.append((int(part[:-1]) if part[:-1] else 1) * n)
        else:
            out.append(int(part))
    return sorted(set(out))


# argparse destinations whose flag spelling differs
_FLAG_FOR_DEST = {"frm": "from", "target_weight": "target", "initial_list": "initial"}


# --- experiment config ------------------------------------------------------

@dataclass
class ExperimentSpec:
    """A full invocation as data; ``to_argv`` reproduces it exactly."""

    command: str
    target: str | None = None
    params: dict = field(default_factory=dict)

    def to_argv(self) -> list[str]:
        argv = [self.command] + ([self.target] if self.target else [])
        for key, value in self.params.items():
            flag = "--" + key
            if isinstance(value, bool):
                if value:
                    argv.append(flag)
            elif value is None:
                continue
            elif isinstance(value, (list, tuple)):
                argv += [flag, ",".join(str(v) for v in value)]
            else:
                argv += [flag, str(value)]
        return argv

    def to_json(self) -> str:
        return json.dumps(
            {"command": self.command, "target": self.target, "params": self.params},
            indent=2,
        ) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        d = json.loads(text)
        return cls(d["command"], d.get("target"), dict(d.get("params", {})))

    @classmethod
    def from_namespace(cls, ns: argparse.Namespace) -> "ExperimentSpec":
        skip = {"command", "target", "config", "dump_config", "handler"}
        params = {
            _FLAG_FOR_DEST.get(k, k.replace("_", "-")): v
            for k, v in vars(ns).items()
            if k not in skip and v is not None
        }
        return cls(ns.command, getattr(ns, "target", None), params)


# --- output helpers ---------------------------------------------------------

def _emit(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False, default=_json_default) + "\n"


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "item"):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _finite(x: float) -> float | None:
    return x if math.isfinite(x) else None


# --- simulate ---------------------------------------------------------------

def _game_config(args) -> GameConfig:
    if args.weights is None and args.initial is None:
        raise UsageError("--weights or --initial is required")
    if args.weights is not None and args.initial is not None:
        raise UsageError("--weights and --initial are mutually exclusive")
    if args.weights is None and args.players is None:
        raise UsageError("--initial needs --players")
    weights = args.weights if args.weights is not None else [args.initial] * args.players
    if args.players is not None and len(weights) != args.players:
        raise UsageError(f"--weights has {len(weights)} entries but --players is {args.players}")
    return GameConfig(
        n=len(weights), initial_weights=tuple(weights), c_inc=args.c_inc,
        c_dec=args.c_dec, rule=args.rule, coupling=args.coupling, w0=args.w0,
        winner_selection=args.winner_selection,
    )


def _stop(text: str, cfg: GameConfig) -> tuple[StopCondition, str]:
    if text == "one-survivor":
        return StopCondition.one_survivor(), "steps_to_one_survivor"
    if text == "first-bankruptcy":
        return StopCondition.first_bankruptcy(), "steps_to_first_bankruptcy"
    if text == "total-half":
        if cfg.w0 % 2:
            raise UsageError("--stop total-half needs an even w0")
        return StopCondition.total_at_most(cfg.w0 // 2), "steps_to_total_half"
    if text.startswith("reach:"):
        w = int(text.split(":", 1)[1])
        return StopCondition.some_weight_reaches(w), f"steps_to_reach_{w}"
    if text == "max-steps":
        return StopCondition.max_steps_only(), "steps"
    raise UsageError(f"--stop: unknown stop condition {text!r}")


def cmd_simulate(args) -> int:
    cfg = _game_config(args)
    stop, quantity = _stop(args.stop, cfg)
    batch = montecarlo.run_replicas(cfg, stop, args.replicas, args.seed, args.max_steps)
    est = montecarlo.estimate_stop_time(
        cfg, stop, args.replicas, args.seed, args.max_steps, level=args.level, batch=batch
    )
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SIM_HEADER)
    w.writerow([quantity, repr(est.mean), repr(est.stderr), repr(est.ci_low), repr(est.ci_high),
                est.replicas, est.censored, est.seed])
    _emit(buf.getvalue(), args.out)
    if args.trace:
        tbuf = io.StringIO()
        tw = csv.writer(tbuf, lineterminator="\n")
        tw.writerow(["replica", "steps", "stopped", "final_alive", "final_total"])
        for rec in batch.trace_rows():
            tw.writerow([rec[0], rec[1], str(rec[2]).lower(), rec[3], rec[4]])
        _emit(tbuf.getvalue(), args.trace)
    return EXIT_OK


# --- exact ------------------------------------------------------------------

def _walk(args) -> tuple[walks.WalkSpec, str, dict]:
    if args.model:
        need = {"n": args.n, "w0": args.w0, "c_inc": args.c_inc}
        missing = [k for k, v in need.items() if v is None]
        if missing:
            raise UsageError("--model needs " + ", ".join("--" + m.replace("_", "-") for m in missing))
        if args.model == "poorest":
            spec = walks.poorest_walk(args.n, args.w0, args.k or 2, args.c_inc)
        else:
            spec = walks.total_walk(args.n, args.w0, args.k or 2, args.c_inc,
                                    halved=args.model == "total-halved")
        if args.start is not None:
            spec = spec.with_start(args.start)
        inputs = {"model": args.model, "n": args.n, "w0": args.w0, "k": args.k or 2, "c_inc": args.c_inc}
        return spec, args.model, inputs
    need = {"up_step": args.up_step, "up_prob": args.up_prob, "wall": args.wall}
    missing = [k for k, v in need.items() if v is None]
    if missing:
        raise UsageError("walk needs " + ", ".join("--" + m.replace("_", "-") for m in missing))
    spec = walks.WalkSpec(
        up_step=args.up_step, up_prob=args.up_prob, wall=args.wall,
        start=args.start if args.start is not None else 0,
        down_step=args.down_step, wall_kind=args.wall_kind,
    )
    return spec, "walk", {}


def cmd_exact(args) -> int:
    spec, model, inputs = _walk(args)
    inputs = {**inputs, "walk": spec.to_dict()}
    report = {"model": model, "target": args.target, "inputs": inputs}
    if args.target == "hit-prob":
        report["result"] = walks.exact_hit_probability(spec)
    elif args.target == "absorb-time":
        report["result"] = walks.exact_expected_absorption(spec)
    elif args.target == "e-vector":
        ev = walks.solve_e_recurrence(spec)
        report["result"] = ev.values.tolist()
        report["residual"] = ev.residual
    else:
        frm = args.frm if args.frm is not None else spec.wall
        if args.to is None:
            raise UsageError("first-passage needs --to")
        inputs.update({"from": frm, "to": args.to})
        report["result"] = walks.exact_first_passage(spec, frm, args.to)
        if model == "total-halved" and args.n > 2:
            st2 = bounds.st2_lower(2 * frm, 2 * args.to, args.n, args.w0, args.c_inc)
            report["st2_lower"] = _finite(st2)
            report["dominates_st2_lower"] = report["result"] >= st2
    _emit(_json(report), args.out)
    return EXIT_OK


# --- bounds -----------------------------------------------------------------

def cmd_bounds(args) -> int:
    t = args.target
    if t == "ruin":
        rep = bounds.bound_report("ruin", I=args.initial, W=args.target_weight, n=args.n)
    elif t == "pstar":
        rep = bounds.bound_report("pstar", I=args.initial, W1=args.w1, W2=args.w2, n=args.n)
    elif t == "drift":
        rep = bounds.bound_report("drift", t=args.t, n=args.n, c_inc=args.c_inc, c_dec=args.c_dec)
    elif t == "sp":
        rep = bounds.bound_report("sp", k=args.k, n=args.n, w0=args.w0)
    elif t == "st2":
        rep = bounds.bound_report("st2", x=args.x, y=args.y, n=args.n, w0=args.w0, c_inc=args.c_inc)
    else:
        rep = bounds.bound_report("semilocal", n=args.n, I=args.initial, c_inc=args.c_inc)
    _emit(_json(rep.to_dict()), args.out)
    return EXIT_OK


# --- tail -------------------------------------------------------------------

def cmd_tail(args) -> int:
    if args.target == "check":
        res = tail.anticb_check(args.t, args.n, args.alpha)
        _emit(_json({"inputs": {"t": args.t, "n": args.n, "alpha": args.alpha},
                     "result": res.to_dict()}), args.out)
    else:
        region = tail.anticb_region(args.t_max, args.n_max, args.alpha)
        _emit(region.to_csv(), args.out)
        sys.stderr.write(json.dumps(region.summary()) + "\n")
    return EXIT_OK


# --- verify -----------------------------------------------------------------

def verify_ruin_sandwich(ns: list[int], targets: list[int]) -> tuple[list[dict], bool]:
    cells, ok_all = [], True
    for n, W in itertools.product(ns, targets):
        probs = walks.hit_probabilities(walks.WalkSpec(n - 1, 1.0 / n, W, 1))
        for I in range(1, W):
            lo, hi = bounds.ruin_prob_bounds(I, W, n)
            p = float(probs[I])
            ok = lo - 1e-12 <= p <= hi + 1e-12
            ok_all &= ok
            cells.append({"n": n, "W": W, "I": I, "lower": lo, "exact": p, "upper": hi, "ok": ok})
    return cells, ok_all


def verify_descent_bound(ns: list[int], w0s: list[int], c_inc_spec: str) -> tuple[list[dict], bool]:
    cells, ok_all = [], True
    for n in ns:
        r = 1.0 + 1.0 / (n - 1)
        for c_inc, k, w0 in itertools.product(scaled_list(c_inc_spec, n), range(2, n + 1), w0s):
            if w0 < k:
                continue
            spec = walks.poorest_walk(n, w0, k, c_inc)
            ev = walks.solve_e_recurrence(spec)
            B = spec.wall
            e_desc = ev.values[::-1]  # e_{B-x} for x = 0..B-1
            literal = bool(all(e_desc[x] <= r**x * (1 + 1e-12) for x in range(B)))
            shifted = bool(all(e_desc[x] <= r ** (x + 1) * (1 + 1e-12) for x in range(B)))
            absorb = walks.exact_expected_absorption(spec)
            sp = bounds.sp_upper(k, n, w0)
            product_ok = absorb <= sp.upper * (1 + 1e-12)
            shifted_sum_ok = absorb <= sp.extras["shifted_induction_form"] * (1 + 1e-12)
            ok = literal and product_ok and ev.residual < 1e-9
            ok_all &= ok
            first_bad = next((x for x in range(B) if e_desc[x] > r**x * (1 + 1e-12)), None)
            cells.append({
                "n": n, "k": k, "w0": w0, "c_inc": c_inc, "wall": B,
                "residual": ev.residual, "absorption": absorb,
                "product_form": sp.upper, "shifted_sum_form": sp.extras["shifted_induction_form"],
                "inductive_bound_ok": literal, "first_violation_x": first_bad,
                "shifted_inductive_bound_ok": shifted,
                "product_form_ok": product_ok, "shifted_sum_ok": shifted_sum_ok, "ok": ok,
            })
    return cells, ok_all


def verify_two_survivor_bound(ns: list[int], w0s: list[int], c_inc_spec: str) -> tuple[list[dict], bool]:
    cells, ok_all = [], True
    for n in ns:
        for c_inc, w0 in itertools.product(scaled_list(c_inc_spec, n), w0s):
            spec = walks.total_walk(n, w0, 2, c_inc, halved=True)
            ev = walks.solve_e_recurrence(spec)
            B = spec.wall
            cum = [0.0]
            for v in ev.values:
                cum.append(cum[-1] + float(v))
            for frm in range(1, B + 1):
                for to in range(frm):
                    passage = cum[frm] - cum[to]
                    lb = bounds.st2_lower(2 * frm, 2 * to, n, w0, c_inc)
                    ok = passage >= lb * (1 - 1e-12)
                    ok_all &= ok
                    cells.append({"n": n, "w0": w0, "c_inc": c_inc, "from": frm, "to": to,
                                  "passage": passage, "st2_lower": _finite(lb), "ok": ok})
    return cells, ok_all


def verify_pstar(args) -> list[dict]:
    cells = []
    grid = itertools.product(args.n, args.initial_list, args.w1, args.w2)
    for idx, (n, I, W1, W2) in enumerate(grid):
        if not I <= W1 <= W2:
            continue
        cfg = GameConfig.uniform(n, I, args.c_inc if args.c_inc else n, coupling=args.coupling)
        est = montecarlo.estimate_pstar_event(cfg, W1, W2, args.replicas, args.seed + idx, args.horizon)
        ub = bounds.pstar_upper(I, W1, W2, n)
        cells.append({"n": n, "I": I, "W1": W1, "W2": W2, "estimate": est.to_dict(),
                      "pstar_upper": ub, "ok": est.mean <= ub + 3 * est.stderr})
    return cells


def cmd_verify(args) -> int:
    t = args.target
    # the output path is not an input; echoing it would make reports path-dependent
    inputs = {k: v for k, v in ExperimentSpec.from_namespace(args).params.items() if k != "out"}
    report: dict = {"command": "verify", "target": t, "inputs": inputs}
    deterministic_ok = True
    if t == "fact-a":
        cells, deterministic_ok = verify_ruin_sandwich(args.n, args.target_weight)
        report["cells"] = cells
    elif t == "lemma-a1":
        cells, deterministic_ok = verify_descent_bound(args.n, args.w0, args.c_inc)
        report["cells"] = cells
    elif t == "lemma-a2":
        cells, deterministic_ok = verify_two_survivor_bound(args.n, args.w0, args.c_inc)
        report["cells"] = cells
    elif t == "eff-rec":
        cfg = _game_config(args)
        rep = montecarlo.verify_eff_rec(cfg, args.replicas, args.seed, args.max_steps)
        report["result"] = rep.to_dict()
    else:
        report["cells"] = verify_pstar(args)
    report["deterministic_checks_passed"] = deterministic_ok
    _emit(_json(report), args.out)
    return EXIT_OK if deterministic_ok else EXIT_CHECK_FAILED


# --- parser -----------------------------------------------------------------

def _add_game_flags(p, replicas=100_000, max_steps=1_000_000):
    p.add_argument("--players", type=int)
    p.add_argument("--weights", type=int_list)
    p.add_argument("--initial", type=int)
    p.add_argument("--c-inc", type=int, required=True)
    p.add_argument("--c-dec", type=int, default=1)
    p.add_argument("--rule", choices=["local", "semilocal"], default="local")
    p.add_argument("--coupling", choices=["coupled", "independent"], default="coupled")
    p.add_argument("--winner-selection", choices=["slot", "alive"], default="slot")
    p.add_argument("--w0", type=int)
    p.add_argument("--replicas", type=int, default=replicas)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=max_steps)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ruin-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON experiment file; its flags are applied before the command line")
    parser.add_argument("--dump-config", help="write the resolved invocation as a JSON experiment file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo estimate of a stopping time")
    _add_game_flags(p)
    p.add_argument("--stop", default="one-survivor",
                   help="one-survivor | first-bankruptcy | total-half | reach:W | max-steps")
    p.add_argument("--level", type=float, default=montecarlo.DEFAULT_LEVEL)
    p.add_argument("--trace")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("exact", help="exact random-walk solves")
    p.add_argument("target", choices=["hit-prob", "absorb-time", "first-passage", "e-vector"])
    p.add_argument("--up-step", type=int)
    p.add_argument("--up-prob", type=prob)
    p.add_argument("--down-step", type=int, default=1)
    p.add_argument("--start", type=int)
    p.add_argument("--wall", type=int)
    p.add_argument("--wall-kind", choices=list(walks.WALL_KINDS), default="absorbing")
    p.add_argument("--model", choices=["poorest", "total", "total-halved"])
    p.add_argument("--n", type=int)
    p.add_argument("--w0", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--c-inc", type=int)
    p.add_argument("--from", dest="frm", type=int)
    p.add_argument("--to", type=int)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_exact)

    p = sub.add_parser("bounds", help="closed-form bounds")
    bsub = p.add_subparsers(dest="target", required=True)
    b = bsub.add_parser("ruin")
    b.add_argument("--initial", type=int, required=True)
    b.add_argument("--target", dest="target_weight", type=int, required=True)
    b.add_argument("--n", type=int, required=True)
    b = bsub.add_parser("pstar")
    b.add_argument("--initial", type=int, required=True)
    b.add_argument("--w1", type=int, required=True)
    b.add_argument("--w2", type=int, required=True)
    b.add_argument("--n", type=int, required=True)
    b = bsub.add_parser("drift")
    b.add_argument("--t", type=int, required=True)
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--c-inc", type=int, required=True)
    b.add_argument("--c-dec", type=int, default=1)
    b = bsub.add_parser("sp")
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--w0", type=int, required=True)
    b = bsub.add_parser("st2")
    b.add_argument("--x", type=int, required=True)
    b.add_argument("--y", type=int, required=True)
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--w0", type=int, required=True)
    b.add_argument("--c-inc", type=int, required=True)
    b = bsub.add_parser("semilocal")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--initial", type=int, required=True)
    b.add_argument("--c-inc", type=int, required=True)
    for b in bsub.choices.values():
        b.add_argument("--out")
    p.set_defaults(handler=cmd_bounds)

    p = sub.add_parser("tail", help="binomial lower tails")
    tsub = p.add_subparsers(dest="target", required=True)
    b = tsub.add_parser("check")
    b.add_argument("--t", type=int, required=True)
    b.add_argument("--n", type=int, required=True)
    b = tsub.add_parser("region")
    b.add_argument("--t-max", type=int, required=True)
    b.add_argument("--n-max", type=int, required=True)
    for b in tsub.choices.values():
        b.add_argument("--alpha", type=float, default=tail.DEFAULT_ALPHA)
        b.add_argument("--out")
    p.set_defaults(handler=cmd_tail)

    p = sub.add_parser("verify", help="grid verification of the bounds")
    vsub = p.add_subparsers(dest="target", required=True)
    b = vsub.add_parser("eff-rec")
    _add_game_flags(b, max_steps=10_000_000)
    b = vsub.add_parser("fact-a")
    b.add_argument("--n", type=int_list, default=int_list("2:6"))
    b.add_argument("--target", dest="target_weight", type=int_list, default=int_list("5,10,20"))
    b = vsub.add_parser("lemma-a1")
    b.add_argument("--n", type=int_list, default=int_list("3:6"))
    b.add_argument("--w0", type=int_list, default=int_list("12:60:12"))
    b.add_argument("--c-inc", default="2,n,2n", help="comma list; 'n' and '2n' scale with n")
    b = vsub.add_parser("lemma-a2")
    b.add_argument("--n", type=int_list, default=int_list("4,6"))
    b.add_argument("--w0", type=int_list, default=int_list("4:40:2"))
    b.add_argument("--c-inc", default="2n", help="comma list; 'n' and '2n' scale with n")
    b = vsub.add_parser("pstar")
    b.add_argument("--n", type=int_list, default=int_list("2,3"))
    b.add_argument("--initial", dest="initial_list", type=int_list, default=int_list("3,5"))
    b.add_argument("--w1", type=int_list, default=int_list("6,10"))
    b.add_argument("--w2", type=int_list, default=int_list("12,20"))
    b.add_argument("--c-inc", type=int, help="defaults to n (fair game)")
    b.add_argument("--coupling", choices=["coupled", "independent"], default="independent")
    b.add_argument("--replicas", type=int, default=20_000)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--horizon", type=int, default=1_000_000)
    for b in vsub.choices.values():
        b.add_argument("--out")
    p.set_defaults(handler=cmd_verify)
    return parser


def _expand_config(argv: list[str]) -> list[str]:
    """Replace ``--config PATH`` by the invocation stored in the file.

    Remaining command-line options are appended after the stored flags, so they
    override them; ``--dump-config`` stays in front of the command.
    """
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise UsageError("--config needs a path")
    with open(argv[i + 1]) as fh:
        spec = ExperimentSpec.from_json(fh.read())
    rest = argv[:i] + argv[i + 2:]
    front: list[str] = []
    if "--dump-config" in rest:
        j = rest.index("--dump-config")
        front, rest = rest[j:j + 2], rest[:j] + rest[j + 2:]
    return front + spec.to_argv() + rest


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv)
    except OSError as exc:
        sys.stderr.write(f"ruin-lab: cannot read config: {exc}\n")
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        sys.stderr.write(f"ruin-lab: bad config: {exc}\n")
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.dump_config:
            with open(args.dump_config, "w") as fh:
                fh.write(ExperimentSpec.from_namespace(args).to_json())
        return args.handler(args)
    except OSError as exc:
        sys.stderr.write(f"ruin-lab: I/O error: {exc}\n")
        return EXIT_IO
    except (UsageError, ConfigurationError, walks.WalkDomainError, walks.WalkSolveError,
            bounds.BoundDomainError, tail.GridSizeError, ValueError) as exc:
        sys.stderr.write(f"ruin-lab: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
