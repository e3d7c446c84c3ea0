"""Closed-form bound calculators.

Large exponentials are carried in log space: any term whose natural log
exceeds ``LOG_OVERFLOW`` is reported as ``inf`` with the log kept alongside.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

LOG_OVERFLOW = 700.0


class BoundDomainError(ValueError):
    pass


@dataclass
class BoundReport:
    name: str
    inputs: dict
    lower: float | None = None
    upper: float | None = None
    conditions_met: bool = True
    notes: list[str] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lower is not None and self.upper is not None and self.lower > self.upper:
            raise ValueError(f"{self.name}: lower {self.lower} exceeds upper {self.upper}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "inputs": dict(self.inputs),
            "lower": _jsonable(self.lower),
            "upper": _jsonable(self.upper),
            "conditions_met": self.conditions_met,
            "notes": list(self.notes),
            "extras": {k: _jsonable(v) for k, v in self.extras.items()},
        }


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def _exp(log_value: float) -> float:
    return math.exp(log_value) if log_value <= LOG_OVERFLOW else math.inf


def ruin_prob_bounds(I: int, W: int, n: int) -> tuple[float, float]:
    """Sandwich for the chance that a player at weight I ever reaches W."""
    if I > W:
        raise BoundDomainError(f"I={I} exceeds W={W}: the player is already rich")
    if I < 1 or n < 2:
        raise BoundDomainError("need I >= 1 and n >= 2")
    return I / (W + n), I / W


def pstar_upper(I: int, W1: int, W2: int, n: int) -> float:
    """Upper bound on Pr{some player reaches W1 but fewer than two reach W2}."""
    if W1 > W2:
        raise BoundDomainError(f"W1={W1} exceeds W2={W2}")
    if I > W1:
        raise BoundDomainError(f"I={I} exceeds W1={W1}")
    miss2 = 1.0 - I / (W2 + n)
    return miss2**n + (n * I / W2) * miss2 ** (n - 1) - (1.0 - I / W1) ** n


def expected_drift(t: int, n: int, c_inc: int, c_dec: int = 1) -> float:
    if t < 0:
        raise BoundDomainError("t must be >= 0")
    return t * (c_inc / n - c_dec)


def sp_upper(k: int, n: int, w0: int) -> BoundReport:
    """Upper bounds on the expected time to the next bankruptcy with k survivors.

    ``upper`` is the product form ``(n-1) (1 + 1/(n-1))**(w0/k)``.  The extras
    carry the exponential forms ``n e^{w0/(nk)}`` and ``(n-1) e^{w0/(k(n-1))}``
    and the sum ``n ((1 + 1/(n-1))**B - 1)`` obtained when each descent time
    e_{B-x} is bounded by ``(1 + 1/(n-1))**(x+1)``, with ``B = floor(w0/k)``.
    """
    if not 1 <= k <= n:
        raise BoundDomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    if n < 2:
        raise BoundDomainError("need n >= 2")
    if w0 < k:
        raise BoundDomainError(f"need w0 >= k, got w0={w0}")
    r_log = math.log1p(1.0 / (n - 1))
    span = w0 / k
    B = w0 // k
    log_product = math.log(n - 1) + span * r_log
    log_stated = math.log(n) + w0 / (n * k)
    log_natural = math.log(n - 1) + w0 / (k * (n - 1))
    log_shifted = math.log(n) + B * r_log + math.log(-math.expm1(-B * r_log))
    product, stated = _exp(log_product), _exp(log_stated)
    return BoundReport(
        name="sp_upper",
        inputs={"k": k, "n": n, "w0": w0},
        upper=product,
        extras={
            "product_form": product,
            "log_product_form": log_product,
            "stated_exponential_form": stated,
            "log_stated_exponential_form": log_stated,
            "natural_exponential_form": _exp(log_natural),
            "shifted_induction_form": _exp(log_shifted),
            "larger": "product_form" if log_product >= log_stated else "stated_exponential_form",
        },
    )


def st2_lower(x: int, y: int, n: int, w0: int, c_inc: int) -> float:
    """Lower bound on the expected time for two survivors' total to fall from x to y."""
    if n <= 2:
        raise BoundDomainError(f"n={n}: the bound divides by n - 2")
    if y > x or x > w0:
        raise BoundDomainError(f"need y <= x <= w0, got x={x}, y={y}, w0={w0}")
    r_log = math.log1p(2.0 / (n - 2))
    hi = (w0 - y) / 2 * r_log
    lo = (w0 - x) / 2 * r_log
    if hi == lo:
        return 0.0
    # (n-2)/2 * (r^hi - r^lo) * (1 - e^-2), evaluated as r^hi * (1 - r^(lo-hi))
    log_val = math.log((n - 2) / 2) + hi + math.log(-math.expm1(lo - hi)) + math.log(-math.expm1(-2.0))
    return _exp(log_val)


def st2_report(x: int, y: int, n: int, w0: int, c_inc: int) -> BoundReport:
    value = st2_lower(x, y, n, w0, c_inc)
    ok = c_inc / 2 >= n
    notes = [] if ok else [f"c_inc/2 = {c_inc / 2} < n = {n}: bound not guaranteed"]
    return BoundReport(
        name="st2_lower",
        inputs={"x": x, "y": y, "n": n, "w0": w0, "c_inc": c_inc},
        lower=value, conditions_met=ok, notes=notes,
    )


def semilocal_report(n: int, I: int, c_inc: int) -> BoundReport:
    """Compare the S-to-one upper chain against the S-to-half lower chain at W0 = nI.

    The printed S-to-one chain ends in ``2n e^{W0/2}``; the reading
    ``2n e^{W0/(2n)}`` that matches its leading term is evaluated too, and a
    verdict is given for each.
    """
    if n < 3:
        raise BoundDomainError(f"n={n}: the S-to-half bound divides by n - 2")
    w0 = n * I
    threshold = math.log(6) * n * (n - 2)
    cond_I = I >= threshold
    cond_c = c_inc >= 2 * n
    notes = []
    if not cond_I:
        notes.append(f"I={I} < ln6*n*(n-2) = {threshold:.6g}")
    if not cond_c:
        notes.append(f"c_inc={c_inc} < 2n = {2 * n}")

    log_terms = [math.log(n) + w0 / (n * k) for k in range(2, n + 1)]
    top = max(log_terms)
    log_sum = top + math.log(math.fsum(math.exp(t - top) for t in log_terms))
    log_two_terms = _logaddexp(math.log(n) + w0 / (2 * n),
                               math.log(n * (n - 2)) + w0 / (3 * n) if n > 2 else -math.inf)
    log_one_printed = math.log(2 * n) + w0 / 2
    log_one_alt = math.log(2 * n) + w0 / (2 * n)

    r_log = math.log1p(2.0 / (n - 2))
    log_st2_first = (math.log((n - 2) / 2) + w0 / 2 * r_log
                     + math.log(-math.expm1(-w0 / 2 * r_log)) + math.log(-math.expm1(-2.0)))
    log_st2_mid = math.log((n - 2) / 2) + w0 / (2 * (n - 2)) + math.log(-math.expm1(-2.0))
    log_half = math.log((n - 2) / 3) + w0 / (2 * (n - 2))

    one_upper, half_lower = _exp(log_one_printed), _exp(log_half)
    extras = {
        "w0": w0,
        "threshold_I": threshold,
        "s_to_one_sum_of_sp": _exp(log_sum),
        "s_to_one_two_terms": _exp(log_two_terms),
        "s_to_one_upper": one_upper,
        "s_to_one_upper_alt": _exp(log_one_alt),
        "s_to_half_st2_form": _exp(log_st2_first),
        "s_to_half_exp_form": _exp(log_st2_mid),
        "s_to_half_lower": half_lower,
        "log_s_to_one_upper": log_one_printed,
        "log_s_to_one_upper_alt": log_one_alt,
        "log_s_to_half_lower": log_half,
        "verdict_half_exceeds_one": log_half > log_one_printed,
        "verdict_half_exceeds_one_alt": log_half > log_one_alt,
    }
    return BoundReport(
        name="semilocal",
        inputs={"n": n, "I": I, "c_inc": c_inc},
        lower=half_lower, upper=None,
        conditions_met=cond_I and cond_c, notes=notes, extras=extras,
    )


def _logaddexp(a: float, b: float) -> float:
    if b == -math.inf:
        return a
    hi, lo = max(a, b), min(a, b)
    return hi + math.log1p(math.exp(lo - hi))


def bound_report(kind: str, **params) -> BoundReport:
    """Evaluate one bound family and wrap it as a report."""
    if kind == "ruin":
        lo, hi = ruin_prob_bounds(params["I"], params["W"], params["n"])
        return BoundReport("ruin_prob_bounds", params, lower=lo, upper=hi)
    if kind == "pstar":
        return BoundReport("pstar_upper", params, upper=pstar_upper(**params))
    if kind == "drift":
        v = expected_drift(**params)
        return BoundReport("expected_drift", params, lower=v, upper=v)
    if kind == "sp":
        return sp_upper(**params)
    if kind == "st2":
        return st2_report(**params)
    if kind == "semilocal":
        return semilocal_report(**params)
    raise BoundDomainError(f"unknown bound {kind!r}")
