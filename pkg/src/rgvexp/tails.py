"""Lower- and upper-tail exponents of the RGV error exponent distribution.

The lower tail (the code's exponent falling below ``E0``) decays
exponentially; the upper tail (exceeding ``E0``) decays double-exponentially.
Each bound is an extremum of a simple function of ``I(P)`` over a set of
joint distributions cut out by ``Gamma`` or ``Lambda``.

Empty-set conventions: a minimum over an empty set is ``+inf``; a maximum of
a double-exponential rate over an empty set is reported as ``0`` with the
``empty`` flag raised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_nonnegative
from .exponents import (
    ExponentProblem,
    ExponentValue,
    _mi,
    _package,
    _search,
    distance_constraint,
    engine_for,
    expurgated_rgv,
    _py,
)


@dataclass(frozen=True)
class TailProblem:
    """An exponent problem together with the level ``e0`` (in ``base.base`` units)."""

    base: ExponentProblem
    e0: float
    slack_eps: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "e0", check_nonnegative(self.e0, "e0"))
        object.__setattr__(self, "slack_eps", check_nonnegative(self.slack_eps, "slack_eps"))

    def with_e0(self, e0: float) -> "TailProblem":
        return TailProblem(self.base, e0, self.slack_eps)


@dataclass
class TailValue:
    """A tail exponent with its bookkeeping flags."""

    value: float
    empty: bool = False
    out_of_domain: bool = False
    argopt: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)

    @property
    def flags(self) -> list[str]:
        out = []
        if self.empty:
            out.append("empty")
        if self.out_of_domain:
            out.append("out-of-domain")
        return out


def _units(tp: TailProblem):
    p = tp.base
    return p, p.rate_nats, tp.e0 * p.unit, p.unit


# ---- pointwise functionals -------------------------------------------------

def lambda_fn(joint, rate, base: ExponentProblem) -> float:
    """``Lambda(P_XX', R)`` in base units."""
    from ._validation import check_marginals

    P = np.asarray(joint, dtype=float)
    check_marginals(P, base.q)
    R = check_nonnegative(rate, "rate") * base.unit
    return engine_for(base).lam(P, R) / base.unit


def beta_fn(rate, output_marginal, base: ExponentProblem) -> float:
    """``max g(P_X~Y) + [R - I]_+`` over couplings with ``P_X~ = Q``, in base units.

    For an infinite skew the rescaled limit (largest un-skewed metric) is
    returned, as in :func:`rgvexp.exponents.alpha`.
    """
    R = check_nonnegative(rate, "rate") * base.unit
    py = _py(base, output_marginal)
    val = engine_for(base).inner.coupler.beta(py, R)
    if isinstance(val, tuple):
        return val[0] / base.unit
    return val / base.unit


# ---- lower tail ------------------------------------------------------------

def _lower(tp: TailProblem, which: str) -> TailValue:
    p, R, E0, unit = _units(tp)
    eng = engine_for(p)
    fn = eng.gamma if which == "gamma" else eng.lam

    def member(P):
        return fn(P, R) + R - E0 - max(2 * R - _mi(P), 0.0)

    res = _search(p, lambda P: max(_mi(P) - 2 * R, 0.0), [distance_constraint(p), member])
    if not res.feasible:
        return TailValue(math.inf, empty=True, meta=res.meta)
    return TailValue(res.value / unit, argopt=res.joint, meta=res.meta)


def lower_tail_upper(problem: TailProblem) -> TailValue:
    """Minimum of ``[I - 2R]_+`` over ``{d >= Delta, [2R - I]_+ >= Gamma + R - E0}``."""
    return _lower(problem, "gamma")


def lower_tail_lower(problem: TailProblem) -> TailValue:
    """As :func:`lower_tail_upper` with ``Lambda`` in place of ``Gamma``."""
    return _lower(problem, "lambda")


# ---- upper tail ------------------------------------------------------------

def upper_tail_upper(problem: TailProblem) -> TailValue:
    """Max of ``min{2R - I, E0 - Lambda - I + R, R}`` over the set ``V(R, E0)``."""
    p, R, E0, unit = _units(problem)
    eng = engine_for(p)
    cons = [
        distance_constraint(p),
        lambda P: _mi(P) - 2 * R,
        lambda P: eng.lam(P, R) + _mi(P) - R - E0,
    ]

    def obj(P):
        I = _mi(P)
        return min(2 * R - I, E0 - eng.lam(P, R) - I + R, R)

    res = _search(p, obj, cons, sense="max")
    if not res.feasible:
        return TailValue(0.0, empty=True, meta=res.meta)
    return TailValue(max(res.value, 0.0) / unit, argopt=res.joint, meta=res.meta)


def upper_tail_lower(problem: TailProblem, check_domain=True) -> TailValue:
    """Max of ``2R - I`` over the set ``U(R, E0)``.

    The bound only holds below the expurgated exponent of the ensemble; at or
    above it the value is still computed but ``out_of_domain`` is set.
    """
    p, R, E0, unit = _units(problem)
    eng = engine_for(p)
    cons = [
        distance_constraint(p),
        lambda P: _mi(P) - 2 * R,
        lambda P: eng.gamma(P, R) + _mi(P) - R - E0,
    ]
    res = _search(p, lambda P: 2 * R - _mi(P), cons, sense="max")
    ood = False
    if check_domain:
        ex = expurgated_rgv(p)
        ood = not problem.e0 < ex.value
    if not res.feasible:
        return TailValue(0.0, empty=True, out_of_domain=ood, meta=res.meta)
    return TailValue(max(res.value, 0.0) / unit, out_of_domain=ood, argopt=res.joint,
                     meta=res.meta)


def e_tilde(problem: ExponentProblem) -> ExponentValue:
    """Minimum of ``Lambda + I - R`` over ``{I <= 2R, d >= Delta}``."""
    eng = engine_for(problem)
    R = problem.rate_nats
    res = _search(problem, lambda P: eng.lam(P, R) + _mi(P) - R,
                  [lambda P: _mi(P) - 2 * R, distance_constraint(problem)])
    return _package(problem, res, "e_tilde", which="lambda")


# ---- technical conditions ---------------------------------------------------

def _extreme_I(p: ExponentProblem, constraints, sense):
    res = _search(p, _mi, [c for c in constraints if c is not None], sense=sense)
    return res.value / p.unit, res.feasible


def _cond(lhs, rhs, relation="<=", vacuous=False) -> dict:
    if relation == "<=":
        margin = rhs - lhs
    else:
        margin = lhs - rhs
    if math.isnan(margin):
        margin = math.inf if vacuous else -math.inf
    return {"lhs": lhs, "rhs": rhs, "relation": relation,
            "holds": bool(margin >= -1e-9), "margin": margin, "vacuous": vacuous}


def tail_condition_report(problem: TailProblem) -> dict:
    """Evaluate each technical condition behind the tail bounds.

    The auxiliary set ``D`` is taken as ``V(R, E0)``, the ``sigma -> 0``
    limit of its smoothed version. Sets ``A2``/``A3`` use ``problem.slack_eps``.
    """
    p, R, E0, unit = _units(problem)
    eng = engine_for(p)
    delta = p.slack
    eps = problem.slack_eps * unit
    dcon = distance_constraint(p)
    active = dcon is not None
    inv = (lambda P: -dcon(P)) if active else None

    # sublevel set {d <= Delta}: empty when the constraint is switched off
    if active:
        min_close, ok = _extreme_I(p, [inv], "min")
        min_close = min_close if ok else math.inf
        max_far, ok2 = _extreme_I(p, [dcon], "max")
        max_far = max_far if ok2 else -math.inf
    else:
        min_close, max_far = math.inf, _extreme_I(p, [], "max")[0]
    vac = not math.isfinite(min_close)

    v_cons = [dcon, lambda P: _mi(P) - 2 * R, lambda P: eng.lam(P, R) + _mi(P) - R - E0]
    min_D, okD = _extreme_I(p, v_cons, "min")
    min_D = min_D if okD else math.inf

    a2 = [dcon, lambda P: _mi(P) - 2 * R,
          lambda P: eng.gamma(P, max(R - eps, 0.0)) + _mi(P) - R - E0 - eps]
    min_A2, okA2 = _extreme_I(p, a2, "min")
    min_A2 = min_A2 if okA2 else math.inf
    a3 = [dcon, lambda P: _mi(P) - 2 * R,
          lambda P: -(eng.gamma(P, max(R - eps, 0.0)) + _mi(P) - R - E0 - eps)]
    max_A3, okA3 = _extreme_I(p, a3, "max")
    max_A3 = max_A3 if okA3 else -math.inf

    rate = p.rate
    key_rhs = min_close - 2 * delta
    report = {
        "keycond": _cond(rate, key_rhs, vacuous=vac),
        "condkeyb": {
            "lower": _cond(min_D - 2 * delta, rate, vacuous=not okD),
            "upper": _cond(rate, key_rhs, vacuous=vac),
        },
        "condkeyc": _cond(rate, min(min_D - min_close, min_close) - 2 * delta
                          if not vac else min_D - 2 * delta, vacuous=vac),
        "ek1cond": _cond(min_close, max_far, relation=">=", vacuous=vac),
        "condkeymu": _cond(rate, key_rhs, vacuous=vac),
        "cond0": _cond(max_A3, min_A2, vacuous=not (okA2 and okA3)),
        "ek1condmod": _cond(min_close, max_far, relation=">=", vacuous=vac),
    }
    b = report["condkeyb"]
    b["holds"] = b["lower"]["holds"] and b["upper"]["holds"]
    return report


def condition_flags(report: dict) -> str:
    """Compact ``name=pass|fail`` summary used in CSV output."""
    parts = []
    for name in ("keycond", "condkeyb", "condkeyc", "ek1cond", "cond0"):
        entry = report[name]
        parts.append(f"{name}={'pass' if entry['holds'] else 'fail'}")
    return ";".join(parts)
