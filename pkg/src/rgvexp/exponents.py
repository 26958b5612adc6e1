"""Typical random coding and expurgated exponents of RGV codes.

Every functional here is a search over the polytope of joint distributions
``P_XX'`` whose two marginals equal the composition ``Q``. The search runs a
uniform grid over the free cells of ``P_XX'`` and then refines locally; the
inner minimization over ``P_{Y|XX'}`` lives in :mod:`rgvexp._inner`.

Rates, thresholds and returned exponents use ``problem.base`` (bits by
default). Internally everything is computed in nats.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from ._inner import InnerResult, InnerSolver
from ._optimize import JointPolytope, SearchResult, SetSearch
from ._validation import (
    InvalidParameterError,
    as_distribution,
    check_marginals,
    check_nonnegative,
    log_unit,
)
from .channel import Channel, DecodingMetric
from .distance import DistanceSpec
from .measures import mutual_information


@dataclass(frozen=True)
class ExponentProblem:
    """Channel, composition, metric, rate and distance for one exponent evaluation.

    ``rate`` is in units of ``log base``. ``slack`` is the construction slack
    used by :func:`check_keycond`.
    """

    channel: Channel
    composition: tuple
    metric: DecodingMetric = field(default_factory=DecodingMetric.ml)
    rate: float = 0.0
    distance: DistanceSpec = field(default_factory=DistanceSpec.unconstrained)
    grid_resolution: int = 64
    refine_iters: int = 200
    base: object = 2
    slack: float = 0.0
    max_grid_points: int = 20000

    def __post_init__(self):
        q = as_distribution(self.composition, "composition")
        if q.size != self.channel.input_alphabet_size:
            raise InvalidParameterError(
                f"composition has {q.size} symbols, channel has "
                f"{self.channel.input_alphabet_size} inputs"
            )
        object.__setattr__(self, "composition", tuple(float(v) for v in q))
        object.__setattr__(self, "rate", check_nonnegative(self.rate, "rate"))
        object.__setattr__(self, "slack", check_nonnegative(self.slack, "slack"))
        if int(self.grid_resolution) < 8:
            raise InvalidParameterError("grid_resolution must be at least 8")
        if int(self.refine_iters) < 0:
            raise InvalidParameterError("refine_iters must be nonnegative")
        log_unit(self.base)

    @property
    def q(self) -> np.ndarray:
        return np.array(self.composition)

    @property
    def unit(self) -> float:
        return log_unit(self.base)

    @property
    def rate_nats(self) -> float:
        return self.rate * self.unit

    def with_rate(self, rate: float) -> "ExponentProblem":
        return replace(self, rate=rate)

    def with_distance(self, distance: DistanceSpec) -> "ExponentProblem":
        return replace(self, distance=distance)


@dataclass
class ExponentValue:
    """Result of an exponent search.

    ``value`` is clipped at zero and is ``inf`` when the feasible set is empty;
    the unclipped optimum is kept in ``diagnostics["raw"]``.
    """

    value: float
    argmin_joint: np.ndarray | None
    argmin_cond: np.ndarray | None
    diagnostics: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.argmin_joint is not None

    def __float__(self):
        return float(self.value)


class Engine:
    """Cached Gamma / Lambda evaluations for one channel, composition and metric."""

    def __init__(self, channel: Channel, q, metric: DecodingMetric):
        self.channel = channel
        self.q = np.asarray(q, dtype=float)
        self.metric = metric
        self.inner = InnerSolver(channel.matrix, self.q, metric.log_table(channel), metric.skew)
        self.poly = JointPolytope(self.q)
        self._cache: dict = {}

    def _key(self, P, R, which):
        return (which, np.round(P, 15).tobytes(), round(R, 15))

    def inner_result(self, P, R, which="gamma") -> InnerResult:
        key = self._key(P, R, which)
        hit = self._cache.get(key)
        if hit is None:
            hit = self.inner.solve(P, R, which)
            if len(self._cache) > 200_000:
                self._cache.clear()
            self._cache[key] = hit
        return hit

    def gamma(self, P, R) -> float:
        return self.inner_result(P, R, "gamma").value

    def lam(self, P, R) -> float:
        return self.inner_result(P, R, "lambda").value


@lru_cache(maxsize=32)
def _engine(channel: Channel, composition: tuple, metric: DecodingMetric) -> Engine:
    return Engine(channel, composition, metric)


def engine_for(problem: ExponentProblem) -> Engine:
    return _engine(problem.channel, problem.composition, problem.metric)


def _mi(P) -> float:
    return mutual_information(P, base="e")


def distance_constraint(problem: ExponentProblem, strict_side=True):
    """Closed constraint ``Delta - d(P) <= 0`` or ``None`` when inactive."""
    dist = problem.distance
    if not dist.is_active:
        return None
    unit = problem.unit
    if dist.kind in ("neg-mutual-information", "bhattacharyya"):
        # measured in nats internally so that the tolerance is unit-free
        return lambda P: dist.threshold * unit - dist.value(P, "e")
    return lambda P: dist.threshold - dist.value(P)


def _search(problem, objective, constraints, sense="min") -> SearchResult:
    cons = [c for c in constraints if c is not None]
    eng = engine_for(problem)
    s = SetSearch(eng.poly, objective, cons, sense=sense,
                  resolution=problem.grid_resolution, max_points=problem.max_grid_points,
                  refine_iters=problem.refine_iters)
    return s.run()


def _package(problem, res: SearchResult, kind: str, which="gamma") -> ExponentValue:
    unit = problem.unit
    diag = dict(res.meta)
    diag.update(kind=kind, rate=problem.rate, base=problem.base)
    if not res.feasible:
        diag["raw"] = math.inf
        diag["argmin_I"] = math.nan
        return ExponentValue(math.inf, None, None, diag)
    P = res.joint
    cond = engine_for(problem).inner_result(P, problem.rate_nats, which).cond
    raw = res.value / unit
    diag["raw"] = raw
    diag["argmin_I"] = _mi(P) / unit
    value = max(raw, 0.0) if math.isfinite(raw) else raw
    return ExponentValue(value, P, cond, diag)


# ---- objectives ------------------------------------------------------------

def _objectives(problem):
    eng = engine_for(problem)
    R = problem.rate_nats
    f = lambda P: eng.gamma(P, R) + _mi(P) - R
    f0 = lambda P: eng.gamma(P, R) - max(2 * R - _mi(P), 0.0) + R
    return eng, R, f, f0


def _warn_keycond(problem):
    kc = check_keycond(problem, problem.slack)
    if not kc.holds:
        warnings.warn(
            f"rate {problem.rate} violates the construction feasibility condition "
            f"(margin {kc.margin:.3g}); the exponent is still evaluated",
            RuntimeWarning,
            stacklevel=3,
        )


def trc_rgv(problem: ExponentProblem, check=True) -> ExponentValue:
    """Typical random coding exponent of the RGV ensemble.

    Minimizes ``Gamma(P, R) + I(P) - R`` over ``I(P) <= 2R`` and ``d(P) >= Delta``.
    """
    if check and problem.distance.is_active:
        _warn_keycond(problem)
    eng, R, f, _ = _objectives(problem)
    res = _search(problem, f, [lambda P: _mi(P) - 2 * R, distance_constraint(problem)])
    return _package(problem, res, "trc_rgv")


def trc_cc(problem: ExponentProblem) -> ExponentValue:
    """TRC of plain constant-composition codes (no distance constraint)."""
    return trc_rgv(problem.with_distance(DistanceSpec.unconstrained()), check=False)


def expurgated(problem: ExponentProblem) -> ExponentValue:
    """Expurgated exponent: ``Gamma + I - R`` over ``I(P) <= R``."""
    eng, R, f, _ = _objectives(problem)
    res = _search(problem, f, [lambda P: _mi(P) - R])
    return _package(problem, res, "expurgated")


def expurgated_rgv(problem: ExponentProblem) -> ExponentValue:
    eng, R, f, _ = _objectives(problem)
    res = _search(problem, f, [lambda P: _mi(P) - R, distance_constraint(problem)])
    return _package(problem, res, "expurgated_rgv")


def e0_min(problem: ExponentProblem) -> ExponentValue:
    """Smallest level below which the lower-tail exponent is infinite."""
    eng, R, _, f0 = _objectives(problem)
    res = _search(problem, f0, [distance_constraint(problem)])
    return _package(problem, res, "e0_min")


def evaluate_objective(problem: ExponentProblem, kind: str, joint, cond) -> float:
    """Objective of ``kind`` at a given ``(P_XX', P_{Y|XX'})`` in base units (unclipped)."""
    eng = engine_for(problem)
    R = problem.rate_nats
    P = np.asarray(joint, dtype=float)
    g = eng.inner.value_at(P, cond, R, "gamma")
    if kind == "e0_min":
        val = g - max(2 * R - _mi(P), 0.0) + R
    elif kind in ("trc_rgv", "trc_cc", "expurgated", "expurgated_rgv"):
        val = g + _mi(P) - R
    else:
        raise InvalidParameterError(f"unknown exponent kind {kind!r}")
    return val / problem.unit


# ---- pointwise functionals ------------------------------------------------

def _py(problem, output_marginal):
    py = as_distribution(output_marginal, "output_marginal")
    if py.size != problem.channel.output_alphabet_size:
        raise InvalidParameterError("output marginal has the wrong alphabet size")
    return py


def alpha(rate, output_marginal, problem: ExponentProblem) -> float:
    """``max {g(P_X'Y) - I(X';Y) : P_X' = Q, I <= R} + R`` in base units.

    For an infinite skew the value grows without bound; the rescaled limit
    ``alpha / skew``, i.e. the largest un-skewed metric over couplings with
    ``I <= R``, is returned instead.
    """
    R = check_nonnegative(rate, "rate") * problem.unit
    py = _py(problem, output_marginal)
    val = engine_for(problem).inner.coupler.alpha(py, R)
    if isinstance(val, tuple):
        return val[0] / problem.unit
    return val / problem.unit


def gamma(joint, rate, problem: ExponentProblem) -> float:
    """``Gamma(P_XX', R)`` in base units."""
    P = np.asarray(joint, dtype=float)
    check_marginals(P, problem.q)
    R = check_nonnegative(rate, "rate") * problem.unit
    return engine_for(problem).gamma(P, R) / problem.unit


def gamma_detail(joint, rate, problem: ExponentProblem) -> InnerResult:
    P = np.asarray(joint, dtype=float)
    check_marginals(P, problem.q)
    R = check_nonnegative(rate, "rate") * problem.unit
    return engine_for(problem).inner_result(P, R, "gamma")


@dataclass
class KeycondResult:
    holds: bool
    margin: float
    bound: float
    argmin_joint: np.ndarray | None = None

    def __bool__(self):
        return self.holds


def check_keycond(problem: ExponentProblem, slack: float | None = None) -> KeycondResult:
    """Compare the rate with ``min {I(P) : d(P) <= Delta} - 2 slack``.

    An empty sublevel set makes the condition hold with infinite margin.
    """
    delta = problem.slack if slack is None else check_nonnegative(slack, "slack")
    dist = problem.distance
    if not dist.is_active:
        return KeycondResult(True, math.inf, math.inf)
    unit = problem.unit
    dcon = distance_constraint(problem)
    res = _search(problem, lambda P: _mi(P), [lambda P: -dcon(P)])
    if not res.feasible:
        return KeycondResult(True, math.inf, math.inf)
    bound = res.value / unit - 2 * delta
    margin = bound - problem.rate
    return KeycondResult(margin >= -1e-9, margin, bound, res.joint)


# ---- random coding exponent (background, not RGV-specific) ------------------

def random_coding(problem: ExponentProblem) -> ExponentValue:
    """Constant-composition random coding exponent.

    ``min_V D(V || W | Q) + [I(Q, V) - R]_+`` over channels ``V`` supported
    where ``W`` is positive.
    """
    W = problem.channel.matrix
    q = problem.q
    R = problem.rate_nats
    k, l = W.shape
    supp = W > 0
    idx = [(x, y) for x in range(k) for y in np.flatnonzero(supp[x])[:-1]]
    last = [(x, np.flatnonzero(supp[x])[-1]) for x in range(k)]
    A = np.zeros((k, len(idx)))
    for j, (x, _) in enumerate(idx):
        A[x, j] = 1.0

    def cond(z):
        V = np.zeros((k, l))
        z = np.clip(z, 0.0, 1.0)
        for j, (x, y) in enumerate(idx):
            V[x, y] = z[j]
        rest = 1.0 - A @ z
        for x, y in last:
            V[x, y] = max(rest[x], 0.0)
        return V / V.sum(axis=1, keepdims=True)

    def obj(z):
        V = cond(z)
        pos = V > 0
        D = float(np.sum((q[:, None] * V)[pos] * np.log(V[pos] / W[pos])))
        I = _mi(q[:, None] * V)
        return D + max(I - R, 0.0)

    starts = [np.array([W[x, y] for x, y in idx])]
    rng = np.random.default_rng(7)
    for _ in range(8):
        V = rng.dirichlet(np.ones(l), size=k) * supp
        V /= V.sum(axis=1, keepdims=True)
        starts.append(np.array([V[x, y] for x, y in idx]))
    best, best_z = math.inf, starts[0]
    if idx:
        for z0 in starts:
            r = minimize(obj, z0, method="SLSQP", bounds=[(0, 1)] * len(idx),
                         constraints=[{"type": "ineq", "fun": lambda z: 1.0 - A @ z}],
                         options={"ftol": 1e-14, "maxiter": 500})
            for z in (z0, r.x):
                v = obj(z)
                if v < best - 1e-15:
                    best, best_z = v, np.clip(z, 0, 1)
    else:
        best = obj(np.zeros(0))
        best_z = np.zeros(0)
    V = cond(best_z)
    raw = best / problem.unit
    return ExponentValue(max(raw, 0.0), np.diag(q), V,
                         {"kind": "random_coding", "raw": raw, "rate": problem.rate,
                          "argmin_I": _mi(q[:, None] * V) / problem.unit})
