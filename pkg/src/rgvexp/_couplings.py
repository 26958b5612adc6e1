"""Maximization of the decoding metric over couplings with fixed marginals.

Given the input composition ``q`` (rows, the competing codeword symbol) and an
output marginal ``py`` (columns), the exponent formulas need

* ``alpha``: max of ``g - I + R`` over couplings with ``I <= R``;
* ``beta``:  max of ``g + [R - I]_+`` over all couplings.

For a likelihood metric ``g = s * <L, P>`` this is an entropic optimal
transport problem: the maximizer of ``s<L,P> - I`` is the Sinkhorn coupling
at temperature ``1/s``, and the rate constraint is met by raising the
temperature. Two-by-two problems use a closed form.

Infinite skew is represented by a pair ``(lead, sub)`` meaning
``s * lead + sub + o(1)`` as ``s -> inf``. All quantities are in nats.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq, linprog, minimize
from scipy.special import logsumexp

NEG_INF = -math.inf
_MASS_EPS = 1e-15


def _xlogx(p):
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] * np.log(p[pos])
    return out


def coupling_mi(p: np.ndarray) -> float:
    v = _xlogx(p).sum() - _xlogx(p.sum(1)).sum() - _xlogx(p.sum(0)).sum()
    return max(float(v), 0.0)


def linear_value(L: np.ndarray, p: np.ndarray) -> float:
    pos = p > _MASS_EPS
    if not pos.any():
        return 0.0
    vals = L[pos]
    if np.any(np.isneginf(vals)):
        return NEG_INF
    return float(np.dot(p[pos], vals))


class _Binary:
    """Closed-form handling of 2x2 couplings, parametrized by ``a = P[0, 0]``."""

    def __init__(self, q, py, L):
        self.q0, self.q1 = float(q[0]), float(q[1])
        self.p0 = float(py[0])
        self.L = L
        self.lo = max(0.0, self.p0 - self.q1)
        self.hi = min(self.q0, self.p0)
        if self.hi < self.lo:
            self.hi = self.lo
        self.a_ind = min(max(self.q0 * self.p0, self.lo), self.hi)

    def table(self, a):
        return np.array(
            [[a, self.q0 - a], [self.p0 - a, self.q1 - self.p0 + a]]
        ).clip(0.0)

    def mi(self, a) -> float:
        q0, q1, p0 = self.q0, self.q1, self.p0
        p1 = 1.0 - p0
        cells = (a, q0 - a, p0 - a, q1 - p0 + a)
        marg = ((q0, p0), (q0, p1), (q1, p0), (q1, p1))
        tot = 0.0
        for c, (u, v) in zip(cells, marg):
            if c > 0:
                tot += c * math.log(c / (u * v))
        return max(tot, 0.0)

    def masked_interval(self):
        """Values of ``a`` that avoid every ``-inf`` cell, or ``None``."""
        if self.L is None:
            return self.lo, self.hi
        lo, hi = self.lo, self.hi
        pins = {
            (0, 0): 0.0,
            (0, 1): self.q0,
            (1, 0): self.p0,
            (1, 1): self.p0 - self.q1,
        }
        for cell, pin in pins.items():
            if np.isneginf(self.L[cell]):
                lo, hi = max(lo, pin), min(hi, pin)
        if hi < lo - 1e-13:
            return None
        return lo, max(lo, hi)

    def slope(self) -> float:
        L = self.L
        fin = np.where(np.isfinite(L), L, 0.0)
        return float(fin[0, 0] - fin[0, 1] - fin[1, 0] + fin[1, 1])

    def rate_interval(self, R):
        """``{a : I(a) <= R}`` as a closed interval."""
        lo, hi = self.lo, self.hi
        if hi - lo < 1e-15:
            return lo, hi
        a1 = lo
        if self.mi(lo) > R:
            a1 = brentq(lambda a: self.mi(a) - R, lo, self.a_ind, xtol=1e-15, rtol=1e-14)
        a2 = hi
        if self.mi(hi) > R:
            a2 = brentq(lambda a: self.mi(a) - R, self.a_ind, hi, xtol=1e-15, rtol=1e-14)
        return a1, a2

    def stationary(self, bs):
        """Maximizer of ``bs * a - I(a)`` over ``[lo, hi]`` (``bs = skew * slope``)."""
        lo, hi = self.lo, self.hi
        if hi - lo < 1e-15:
            return lo
        if bs > 700:
            return hi
        if bs < -700:
            return lo
        K = math.exp(bs)
        q0, q1, p0 = self.q0, self.q1, self.p0
        A = 1.0 - K
        B = q1 - p0 + K * (q0 + p0)
        C = -K * q0 * p0
        if abs(A) < 1e-12:
            root = -C / B
        else:
            disc = math.sqrt(max(B * B - 4 * A * C, 0.0))
            # numerically stable pair of roots
            qq = -0.5 * (B + math.copysign(disc, B))
            cands = [qq / A]
            if qq != 0:
                cands.append(C / qq)
            inside = [r for r in cands if lo - 1e-12 <= r <= hi + 1e-12]
            root = inside[0] if inside else min(cands, key=lambda r: min(abs(r - lo), abs(r - hi)))
        return min(max(root, lo), hi)


class CouplingSolver:
    """Metric maximization over couplings of ``q`` and an output marginal.

    ``L`` is the decoding log-table ``log W'(y|x')`` (``-inf`` allowed) for
    likelihood metrics and ``None`` for the mutual-information metric.
    """

    def __init__(self, q, L, skew):
        self.q = np.asarray(q, dtype=float)
        self.L = None if L is None else np.asarray(L, dtype=float)
        self.skew = float(skew)
        self.argmax = math.isinf(self.skew)
        self._imax_cache = {}

    # ---- helpers -------------------------------------------------------
    def _reduce(self, py):
        rows = np.flatnonzero(self.q > _MASS_EPS)
        cols = np.flatnonzero(py > _MASS_EPS)
        q = self.q[rows] / self.q[rows].sum()
        p = py[cols] / py[cols].sum()
        L = None if self.L is None else self.L[np.ix_(rows, cols)]
        return q, p, L

    # ---- mutual-information metric --------------------------------------
    def max_mi(self, py) -> float:
        """Largest I(X';Y) over couplings of ``q`` and ``py``."""
        key = np.round(py, 15).tobytes()
        if key in self._imax_cache:
            return self._imax_cache[key]
        q, p, _ = self._reduce(np.asarray(py, dtype=float))
        if q.size == 1 or p.size == 1:
            val = 0.0
        elif q.size == 2 and p.size == 2:
            b = _Binary(q, p, None)
            val = max(b.mi(b.lo), b.mi(b.hi))
        else:
            val = _max_mi_generic(q, p)
        self._imax_cache[key] = val
        return val

    # ---- public API ----------------------------------------------------
    def alpha(self, py, R):
        """``max_{I <= R} g - I + R``; a float, or ``(lead, sub)`` for infinite skew."""
        py = np.asarray(py, dtype=float)
        if self.L is None:
            imax = self.max_mi(py)
            top = min(R, imax)
            if self.argmax:
                return (top, R - top)
            s = self.skew
            return (s - 1.0) * top + R if s >= 1.0 else R
        q, p, L = self._reduce(py)
        if q.size == 2 and p.size == 2:
            return self._alpha_binary(q, p, L, R)
        if q.size == 1 or p.size == 1:
            P = np.outer(q, p)
            g = linear_value(L, P)
            if self.argmax:
                return (g, R) if g > NEG_INF else (NEG_INF, 0.0)
            return self.skew * g + R if g > NEG_INF else NEG_INF
        return _alpha_generic(q, p, L, R, self.skew)

    def metric_max(self, py):
        """Unconstrained ``max g`` with the smallest I among maximizers.

        Returns ``(gmax, imin)`` with ``gmax`` not multiplied by the skew.
        """
        py = np.asarray(py, dtype=float)
        if self.L is None:
            imax = self.max_mi(py)
            return imax, imax
        q, p, L = self._reduce(py)
        if q.size == 1 or p.size == 1:
            P = np.outer(q, p)
            return linear_value(L, P), 0.0
        if q.size == 2 and p.size == 2:
            b = _Binary(q, p, L)
            iv = b.masked_interval()
            if iv is None:
                return NEG_INF, math.inf
            c1, c2 = iv
            sl = b.slope()
            if c2 - c1 < 1e-15 or sl == 0.0:
                a = min(max(b.a_ind, c1), c2)
            else:
                a = c2 if sl > 0 else c1
            return linear_value(L, b.table(a)), b.mi(a)
        return _metric_max_generic(q, p, L)

    def beta(self, py, R):
        """``max g + [R - I]_+`` over all couplings (float or ``(lead, sub)``)."""
        py = np.asarray(py, dtype=float)
        gmax, imin = self.metric_max(py)
        if self.L is None:
            imax = gmax
            if self.argmax:
                return (imax, max(R - imax, 0.0))
            return max(R, self.skew * imax + max(R - imax, 0.0))
        if self.argmax:
            if gmax == NEG_INF:
                return (NEG_INF, 0.0)
            return (gmax, max(R - imin, 0.0))
        al = self.alpha(py, R)
        top = self.skew * gmax if gmax > NEG_INF else NEG_INF
        return max(al, top)

    # ---- likelihood, 2x2 -----------------------------------------------
    def _alpha_binary(self, q, p, L, R):
        b = _Binary(q, p, L)
        iv = b.masked_interval()
        if iv is None:
            return (NEG_INF, 0.0) if self.argmax else NEG_INF
        r1, r2 = b.rate_interval(R)
        c1, c2 = max(iv[0], r1), min(iv[1], r2)
        if c2 < c1 - 1e-13:
            return (NEG_INF, 0.0) if self.argmax else NEG_INF
        c2 = max(c1, c2)
        sl = b.slope()
        if self.argmax:
            if c2 - c1 < 1e-15:
                a = c1
            elif sl == 0.0:
                a = min(max(b.a_ind, c1), c2)
            else:
                a = c2 if sl > 0 else c1
            return (linear_value(L, b.table(a)), R - b.mi(a))
        if c2 - c1 < 1e-15:
            a = c1
        else:
            a = min(max(b.stationary(self.skew * sl), c1), c2)
        g = linear_value(L, b.table(a))
        if g == NEG_INF:
            return NEG_INF
        return self.skew * g - b.mi(a) + R


# ---- generic alphabets ---------------------------------------------------

def _sinkhorn(logK, q, p, f=None, tol=1e-12, maxiter=20000):
    """Log-domain Sinkhorn; returns the coupling and the row potential."""
    lq, lp = np.log(q), np.log(p)
    if f is None:
        f = np.zeros(q.size)
    h = np.zeros(p.size)
    for _ in range(maxiter):
        h = lp - logsumexp(logK + f[:, None], axis=0)
        f = lq - logsumexp(logK + h[None, :], axis=1)
        P = np.exp(logK + f[:, None] + h[None, :])
        if np.max(np.abs(P.sum(0) - p)) < tol:
            break
    return P, f


def _support_ok(L, q, p) -> bool:
    """Is there a coupling avoiding the ``-inf`` cells?"""
    mask = np.isfinite(L)
    if mask.all():
        return True
    k, m = L.shape
    A_eq, b_eq = [], []
    for i in range(k):
        row = np.zeros((k, m)); row[i] = 1; A_eq.append(row.ravel()); b_eq.append(q[i])
    for j in range(m):
        col = np.zeros((k, m)); col[:, j] = 1; A_eq.append(col.ravel()); b_eq.append(p[j])
    bounds = [(0, None) if ok else (0, 0) for ok in mask.ravel()]
    res = linprog(np.zeros(k * m), A_eq=np.array(A_eq), b_eq=b_eq, bounds=bounds, method="highs")
    return res.status == 0


def _entropic(L, q, p, tau, f=None):
    logK = np.where(np.isfinite(L), L / tau if math.isfinite(tau) else 0.0, -np.inf)
    return _sinkhorn(logK, q, p, f)


def _rate_temperature(L, q, p, R, tau0):
    """Smallest temperature >= tau0 whose Sinkhorn coupling has I <= R."""
    P_inf, _ = _entropic(L, q, p, math.inf)
    if coupling_mi(P_inf) > R + 1e-12:
        return None
    lo, hi = math.log(tau0), math.log(tau0)
    while True:
        hi += math.log(10.0)
        P, _ = _entropic(L, q, p, math.exp(hi))
        if coupling_mi(P) <= R or hi > math.log(1e12):
            break
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        P, _ = _entropic(L, q, p, math.exp(mid))
        if coupling_mi(P) > R:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-10:
            break
    P, _ = _entropic(L, q, p, math.exp(hi))
    return P


def _alpha_generic(q, p, L, R, skew):
    argmax = math.isinf(skew)
    if not _support_ok(L, q, p):
        return (NEG_INF, 0.0) if argmax else NEG_INF
    if argmax:
        gmax, imin = _metric_max_generic(q, p, L)
        if imin <= R:
            return (gmax, R - imin)
        P = _rate_temperature(L, q, p, R, 1e-6)
        if P is None:
            return (NEG_INF, 0.0)
        return (linear_value(L, P), R - coupling_mi(P))
    tau0 = 1.0 / skew if skew > 0 else math.inf
    P, _ = _entropic(L, q, p, tau0)
    if coupling_mi(P) <= R:
        return skew * linear_value(L, P) - coupling_mi(P) + R
    P = _rate_temperature(L, q, p, R, tau0)
    if P is None:
        return NEG_INF
    return skew * linear_value(L, P) - coupling_mi(P) + R


def _metric_max_generic(q, p, L):
    k, m = L.shape
    fin = np.isfinite(L)
    A_eq, b_eq = [], []
    for i in range(k):
        row = np.zeros((k, m)); row[i] = 1; A_eq.append(row.ravel()); b_eq.append(q[i])
    for j in range(m):
        col = np.zeros((k, m)); col[:, j] = 1; A_eq.append(col.ravel()); b_eq.append(p[j])
    c = -np.where(fin, L, 0.0).ravel()
    bounds = [(0, None) if ok else (0, 0) for ok in fin.ravel()]
    res = linprog(c, A_eq=np.array(A_eq), b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        return NEG_INF, math.inf
    gmax = -res.fun
    # anneal the temperature down to approach the max-entropy optimal coupling
    f = None
    scale = max(1.0, float(np.max(np.abs(L[fin]))))
    P = None
    for tau in scale * np.logspace(0, -7, 29):
        P, f = _entropic(L, q, p, tau, f)
    return gmax, coupling_mi(P)


def _max_mi_generic(q, p):
    """Multi-start local maximization of I over the transportation polytope."""
    k, m = q.size, p.size
    cons = [
        {"type": "eq", "fun": lambda x: x.reshape(k, m).sum(1) - q},
        {"type": "eq", "fun": lambda x: x.reshape(k, m).sum(0)[:-1] - p[:-1]},
    ]
    best = 0.0
    rng = np.random.default_rng(12345)
    starts = [np.outer(q, p)]
    for _ in range(8):
        P, _ = _sinkhorn(rng.normal(scale=4.0, size=(k, m)), q, p)
        starts.append(P)
    for P0 in starts:
        res = minimize(lambda x: -coupling_mi(np.clip(x, 0, None).reshape(k, m)),
                       P0.ravel(), method="SLSQP", bounds=[(0, 1)] * (k * m),
                       constraints=cons, options={"ftol": 1e-12, "maxiter": 200})
        P = np.clip(res.x, 0, None).reshape(k, m)
        if np.max(np.abs(P.sum(1) - q)) < 1e-7 and np.max(np.abs(P.sum(0) - p)) < 1e-7:
            best = max(best, coupling_mi(P))
    return best
