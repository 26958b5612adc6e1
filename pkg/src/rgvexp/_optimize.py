"""Grid-plus-refinement search over joint distributions with fixed marginals."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

MEMBERSHIP_TOL = 1e-9
_BIG = 1e6


class JointPolytope:
    """``{P on X x X : both marginals equal q}`` parametrized by its free block."""

    def __init__(self, q):
        self.q = np.asarray(q, dtype=float)
        k = self.q.size
        self.k = k
        self.cells = [
            (i, j) for i in range(k - 1) for j in range(k - 1)
            if min(self.q[i], self.q[j]) > 0
        ]
        self.dim = len(self.cells)
        self.upper = np.array([min(self.q[i], self.q[j]) for i, j in self.cells])
        self.lower = np.zeros(self.dim)
        if k == 2 and self.dim == 1:
            self.lower[0] = max(0.0, self.q[0] - self.q[1])

    def joint(self, u, tol=1e-12):
        """Full table for free coordinates ``u``; ``None`` if outside the polytope."""
        k, q = self.k, self.q
        P = np.zeros((k, k))
        for val, (i, j) in zip(np.atleast_1d(u), self.cells):
            P[i, j] = val
        P[:k - 1, k - 1] = q[:k - 1] - P[:k - 1, :k - 1].sum(axis=1)
        P[k - 1, :k - 1] = q[:k - 1] - P[:k - 1, :k - 1].sum(axis=0)
        P[k - 1, k - 1] = q[k - 1] - P[k - 1, :k - 1].sum()
        if np.any(P < -tol):
            return None
        return np.clip(P, 0.0, None)

    def coords(self, P) -> np.ndarray:
        return np.array([P[i, j] for i, j in self.cells])

    def grid(self, resolution: int, max_points: int):
        """Uniform grid; resolution is reduced until the point cap is met."""
        res = int(resolution)
        if self.dim == 0:
            return [np.zeros(0)], 0
        while res > 1 and (res + 1) ** self.dim > max_points:
            res -= 1
        axes = [np.linspace(lo, hi, res + 1) for lo, hi in zip(self.lower, self.upper)]
        pts = []
        for u in itertools.product(*axes):
            u = np.array(u)
            if self.joint(u) is not None:
                pts.append(u)
        return pts, res


@dataclass
class SearchResult:
    value: float
    joint: np.ndarray | None
    feasible: bool
    meta: dict = field(default_factory=dict)


def _lexkey(val, P):
    return (val, tuple(np.round(P.ravel(), 14)) if P is not None else ())


class SetSearch:
    """Optimize ``objective(P)`` over ``{P : every constraint(P) <= 0}``.

    Constraints are closed (``<= MEMBERSHIP_TOL``). The objective may return
    ``inf``. ``sense`` is ``"min"`` or ``"max"``.
    """

    def __init__(self, polytope: JointPolytope, objective, constraints=(), sense="min",
                 resolution=64, max_points=20000, refine_iters=200):
        self.poly = polytope
        self.objective = objective
        self.constraints = list(constraints)
        self.sign = 1.0 if sense == "min" else -1.0
        self.resolution = resolution
        self.max_points = max_points
        self.refine_iters = refine_iters
        self.evals = 0

    def _viol(self, P) -> float:
        worst = -math.inf
        for h in self.constraints:
            v = h(P)
            if math.isnan(v):
                v = math.inf
            worst = max(worst, v)
        return worst

    def feasible(self, P) -> bool:
        return P is not None and (not self.constraints or self._viol(P) <= MEMBERSHIP_TOL)

    def _f(self, P) -> float:
        self.evals += 1
        return self.sign * self.objective(P)

    def _better(self, cand, best):
        return best is None or _lexkey(*cand) < _lexkey(*best)

    def run(self) -> SearchResult:
        pts, res = self.poly.grid(self.resolution, self.max_points)
        meta = {"grid_resolution": res, "grid_points": len(pts), "dim": self.poly.dim}
        if self.poly.dim == 1:
            best = self._run_1d(pts)
        else:
            best = self._run_nd(pts)
        meta["evaluations"] = self.evals
        if best is None:
            empty = math.inf if self.sign > 0 else -math.inf
            return SearchResult(empty, None, False, meta)
        val, P = best
        return SearchResult(self.sign * val, P, True, meta)

    # ---- one free coordinate -------------------------------------------
    def _h1(self, u):
        P = self.poly.joint(np.array([u]))
        if P is None:
            return _BIG
        v = self._viol(P) if self.constraints else -1.0
        return min(v, _BIG)

    def _boundary(self, u_in, u_out):
        """Feasible point next to the constraint boundary between two grid points."""
        h_in, h_out = self._h1(u_in), self._h1(u_out)
        if h_in > MEMBERSHIP_TOL:
            return None
        try:
            u = brentq(lambda t: self._h1(t), u_in, u_out, xtol=1e-14, rtol=1e-15)
        except ValueError:
            return None
        # step back toward the feasible side until membership holds
        for _ in range(60):
            if self._h1(u) <= MEMBERSHIP_TOL:
                return u
            u = u_in + 0.5 * (u - u_in)
        return u_in

    def _slivers(self, us, hs, feas):
        """Feasible points hidden between infeasible grid points.

        A set such as ``{I <= c, f <= E0}`` can be thinner than one grid
        cell; the max-violation function then has an interior minimum that
        dips below the tolerance. Up to three such local minima are polished.
        """
        found = []
        idx = [i for i in range(len(us)) if not feas[i] and hs[i] < _BIG
               and (i == 0 or hs[i] <= hs[i - 1]) and (i + 1 == len(us) or hs[i] <= hs[i + 1])]
        for i in sorted(idx, key=lambda t: hs[t])[:3]:
            lo, hi = us[max(i - 1, 0)], us[min(i + 1, len(us) - 1)]
            r = minimize_scalar(self._h1, bounds=(lo, hi), method="bounded",
                                options={"xatol": 1e-13, "maxiter": 200})
            if self._h1(r.x) <= MEMBERSHIP_TOL:
                u = float(r.x)
                left = self._boundary(u, lo) if lo < u else None
                right = self._boundary(u, hi) if hi > u else None
                for b in (left, right):
                    if b is not None:
                        found.append((b, min(b, u), max(b, u)))
                found.append((u, left if left is not None else u, right if right is not None else u))
        return found

    def _run_1d(self, pts):
        us = [float(p[0]) for p in pts]
        hs = [self._h1(u) for u in us]
        feas = [h <= MEMBERSHIP_TOL for h in hs]
        cands = []  # (u, left, right): refinement bracket
        for i, u in enumerate(us):
            if feas[i]:
                left = us[i - 1] if i > 0 and feas[i - 1] else u
                right = us[i + 1] if i + 1 < len(us) and feas[i + 1] else u
                cands.append((u, left, right))
        for i in range(len(us) - 1):
            if feas[i] != feas[i + 1]:
                u_in, u_out = (us[i], us[i + 1]) if feas[i] else (us[i + 1], us[i])
                b = self._boundary(u_in, u_out)
                if b is not None:
                    cands.append((b, min(b, u_in), max(b, u_in)))
        if self.constraints:
            cands += self._slivers(us, hs, feas)
        if not cands:
            return None
        scored = []
        for u, lo, hi in cands:
            P = self.poly.joint(np.array([u]))
            scored.append((self._f(P), P, lo, hi))
        scored.sort(key=lambda t: _lexkey(t[0], t[1]))
        best = (scored[0][0], scored[0][1])
        for val, P, lo, hi in scored[:3]:
            if hi - lo <= 1e-15 or not math.isfinite(val):
                continue
            g = self._lazy(best[0], lambda t: self.poly.joint(np.array([t])))
            r = minimize_scalar(g, bounds=(lo, hi), method="bounded",
                                options={"xatol": 1e-9, "maxiter": max(self.refine_iters, 10)})
            best = self._accept(self.poly.joint(np.array([r.x])), best)
        return best

    def _lazy(self, incumbent, to_joint):
        """Penalized objective that skips the feasibility test for non-improving points.

        Constraints are often far costlier than the objective; a point that
        does not beat the incumbent cannot change the answer either way.
        """
        def g(u):
            Q = to_joint(u)
            if Q is None:
                return _BIG
            v = self._f(Q)
            if not math.isfinite(v):
                return _BIG
            if v >= incumbent:
                return v
            return v if self.feasible(Q) else _BIG
        return g

    def _accept(self, Q, best):
        if not self.feasible(Q):
            return best
        cand = (self._f(Q), Q)
        if math.isfinite(cand[0]) and self._better(cand, best):
            return cand
        return best

    # ---- general dimension --------------------------------------------
    def _rescue(self, starts):
        """Minimize the constraint violation when no grid point is feasible."""
        def h(u):
            P = self.poly.joint(u)
            return _BIG if P is None else min(self._viol(P), _BIG)

        out = []
        for _, u in starts:
            r = minimize(h, np.array(u), method="Nelder-Mead",
                         options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": self.refine_iters})
            P = self.poly.joint(r.x)
            if self.feasible(P):
                out.append((self._f(P), P, r.x))
        return out

    def _run_nd(self, pts):
        scored = []
        viol = []
        for u in pts:
            P = self.poly.joint(u)
            v = self._viol(P) if (P is not None and self.constraints) else -1.0
            if P is not None and v <= MEMBERSHIP_TOL:
                scored.append((self._f(P), P, u))
            elif P is not None:
                viol.append((v, tuple(u)))
        if not scored and viol and self.poly.dim > 0:
            scored = self._rescue(sorted(viol)[:3])
        if not scored:
            return None
        scored.sort(key=lambda t: _lexkey(t[0], t[1]))
        best = (scored[0][0], scored[0][1])
        if self.poly.dim == 0:
            return best
        step = (self.poly.upper - self.poly.lower) / max(self.resolution, 1)

        for val, P, u in scored[:3]:
            if not math.isfinite(val):
                continue
            g = self._lazy(best[0], self.poly.joint)
            simplex = [u] + [u + np.eye(self.poly.dim)[d] * step[d] * 0.5 for d in range(self.poly.dim)]
            r = minimize(g, u, method="Nelder-Mead",
                         options={"initial_simplex": np.array(simplex), "xatol": 1e-10,
                                  "fatol": 1e-12, "maxiter": self.refine_iters})
            if r.fun < _BIG:
                best = self._accept(self.poly.joint(r.x), best)
        return best
