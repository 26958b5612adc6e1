"""Inner minimization over P_{Y|XX'} shared by Gamma and Lambda.

Both functionals have the form ``min_V D(V || W | P_XX') + penalty(V)`` where
``D(V||W|P_XX')`` equals ``D(P_{Y|X}||W|Q) + I(X';Y|X)`` for the induced
conditional. The penalty differs:

* gamma:  ``[max(g(P_XY), alpha(R, P_Y)) - g(P_X'Y)]_+``
* lambda: ``beta(R, P_Y) - g(P_X'Y)``

For infinite skew the penalties are replaced by their limits, which turn
the leading-order comparisons into hard constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ._couplings import NEG_INF, CouplingSolver, coupling_mi, linear_value

_TOL = 1e-9          # slack used inside the optimizer
_CHECK_TOL = 1e-7    # acceptance tolerance for the leading-order constraints
_BIG = 1e3
_ACTIVE = 1e-14


@dataclass
class InnerResult:
    value: float
    cond: np.ndarray
    info: dict = field(default_factory=dict)


class InnerSolver:
    """Evaluates Gamma/Lambda for one channel, composition and metric (nats)."""

    def __init__(self, W, q, L, skew, n_random=6, seed=20240607, n_grid_starts=2,
                 n_struct_starts=2):
        self.W = np.asarray(W, dtype=float)
        self.q = np.asarray(q, dtype=float)
        self.L = None if L is None else np.asarray(L, dtype=float)
        self.skew = float(skew)
        self.argmax = math.isinf(self.skew)
        self.k, self.l = self.W.shape
        with np.errstate(divide="ignore"):
            self.logW = np.log(self.W)
        supp = np.broadcast_to(self.W[:, None, :] > 0, (self.k, self.k, self.l)).copy()
        if self.L is not None:
            supp &= np.isfinite(self.L)[None, :, :]
        self.supp = supp
        self.coupler = CouplingSolver(self.q, self.L, self.skew)
        self.n_random = n_random
        self.seed = seed
        self.n_grid_starts = n_grid_starts
        self.n_struct_starts = n_struct_starts

    # ---- metric pieces ------------------------------------------------
    def g_lead(self, pxy: np.ndarray) -> float:
        """Metric without the skew factor."""
        if self.L is None:
            return coupling_mi(pxy)
        return linear_value(self.L, pxy)

    # ---- public -------------------------------------------------------
    def solve(self, P, R, which="gamma") -> InnerResult:
        P = np.asarray(P, dtype=float)
        prob = _Problem(self, P, R, which)
        return prob.run()

    def value_at(self, P, V, R, which="gamma") -> float:
        """Objective at a given conditional, with the exact limit semantics."""
        prob = _Problem(self, np.asarray(P, dtype=float), R, which)
        return prob.exact_value(np.asarray(V, dtype=float))


class _Problem:
    def __init__(self, solver: InnerSolver, P, R, which):
        self.s = solver
        self.P = P
        self.R = float(R)
        self.which = which
        k, l = solver.k, solver.l
        self.cells = [(x, xp) for x in range(k) for xp in range(k) if P[x, xp] > _ACTIVE]
        self.empty = any(not solver.supp[x, xp].any() for x, xp in self.cells)
        free_idx, last_idx, seg = [], [], []
        for ci, (x, xp) in enumerate(self.cells):
            ys = np.flatnonzero(solver.supp[x, xp])
            for y in ys[:-1]:
                free_idx.append((x, xp, y))
                seg.append(ci)
            last_idx.append((x, xp, ys[-1]) if ys.size else None)
        self.free_idx = free_idx
        self.last_idx = last_idx
        self.dim = len(free_idx)
        self.A = np.zeros((len(self.cells), self.dim))
        for j, ci in enumerate(seg):
            self.A[ci, j] = 1.0
        self._cache_key = None
        self._cache_val = None

    # ---- parametrization --------------------------------------------
    def base_cond(self) -> np.ndarray:
        """Default conditional: W(.|x) on every cell (used for inactive cells)."""
        return np.repeat(self.s.W[:, None, :], self.s.k, axis=1).copy()

    def to_cond(self, z) -> np.ndarray:
        V = self.base_cond()
        z = np.clip(np.asarray(z, dtype=float), 0.0, 1.0)
        for ci, (x, xp) in enumerate(self.cells):
            V[x, xp] = 0.0
        for j, (x, xp, y) in enumerate(self.free_idx):
            V[x, xp, y] = z[j]
        last = 1.0 - self.A @ z if self.dim else np.ones(len(self.cells))
        for ci, (x, xp) in enumerate(self.cells):
            li = self.last_idx[ci]
            if li is None:
                continue
            V[li] = max(last[ci], 0.0)
            tot = V[x, xp].sum()
            V[x, xp] /= tot
        return V

    def to_z(self, V) -> np.ndarray:
        return np.array([V[i] for i in self.free_idx], dtype=float)

    def start_points(self):
        s = self.s
        starts = []
        wext = self.base_cond()
        swap = np.repeat(s.W[None, :, :], s.k, axis=0).copy()  # W(.|x')
        uni = np.ones((s.k, s.k, s.l))
        for V in (wext, swap, 0.5 * (wext + swap), uni):
            V = np.where(s.supp, V, 0.0)
            V = V / np.where(V.sum(2, keepdims=True) > 0, V.sum(2, keepdims=True), 1.0)
            starts.append(self.to_z(V))
        rng = np.random.default_rng(s.seed)
        for _ in range(s.n_random):
            V = rng.dirichlet(np.ones(s.l), size=(s.k, s.k))
            V = np.where(s.supp, V, 0.0)
            V = V / np.where(V.sum(2, keepdims=True) > 0, V.sum(2, keepdims=True), 1.0)
            starts.append(self.to_z(V))
        return starts

    def grid_points(self):
        if self.dim == 1:
            return [np.array([v]) for v in np.linspace(0, 1, 41)]
        if self.dim == 2:
            pts = []
            for u in np.linspace(0, 1, 21):
                for v in np.linspace(0, 1, 21):
                    z = np.array([u, v])
                    if np.all(1.0 - self.A @ z >= -1e-12):
                        pts.append(z)
            return pts
        return []

    # ---- evaluation ---------------------------------------------------
    def pieces(self, z):
        key = np.asarray(z, dtype=float).tobytes()
        if key == self._cache_key:
            return self._cache_val
        s = self.s
        V = self.to_cond(z)
        joint3 = self.P[:, :, None] * V
        pos = joint3 > 0
        D = float(np.sum(joint3[pos] * (np.log(V[pos]) - np.broadcast_to(s.logW[:, None, :], V.shape)[pos])))
        pxy = joint3.sum(axis=1)
        pxpy = joint3.sum(axis=0)
        py = pxy.sum(axis=0)
        a = s.g_lead(pxy)
        e = s.g_lead(pxpy)
        out = {"D": D, "a": a, "e": e, "py": py}
        if self.which == "gamma":
            out["alpha"] = s.coupler.alpha(py, self.R)
        else:
            if s.argmax:
                out["beta"] = s.coupler.beta(py, self.R)
            else:
                out["beta"] = s.coupler.beta(py, self.R)
        self._cache_key, self._cache_val = key, out
        return out

    def exact_value(self, V) -> float:
        if self.empty:
            return math.inf
        z = self.to_z(V) if V.ndim == 3 else V
        pc = self.pieces(z)
        return self._value_from(pc, _CHECK_TOL)

    def _value_from(self, pc, tol) -> float:
        s = self.s
        D, a, e = pc["D"], pc["a"], pc["e"]
        if not math.isfinite(D):
            return math.inf
        if self.which == "gamma":
            if s.argmax:
                b, c = pc["alpha"]
                if a > e + tol or b > e + tol or e == NEG_INF:
                    return math.inf
                return D + (c if b >= e - tol else 0.0)
            sa = s.skew * a if s.skew > 0 else 0.0
            se = s.skew * e if s.skew > 0 else 0.0
            top = max(sa, pc["alpha"])
            if top == NEG_INF:
                return D
            return D + max(top - se, 0.0)
        if s.argmax:
            gm, sub = pc["beta"]
            if gm > e + tol or e == NEG_INF:
                return math.inf
            return D + sub
        se = s.skew * e if s.skew > 0 else 0.0
        return D + pc["beta"] - se

    # ---- optimization --------------------------------------------------
    def _local(self, z0):
        s = self.s
        dim = self.dim
        bounds = [(0.0, 1.0)] * dim
        simplex = {"type": "ineq", "fun": lambda x: 1.0 - self.A @ x[:dim]}
        opts = {"ftol": 1e-13, "maxiter": 100}
        if self.which == "gamma" and not s.argmax:
            def obj(x):
                return self.pieces(x[:dim])["D"] + x[dim]

            def c1(x):
                pc = self.pieces(x[:dim])
                return x[dim] - s.skew * (pc["a"] - pc["e"])

            def c2(x):
                pc = self.pieces(x[:dim])
                al = pc["alpha"]
                return x[dim] - (max(al, -_BIG) - s.skew * pc["e"])

            pc = self.pieces(z0)
            s0 = max(0.0, s.skew * (pc["a"] - pc["e"]), max(pc["alpha"], -_BIG) - s.skew * pc["e"])
            x0 = np.append(z0, s0)
            res = minimize(obj, x0, method="SLSQP", bounds=bounds + [(0.0, None)],
                           constraints=[simplex, {"type": "ineq", "fun": c1},
                                        {"type": "ineq", "fun": c2}], options=opts)
            return res.x[:dim]
        if self.which == "gamma":
            def obj(x):
                pc = self.pieces(x)
                b, c = pc["alpha"]
                return pc["D"] + (c if b > NEG_INF and b >= pc["e"] - _TOL else 0.0)

            def c1(x):
                pc = self.pieces(x)
                return pc["e"] - pc["a"] + _TOL

            def c2(x):
                pc = self.pieces(x)
                b = pc["alpha"][0]
                return _TOL if b == NEG_INF else pc["e"] - b + _TOL

            cons = [simplex, {"type": "ineq", "fun": c1}, {"type": "ineq", "fun": c2}]
        elif s.argmax:
            def obj(x):
                pc = self.pieces(x)
                return pc["D"] + pc["beta"][1]

            def c1(x):
                pc = self.pieces(x)
                return pc["e"] - pc["beta"][0] + _TOL

            cons = [simplex, {"type": "ineq", "fun": c1}]
        else:
            def obj(x):
                pc = self.pieces(x)
                return pc["D"] + pc["beta"] - s.skew * pc["e"]

            cons = [simplex]
        res = minimize(obj, z0, method="SLSQP", bounds=bounds, constraints=cons, options=opts)
        return res.x

    def run(self) -> InnerResult:
        if self.empty:
            return InnerResult(math.inf, self.base_cond(), {"reason": "empty support"})
        if self.dim == 0:
            V = self.to_cond(np.zeros(0))
            return InnerResult(self.exact_value(V), V, {"starts": 0})
        cands = self.start_points()
        grid = self.grid_points()
        if grid:
            scored = sorted(
                ((self._merit(z), i) for i, z in enumerate(grid)), key=lambda t: t
            )
            cands = [grid[i] for _, i in scored[:self.s.n_grid_starts]] + cands[:self.s.n_struct_starts]
        best_val, best_z = math.inf, None
        for z0 in cands:
            for z in (z0, self._local(z0)):
                z = self._project(z)
                val = self._value_from(self.pieces(z), _CHECK_TOL)
                if val < best_val - 1e-15:
                    best_val, best_z = val, z
        V = self.to_cond(best_z) if best_z is not None else self.base_cond()
        return InnerResult(best_val, V, {"starts": len(cands), "dim": self.dim})

    def _project(self, z):
        z = np.clip(np.asarray(z, dtype=float), 0.0, 1.0)
        return self.to_z(self.to_cond(z))

    def _merit(self, z) -> float:
        pc = self.pieces(z)
        val = self._value_from(pc, _CHECK_TOL)
        if math.isfinite(val):
            return val
        # distance to feasibility for ranking infeasible grid points
        s = self.s
        viol = max(pc["a"] - pc["e"], 0.0) if math.isfinite(pc["a"] - pc["e"]) else _BIG
        if self.which == "gamma" and s.argmax:
            b = pc["alpha"][0]
            if b > NEG_INF:
                viol += max(b - pc["e"], 0.0)
        elif s.argmax:
            viol = max(pc["beta"][0] - pc["e"], 0.0)
        return _BIG + viol + pc["D"]
