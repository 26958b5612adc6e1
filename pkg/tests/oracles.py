"""Brute-force reference implementations used to derive frozen test values.

Nothing here imports the package under test. Everything is plain loops,
fine grids or exact rational arithmetic.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction


def mi_direct(joint, base=2.0):
    px = [sum(r) for r in joint]
    py = [sum(joint[i][j] for i in range(len(joint))) for j in range(len(joint[0]))]
    s = 0.0
    for i, row in enumerate(joint):
        for j, p in enumerate(row):
            if p > 0:
                s += p * math.log(p / (px[i] * py[j]))
    return s / math.log(base)


def cond_kl_direct(cond, chan, q, base=2.0):
    s = 0.0
    for x, qx in enumerate(q):
        for y, v in enumerate(cond[x]):
            if v > 0:
                if chan[x][y] == 0:
                    return math.inf
                s += qx * v * math.log(v / chan[x][y])
    return s / math.log(base)


def cond_mi_identity(p3, base=2.0):
    """I(X';Y|X) via H(X'|X) + H(Y|X) - H(X'Y|X)."""
    def h(vals):
        return -sum(v * math.log(v) for v in vals if v > 0)

    k, kp, l = len(p3), len(p3[0]), len(p3[0][0])
    px = [sum(p3[x][a][y] for a in range(kp) for y in range(l)) for x in range(k)]
    pxa = [[sum(p3[x][a]) for a in range(kp)] for x in range(k)]
    pxy = [[sum(p3[x][a][y] for a in range(kp)) for y in range(l)] for x in range(k)]
    hx = h(px)
    h_a_x = h([v for r in pxa for v in r]) - hx
    h_y_x = h([v for r in pxy for v in r]) - hx
    h_ay_x = h([p3[x][a][y] for x in range(k) for a in range(kp) for y in range(l)]) - hx
    return (h_a_x + h_y_x - h_ay_x) / math.log(base)


def integer_tables(n, rows, cols):
    """All nonnegative integer matrices with the given margins.

    Loops over every value of the free (k-1) x (l-1) block and completes the
    last row and column from the margins.
    """
    k, l = len(rows), len(cols)
    out = []
    for cells in itertools.product(range(n + 1), repeat=(k - 1) * (l - 1)):
        mat = [[0] * l for _ in range(k)]
        for i in range(k - 1):
            for j in range(l - 1):
                mat[i][j] = cells[i * (l - 1) + j]
            mat[i][l - 1] = rows[i] - sum(mat[i][:l - 1])
        for j in range(l):
            mat[k - 1][j] = cols[j] - sum(mat[i][j] for i in range(k - 1))
        if min(min(r) for r in mat) < 0 or sum(mat[k - 1]) != rows[k - 1]:
            continue
        out.append(mat)
    return out


# ---- z-channel, ML decoding ---------------------------------------------------

def _glog(w):
    return math.log(w) if w > 0 else -math.inf


def _gbar(P, W):
    """sum P log W with the 0 * log 0 = 0 convention (nats)."""
    s = 0.0
    for i in range(len(P)):
        for j in range(len(P[0])):
            if P[i][j] > 0:
                if W[i][j] == 0:
                    return -math.inf
                s += P[i][j] * math.log(W[i][j])
    return s


def binary_couplings(q0, py0, res):
    """Grid over 2x2 joints with row marginal (q0, 1-q0) and column (py0, 1-py0)."""
    lo, hi = max(0.0, q0 + py0 - 1.0), min(q0, py0)
    for i in range(res + 1):
        a = lo + (hi - lo) * i / res
        yield [[a, q0 - a], [py0 - a, 1.0 - q0 - py0 + a]]


def alpha_ml_oracle(q0, py0, W, R, res=2000):
    """Lead term ``max g`` over couplings with ``I <= R`` and the rate slack at the argmax.

    Grid over the coupling parameter, plus bisection onto ``I = R`` wherever
    two neighbouring grid points straddle the constraint.
    """
    lo, hi = max(0.0, q0 + py0 - 1.0), min(q0, py0)

    def coupling(a):
        return [[a, q0 - a], [py0 - a, 1.0 - q0 - py0 + a]]

    def ok(a):
        return mi_direct(coupling(a), math.e) <= R + 1e-12

    pts = [lo + (hi - lo) * i / res for i in range(res + 1)]
    flags = [ok(a) for a in pts]
    cands = [a for a, f in zip(pts, flags) if f]
    for i in range(res):
        if flags[i] != flags[i + 1]:
            a_in, a_out = (pts[i], pts[i + 1]) if flags[i] else (pts[i + 1], pts[i])
            for _ in range(200):
                mid = 0.5 * (a_in + a_out)
                if ok(mid):
                    a_in = mid
                else:
                    a_out = mid
            cands.append(a_in)
    best, slack = -math.inf, None
    for a in cands:
        P = coupling(a)
        g = _gbar(P, W)
        I = mi_direct(P, math.e)
        if g > best + 1e-15 or (abs(g - best) <= 1e-15 and R - I > (slack or -1)):
            best, slack = g, R - I
    return best, slack


def gamma_ml_z_oracle(P, W, R, res=400):
    """Gamma(P, R) in nats for a binary z-type channel with W[0] = (1, 0).

    Only the cell (1, 1) has a free conditional; everything else is pinned by
    the supports of W and of log W at the competing input.
    """
    best = math.inf

    def value(v):
        # V[x][x'][y]
        V = {(0, 0): [1.0, 0.0], (0, 1): [1.0, 0.0], (1, 0): [1.0, 0.0], (1, 1): [v, 1.0 - v]}
        D = 0.0
        pxy = [[0.0, 0.0], [0.0, 0.0]]
        pxpy = [[0.0, 0.0], [0.0, 0.0]]
        for (x, xp), cond in V.items():
            m = P[x][xp]
            if m <= 0:
                continue
            for y in (0, 1):
                p = m * cond[y]
                if p > 0:
                    if W[x][y] == 0:
                        return math.inf
                    D += p * math.log(cond[y] / W[x][y])
                    pxy[x][y] += p
                    pxpy[xp][y] += p
        a, e = _gbar(pxy, W), _gbar(pxpy, W)
        py0 = pxy[0][0] + pxy[1][0]
        b, c = alpha_ml_oracle(sum(P[0]), py0, W, R, res=400)
        if a > e + 1e-9 or e == -math.inf or b > e + 1e-9:
            return math.inf
        return D + (c if b >= e - 1e-9 else 0.0)

    grid = [i / res for i in range(res + 1)]
    vals = [value(v) for v in grid]
    i = min(range(len(vals)), key=lambda t: vals[t])
    best = vals[i]
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, res)]
    gr = (math.sqrt(5) - 1) / 2
    c, d = hi - gr * (hi - lo), lo + gr * (hi - lo)
    for _ in range(80):
        if value(c) < value(d):
            hi = d
        else:
            lo = c
        c, d = hi - gr * (hi - lo), lo + gr * (hi - lo)
    return min(best, value(0.5 * (lo + hi)))


# ---- error probability ------------------------------------------------------------

def _types(x, y, k, l):
    t = [[0] * l for _ in range(k)]
    for a, b in zip(x, y):
        t[a][b] += 1
    return t


def pe_bruteforce(codewords, W, metric_kind, skew, Wexact=None):
    """Average GLD error probability by direct double summation.

    ``metric_kind`` is ``"likelihood"`` or ``"mutual-information"``. For an
    infinite skew ties are split uniformly; likelihoods are compared in exact
    rational arithmetic (``Wexact``) so that ties are detected exactly.
    """
    M, n = len(codewords), len(codewords[0])
    k, l = len(W), len(W[0])
    total = 0.0
    for y in itertools.product(range(l), repeat=n):
        liks = [math.prod(W[x][b] for x, b in zip(cw, y)) for cw in codewords]
        if metric_kind == "likelihood":
            if math.isinf(skew):
                ex = [math.prod((Wexact or W)[x][b] for x, b in zip(cw, y)) for cw in codewords]
                top = max(ex)
                wins = [1.0 if e == top else 0.0 for e in ex]
                post = [w / sum(wins) for w in wins]
            else:
                wts = [L ** skew if L > 0 else 0.0 for L in liks]
                tot = sum(wts)
                post = [w / tot for w in wts] if tot > 0 else [1.0 / M] * M
        else:
            scores = []
            for cw in codewords:
                t = _types(cw, y, k, l)
                joint = [[c / n for c in r] for r in t]
                scores.append(n * mi_direct(joint, math.e))
            if math.isinf(skew):
                top = max(scores)
                wins = [1.0 if abs(s - top) <= 1e-12 else 0.0 for s in scores]
                post = [w / sum(wins) for w in wins]
            else:
                mx = max(scores)
                wts = [math.exp(skew * (s - mx)) for s in scores]
                post = [w / sum(wts) for w in wts]
        for m in range(M):
            total += liks[m] * (1.0 - post[m])
    return total / M


def hamming_keycond_oracle(delta, res=20000):
    """min I(P) over binary uniform-marginal joints with off-diagonal mass <= delta (bits)."""
    best = math.inf
    for i in range(res + 1):
        a = 0.5 * i / res  # P[0][0]
        P = [[a, 0.5 - a], [0.5 - a, a]]
        if P[0][1] + P[1][0] <= delta + 1e-12:
            best = min(best, mi_direct(P, 2.0))
    return best


def frac_matrix(rows):
    return [[Fraction(v).limit_denominator(10**9) for v in r] for r in rows]
