"""Information measures and method-of-types combinatorics on finite alphabets.

All functions take a ``base`` argument: ``2`` (default) for bits, ``"e"``
for nats. Conventions ``0 log 0 = 0`` and ``0 log(0/q) = 0`` are used
throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from ._validation import (
    InvalidParameterError,
    as_distribution,
    as_joint,
    as_stochastic,
    check_positive_int,
    log_unit,
)

MAX_ENUM_ALPHABET = 8
MAX_ENUM_TYPES = 2_000_000


def _xlogx(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p, dtype=float)
    pos = p > 0
    out[pos] = p[pos] * np.log(p[pos])
    return out


def entropy(p, base=2) -> float:
    arr = np.asarray(p, dtype=float)
    return float(-_xlogx(arr).sum() / log_unit(base))


def mutual_information(joint, base=2) -> float:
    """I(X;Y) of a two-dimensional joint table."""
    p = np.asarray(joint, dtype=float)
    if p.ndim != 2:
        raise InvalidParameterError("mutual_information needs a 2-d joint table")
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    val = _xlogx(p).sum() - _xlogx(px).sum() - _xlogx(py).sum()
    return max(float(val), 0.0) / log_unit(base)


def kl_divergence(p, q, base=2) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pos = p > 0
    if np.any(q[pos] <= 0):
        return math.inf
    return float(np.sum(p[pos] * np.log(p[pos] / q[pos]))) / log_unit(base)


def cond_kl(cond, channel, marginal, base=2) -> float:
    """D(P_{Y|X} || W | Q_X); ``channel`` may be a Channel or a raw matrix."""
    v = np.asarray(cond, dtype=float)
    w = np.asarray(getattr(channel, "matrix", channel), dtype=float)
    q = as_distribution(marginal, "marginal")
    if v.shape != w.shape or v.shape[0] != q.size:
        raise InvalidParameterError(
            f"shape mismatch: cond {v.shape}, channel {w.shape}, marginal {q.shape}"
        )
    as_stochastic(v, "cond", atol=1e-9)
    total = 0.0
    for x in np.flatnonzero(q > 0):
        d = kl_divergence(v[x], w[x], base="e")
        if math.isinf(d):
            return math.inf
        total += q[x] * d
    return total / log_unit(base)


def cond_mutual_information(joint3, base=2) -> float:
    """I(X';Y|X) for a table indexed ``[x, x', y]``."""
    p = as_joint(joint3, "joint3")
    if p.ndim != 3:
        raise InvalidParameterError("joint3 must be three-dimensional")
    h = (
        _xlogx(p).sum()
        + _xlogx(p.sum(axis=(1, 2))).sum()
        - _xlogx(p.sum(axis=2)).sum()
        - _xlogx(p.sum(axis=1)).sum()
    )
    return max(float(h), 0.0) / log_unit(base)


def _as_counts(n: int, p) -> np.ndarray:
    """Integer count array for an n-type given as probabilities or counts."""
    arr = np.asarray(p)
    if np.issubdtype(arr.dtype, np.integer):
        counts = arr.astype(np.int64)
        if counts.sum() != n or np.any(counts < 0):
            raise InvalidParameterError(f"counts must be nonnegative and sum to {n}")
        return counts
    arr = np.asarray(p, dtype=float)
    scaled = arr * n
    counts = np.rint(scaled).astype(np.int64)
    if np.any(np.abs(scaled - counts) > 1e-9) or counts.sum() != n or np.any(counts < 0):
        raise InvalidParameterError(f"{arr.tolist()} is not an n-type for n={n}")
    return counts


@dataclass(frozen=True, eq=False)
class JointType:
    """An n-type stored exactly as an integer count table."""

    counts: np.ndarray
    n: int

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if np.any(c < 0) or int(c.sum()) != int(self.n):
            raise InvalidParameterError("counts must be nonnegative and sum to n")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def from_table(cls, table, n: int) -> "JointType":
        return cls(_as_counts(check_positive_int(n, "n"), table), n)

    @cached_property
    def table(self) -> np.ndarray:
        return self.counts / self.n

    def fractions(self):
        return [[Fraction(int(c), self.n) for c in row] for row in np.atleast_2d(self.counts)]

    def key(self) -> tuple:
        return (self.n, self.counts.shape, tuple(self.counts.ravel().tolist()))

    def transpose(self) -> "JointType":
        return JointType(self.counts.T, self.n)

    def __eq__(self, other):
        return isinstance(other, JointType) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"JointType(n={self.n}, counts={self.counts.tolist()})"


def _fill(rows, cols):
    """Yield all nonnegative integer matrices with the given margins."""
    k, m = len(rows), len(cols)
    mat = np.zeros((k, m), dtype=np.int64)

    def rec(i, j, rrem, crem):
        if i == k:
            yield mat.copy()
            return
        if j == m - 1:
            v = rrem[i]
            if v > crem[j]:
                return
            mat[i, j] = v
            crem[j] -= v
            yield from rec(i + 1, 0, rrem, crem)
            crem[j] += v
            return
        # the rest of the row must fit into the remaining columns
        lo = max(0, rrem[i] - sum(crem[j + 1:]))
        hi = min(rrem[i], crem[j])
        for v in range(lo, hi + 1):
            mat[i, j] = v
            rrem[i] -= v
            crem[j] -= v
            yield from rec(i, j + 1, rrem, crem)
            rrem[i] += v
            crem[j] += v

    yield from rec(0, 0, list(rows), list(cols))


def enumerate_joint_types(n: int, composition) -> list[JointType]:
    """All n-types on X x X with both marginals equal to ``composition``.

    The list is sorted lexicographically on the row-major count table.
    """
    n = check_positive_int(n, "n")
    q = _as_counts(n, composition)
    if q.size > MAX_ENUM_ALPHABET:
        raise InvalidParameterError(
            f"alphabet of size {q.size} exceeds the enumeration guard {MAX_ENUM_ALPHABET}"
        )
    out = []
    for mat in _fill(q.tolist(), q.tolist()):
        out.append(JointType(mat, n))
        if len(out) > MAX_ENUM_TYPES:
            raise InvalidParameterError("joint type enumeration exceeds the size guard")
    out.sort(key=lambda t: tuple(t.counts.ravel().tolist()))
    return out


def log_type_class_size(n: int, type_, base=2) -> float:
    """Exact log of the number of sequences (or sequence pairs) of a type."""
    n = check_positive_int(n, "n")
    counts = type_.counts if isinstance(type_, JointType) else _as_counts(n, type_)
    val = gammaln(n + 1) - gammaln(np.asarray(counts, dtype=float) + 1).sum()
    return float(val) / log_unit(base)


def type_class_exponent(n: int, type_, base=2) -> float:
    """The approximation ``n H(P)`` to :func:`log_type_class_size`."""
    n = check_positive_int(n, "n")
    counts = type_.counts if isinstance(type_, JointType) else _as_counts(n, type_)
    return n * entropy(np.asarray(counts, dtype=float) / n, base=base)
