"""Type-dependent distance functionals used by the RGV construction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._validation import InvalidParameterError, log_unit
from .measures import JointType, mutual_information

DISTANCE_KINDS = ("neg-mutual-information", "hamming", "bhattacharyya", "custom-table")
_ALIASES = {"neg-mi": "neg-mutual-information", "-I": "neg-mutual-information"}


def _fraction_key(table) -> tuple:
    if isinstance(table, JointType):
        return tuple(Fraction(int(c), table.n) for c in table.counts.ravel())
    arr = np.asarray(table, dtype=float)
    return tuple(Fraction(float(v)).limit_denominator(10**6) for v in arr.ravel())


@dataclass(frozen=True, eq=False)
class DistanceSpec:
    """Distance ``d(P_XX')`` together with its threshold ``Delta``.

    Pairs of sequences are admissible when ``d > threshold``. A threshold of
    ``-inf`` switches the constraint off (plain constant-composition codes).
    Mutual-information and Bhattacharyya values are measured in units of the
    caller's log base; Hamming distance is a fraction of positions.
    """

    kind: str = "neg-mutual-information"
    threshold: float = -math.inf
    table: dict | None = None
    channel: object = field(default=None, repr=False)

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in DISTANCE_KINDS:
            raise InvalidParameterError(f"unknown distance kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        th = float(self.threshold)
        if math.isnan(th):
            raise InvalidParameterError("distance threshold is NaN")
        object.__setattr__(self, "threshold", th)
        if kind == "bhattacharyya" and self.channel is None:
            raise InvalidParameterError("bhattacharyya distance needs a channel")
        if kind == "custom-table":
            if not self.table:
                raise InvalidParameterError("custom-table distance needs a table")
            norm = {}
            for key, val in self.table.items():
                norm[tuple(Fraction(v) for v in key)] = float(val)
            object.__setattr__(self, "table", norm)
            self._check_symmetric()

    def _ident(self):
        table = tuple(sorted(self.table.items())) if self.table else None
        return (self.kind, self.threshold, table, self.channel)

    def __eq__(self, other):
        return isinstance(other, DistanceSpec) and self._ident() == other._ident()

    def __hash__(self):
        return hash(self._ident())

    @classmethod
    def unconstrained(cls) -> "DistanceSpec":
        return cls("neg-mutual-information", -math.inf)

    @property
    def is_active(self) -> bool:
        return self.threshold > -math.inf

    def with_threshold(self, threshold: float) -> "DistanceSpec":
        return DistanceSpec(self.kind, threshold, self.table, self.channel)

    def _check_symmetric(self):
        for key, val in self.table.items():
            k = math.isqrt(len(key))
            if k * k != len(key):
                raise InvalidParameterError("custom-table keys must be square tables")
            tkey = tuple(np.array(key, dtype=object).reshape(k, k).T.ravel())
            if tkey in self.table and self.table[tkey] != val:
                raise InvalidParameterError("custom-table distance is not symmetric")

    def _bhattacharyya_matrix(self) -> np.ndarray:
        w = np.asarray(getattr(self.channel, "matrix", self.channel), dtype=float)
        with np.errstate(divide="ignore"):
            return -np.log(np.sqrt(w[:, None, :] * w[None, :, :]).sum(axis=2))

    def value(self, joint, base=2) -> float:
        """Evaluate ``d`` on a joint table or a :class:`JointType`."""
        if self.kind == "custom-table":
            key = _fraction_key(joint)
            if key not in self.table:
                raise InvalidParameterError(f"joint type {key} missing from the distance table")
            return self.table[key]
        p = joint.table if isinstance(joint, JointType) else np.asarray(joint, dtype=float)
        if self.kind == "neg-mutual-information":
            return -mutual_information(p, base="e") / log_unit(base)
        if self.kind == "hamming":
            return float(p.sum() - np.trace(p))
        db = self._bhattacharyya_matrix()
        pos = p > 0
        return float(np.sum(p[pos] * db[pos])) / log_unit(base)

    def admits(self, joint, base=2, tol=1e-12) -> bool:
        """Strict test ``d > threshold`` with a tiny guard against round-off."""
        if not self.is_active:
            return True
        d = self.value(joint, base)
        return d > self.threshold + tol * max(1.0, abs(self.threshold))

    def to_dict(self) -> dict:
        doc = {"kind": self.kind, "threshold": self.threshold}
        if self.table is not None:
            doc["table"] = [[[str(f) for f in k], v] for k, v in self.table.items()]
        return doc

    @classmethod
    def from_dict(cls, doc: dict, channel=None) -> "DistanceSpec":
        table = doc.get("table")
        if table is not None:
            table = {tuple(Fraction(f) for f in k): v for k, v in table}
        return cls(doc.get("kind", "neg-mutual-information"),
                   float(doc.get("threshold", -math.inf)), table, channel)
