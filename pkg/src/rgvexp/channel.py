"""Discrete memoryless channels and decoding metrics."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import (
    InvalidParameterError,
    as_joint,
    as_stochastic,
    log_unit,
)

METRIC_KINDS = ("likelihood", "skewed-likelihood", "mismatched", "mutual-information")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Channel:
    """A DMC given by its row-stochastic transition matrix ``W[x, y]``."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(as_stochastic(self.matrix, "channel")))

    @property
    def input_alphabet_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def output_alphabet_size(self) -> int:
        return self.matrix.shape[1]

    def __eq__(self, other):
        return isinstance(other, Channel) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())

    def __repr__(self):
        return f"Channel({self.matrix.tolist()!r})"

    def log_matrix(self) -> np.ndarray:
        """Natural log of W with ``-inf`` where W is zero."""
        with np.errstate(divide="ignore"):
            return np.log(self.matrix)

    def to_dict(self) -> dict:
        return {
            "inputs": self.input_alphabet_size,
            "outputs": self.output_alphabet_size,
            "rows": self.matrix.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Channel":
        try:
            k, l, rows = int(doc["inputs"]), int(doc["outputs"]), doc["rows"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidParameterError(f"malformed channel document: {exc}") from exc
        arr = np.asarray(rows, dtype=float)
        if arr.shape != (k, l):
            raise InvalidParameterError(
                f"channel rows have shape {arr.shape}, header says ({k}, {l})"
            )
        return cls(arr)

    def to_json(self) -> str:
        # repr of a float is the shortest string that round-trips exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Channel":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidParameterError(f"channel JSON does not parse: {exc}") from exc
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> "Channel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")


def make_z_channel(crossover: float) -> Channel:
    """Z-channel: input 0 is received cleanly, input 1 flips to 0 w.p. ``crossover``."""
    w = float(crossover)
    if not 0.0 <= w <= 1.0:
        raise InvalidParameterError(f"crossover must lie in [0, 1], got {crossover!r}")
    return Channel(np.array([[1.0, 0.0], [w, 1.0 - w]]))


def make_bsc(crossover: float) -> Channel:
    p = float(crossover)
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"crossover must lie in [0, 1], got {crossover!r}")
    return Channel(np.array([[1.0 - p, p], [p, 1.0 - p]]))


@dataclass(frozen=True)
class DecodingMetric:
    """Metric ``g`` of the generalized likelihood decoder.

    ``skew = inf`` selects the deterministic argmax decoder (ML for the
    likelihood kinds, MMI for ``mutual-information``).
    """

    kind: str = "likelihood"
    skew: float = math.inf
    mismatch_channel: Channel | None = field(default=None, compare=True)

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise InvalidParameterError(
                f"unknown metric kind {self.kind!r}; expected one of {METRIC_KINDS}"
            )
        skew = float(self.skew)
        if math.isnan(skew) or skew < 0:
            raise InvalidParameterError(f"skew must be >= 0, got {self.skew!r}")
        object.__setattr__(self, "skew", skew)
        if (self.kind == "mismatched") != (self.mismatch_channel is not None):
            raise InvalidParameterError(
                "mismatch_channel must be given exactly when kind is 'mismatched'"
            )

    @classmethod
    def ml(cls) -> "DecodingMetric":
        return cls("likelihood", math.inf)

    @classmethod
    def mmi(cls) -> "DecodingMetric":
        return cls("mutual-information", math.inf)

    @property
    def is_argmax(self) -> bool:
        return math.isinf(self.skew)

    @property
    def uses_likelihood(self) -> bool:
        return self.kind != "mutual-information"

    def decoding_channel(self, channel: Channel) -> Channel:
        return self.mismatch_channel if self.kind == "mismatched" else channel

    def log_table(self, channel: Channel) -> np.ndarray | None:
        """``log W'`` in nats for likelihood kinds, ``None`` for MMI."""
        if not self.uses_likelihood:
            return None
        dec = self.decoding_channel(channel)
        if dec.matrix.shape != channel.matrix.shape:
            raise InvalidParameterError("mismatch channel has the wrong shape")
        return dec.log_matrix()

    def with_skew(self, skew: float) -> "DecodingMetric":
        return DecodingMetric(self.kind, skew, self.mismatch_channel)


def linear_metric(table: np.ndarray, joint: np.ndarray) -> float:
    """``sum P * table`` where cells with zero mass contribute nothing."""
    mask = joint > 0
    if not mask.any():
        return 0.0
    return float(np.sum(joint[mask] * table[mask]))


def unskewed_metric(metric: DecodingMetric, joint: np.ndarray, channel: Channel) -> float:
    """Skew-free metric value in nats (used internally for argmax limits)."""
    from .measures import mutual_information

    if metric.uses_likelihood:
        return linear_metric(metric.log_table(channel), joint)
    return mutual_information(joint, base="e")


def metric_value(metric: DecodingMetric, joint, channel: Channel, base=2) -> float:
    """Evaluate ``g(P_XY)`` in units of ``log base``.

    Returns ``-inf`` for likelihood kinds when ``joint`` charges a cell
    where the decoding channel vanishes.
    """
    if metric.is_argmax:
        raise InvalidParameterError(
            "metric_value needs a finite skew; the argmax limit is handled by the decoders"
        )
    p = as_joint(joint)
    if p.shape != channel.matrix.shape:
        raise InvalidParameterError(
            f"joint shape {p.shape} does not match channel {channel.matrix.shape}"
        )
    val = unskewed_metric(metric, p, channel)
    if metric.skew == 0:
        return 0.0
    return metric.skew * val / log_unit(base)
