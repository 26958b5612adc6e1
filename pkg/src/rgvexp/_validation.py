"""Input checking helpers shared by the public modules."""

from __future__ import annotations

import math

import numpy as np

ATOL = 1e-12


class InvalidParameterError(ValueError):
    """Raised when an argument violates a documented precondition."""


class ConstructionInfeasibleError(RuntimeError):
    """The codebook sampler ran out of its rejection budget."""

    def __init__(self, index: int, draws: int, seed=None):
        self.index = index
        self.draws = draws
        self.seed = seed
        super().__init__(
            f"no admissible codeword found for index {index} after {draws} draws"
            + (f" (seed {seed})" if seed is not None else "")
        )


class InstanceTooLargeError(ValueError):
    """Exact enumeration would exceed the configured guard."""


def log_unit(base) -> float:
    """Natural log of the logarithm base (``'e'`` or a positive number)."""
    if base in ("e", "nats", None):
        return 1.0
    b = float(base)
    if not b > 1.0:
        raise InvalidParameterError(f"log base must exceed 1, got {base!r}")
    return math.log(b)


def as_distribution(p, name="distribution", atol=ATOL) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidParameterError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(arr)) or np.any(arr < -atol):
        raise InvalidParameterError(f"{name} has negative or non-finite entries")
    if abs(arr.sum() - 1.0) > max(atol, 1e-12 * arr.size):
        raise InvalidParameterError(f"{name} sums to {arr.sum()!r}, not 1")
    return np.clip(arr, 0.0, None)


def as_joint(p, name="joint", atol=ATOL) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.ndim < 2 or arr.size == 0:
        raise InvalidParameterError(f"{name} must be at least two-dimensional")
    if not np.all(np.isfinite(arr)) or np.any(arr < -atol):
        raise InvalidParameterError(f"{name} has negative or non-finite entries")
    if abs(arr.sum() - 1.0) > max(atol, 1e-12 * arr.size):
        raise InvalidParameterError(f"{name} sums to {arr.sum()!r}, not 1")
    return np.clip(arr, 0.0, None)


def as_stochastic(mat, name="matrix", atol=ATOL) -> np.ndarray:
    """Validate a row-stochastic matrix and return it as a float array."""
    arr = np.asarray(mat, dtype=float)
    if arr.ndim != 2 or 0 in arr.shape:
        raise InvalidParameterError(f"{name} must be a non-empty 2-d array")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise InvalidParameterError(f"{name} entries must lie in [0, 1]")
    bad = np.abs(arr.sum(axis=1) - 1.0) > atol
    if np.any(bad):
        raise InvalidParameterError(
            f"{name} rows {np.flatnonzero(bad).tolist()} do not sum to 1"
        )
    return arr


def check_marginals(joint: np.ndarray, q: np.ndarray, atol=1e-9) -> None:
    if joint.shape != (q.size, q.size):
        raise InvalidParameterError(
            f"joint shape {joint.shape} does not match composition size {q.size}"
        )
    if np.max(np.abs(joint.sum(axis=1) - q)) > atol or np.max(
        np.abs(joint.sum(axis=0) - q)
    ) > atol:
        raise InvalidParameterError("joint marginals differ from the composition")


def check_nonnegative(x, name) -> float:
    x = float(x)
    if math.isnan(x) or x < 0:
        raise InvalidParameterError(f"{name} must be nonnegative, got {x!r}")
    return x


def check_positive_int(x, name) -> int:
    if isinstance(x, bool) or int(x) != x or int(x) <= 0:
        raise InvalidParameterError(f"{name} must be a positive integer, got {x!r}")
    return int(x)
