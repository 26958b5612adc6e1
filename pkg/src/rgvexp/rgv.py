"""Finite-length RGV codebooks, the generalized likelihood decoder and ensemble checks.

Randomness comes from a Philox counter-based generator so that a seed fixes
codebooks and decoding decisions across runs and platforms.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from ._validation import (
    ConstructionInfeasibleError,
    InstanceTooLargeError,
    InvalidParameterError,
    check_nonnegative,
    check_positive_int,
    log_unit,
)
from .channel import Channel, DecodingMetric
from .distance import DistanceSpec
from .measures import JointType, _as_counts, enumerate_joint_types

__all__ = [
    "DistanceSpec",
    "RgvParams",
    "RgvCodebook",
    "make_rng",
    "derive_seed",
    "generate_codebook",
    "exact_error_prob",
    "mc_error_prob",
    "MCEstimate",
    "type_enumerator",
    "pair_types",
    "lemma_checks",
]

MAX_DRAWS = 10**6
MAX_OUTPUTS = 10**7


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


def derive_seed(*parts: int) -> int:
    """A 64-bit child seed; distinct ``parts`` give non-overlapping streams."""
    return int(np.random.SeedSequence([int(p) & (2**64 - 1) for p in parts])
               .generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class RgvParams:
    """Blocklength, rate, composition and distance of an RGV construction.

    ``rate`` is in units of ``log base`` and ``M = round(base ** (n * rate))``.
    """

    n: int
    rate: float
    composition: tuple
    distance: DistanceSpec = field(default_factory=DistanceSpec.unconstrained)
    slack: float = 0.0
    seed: int = 0
    base: object = 2

    def __post_init__(self):
        n = check_positive_int(self.n, "n")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "rate", check_nonnegative(self.rate, "rate"))
        object.__setattr__(self, "slack", check_nonnegative(self.slack, "slack"))
        counts = _as_counts(n, self.composition)
        object.__setattr__(self, "composition", tuple(float(c) / n for c in counts))
        if self.M < 2:
            raise InvalidParameterError(f"rate {self.rate} gives M={self.M} < 2 at n={n}")

    @property
    def counts(self) -> np.ndarray:
        return _as_counts(self.n, self.composition)

    @property
    def M(self) -> int:
        return int(round(math.exp(self.n * self.rate * log_unit(self.base))))

    @property
    def alphabet_size(self) -> int:
        return len(self.composition)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "rate": self.rate,
            "composition": list(self.composition),
            "distance": self.distance.to_dict(),
            "slack": self.slack,
            "seed": self.seed,
            "base": self.base if isinstance(self.base, str) else float(self.base),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RgvParams":
        base = doc.get("base", 2)
        return cls(int(doc["n"]), float(doc["rate"]), tuple(doc["composition"]),
                   DistanceSpec.from_dict(doc.get("distance", {})),
                   float(doc.get("slack", 0.0)), int(doc.get("seed", 0)),
                   base if isinstance(base, str) else (int(base) if float(base).is_integer() else base))


@dataclass(frozen=True, eq=False)
class RgvCodebook:
    codewords: np.ndarray
    params: RgvParams

    def __post_init__(self):
        cw = np.array(self.codewords, dtype=np.int64)
        if cw.ndim != 2:
            raise InvalidParameterError("codewords must be a 2-d array")
        cw.setflags(write=False)
        object.__setattr__(self, "codewords", cw)

    @property
    def M(self) -> int:
        return self.codewords.shape[0]

    @property
    def n(self) -> int:
        return self.codewords.shape[1]

    def __eq__(self, other):
        return (isinstance(other, RgvCodebook) and np.array_equal(self.codewords, other.codewords)
                and self.params == other.params)

    def dumps(self) -> str:
        lines = [json.dumps(self.params.to_dict(), sort_keys=True)]
        lines += [" ".join(str(int(s)) for s in row) for row in self.codewords]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RgvCodebook":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise InvalidParameterError("empty codebook document")
        try:
            params = RgvParams.from_dict(json.loads(lines[0]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InvalidParameterError(f"bad codebook header: {exc}") from exc
        rows = [[int(t) for t in ln.split()] for ln in lines[1:]]
        return cls(np.array(rows, dtype=np.int64).reshape(len(rows), params.n), params)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "RgvCodebook":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def _onehot(seqs: np.ndarray, k: int) -> np.ndarray:
    return (seqs[..., None] == np.arange(k)).astype(np.int64)


def pair_types(a: np.ndarray, b: np.ndarray, k: int) -> np.ndarray:
    """Joint count tables of each row of ``a`` against each row of ``b``."""
    return np.einsum("inx,jny->ijxy", _onehot(np.atleast_2d(a), k), _onehot(np.atleast_2d(b), k))


def _distance_ok(spec: DistanceSpec, counts: np.ndarray, n: int, base) -> np.ndarray:
    """Vectorized ``d > Delta`` over a stack of count tables."""
    if not spec.is_active:
        return np.ones(counts.shape[0], dtype=bool)
    return np.array([spec.admits(JointType(c, n), base) for c in counts], dtype=bool)


def generate_codebook(params: RgvParams, max_draws: int = MAX_DRAWS) -> RgvCodebook:
    """Draw codewords one by one, uniformly among admissible sequences of type Q.

    Each candidate is a uniform permutation of the composition multiset; it
    is rejected until its distance to every earlier codeword exceeds the
    threshold, which makes the accepted draw uniform on the admissible set.
    """
    rng = make_rng(params.seed)
    n, k = params.n, params.alphabet_size
    base_seq = np.repeat(np.arange(k), params.counts)
    book = np.empty((params.M, n), dtype=np.int64)
    for i in range(params.M):
        for draw in range(1, max_draws + 1):
            cand = rng.permutation(base_seq)
            if i == 0:
                break
            counts = pair_types(book[:i], cand, k)[:, 0]
            if _distance_ok(params.distance, counts, n, params.base).all():
                break
        else:
            raise ConstructionInfeasibleError(i, max_draws, params.seed)
        book[i] = cand
    return RgvCodebook(book, params)


def check_codebook(codebook: RgvCodebook) -> int:
    """Number of ordered pairs that violate the distance constraint."""
    p = codebook.params
    k = p.alphabet_size
    types = pair_types(codebook.codewords, codebook.codewords, k)
    bad = 0
    for m in range(codebook.M):
        for mm in range(codebook.M):
            if m != mm and not p.distance.admits(JointType(types[m, mm], p.n), p.base):
                bad += 1
    return bad


# ---- decoding ----------------------------------------------------------------

def _metric_scores(metric: DecodingMetric, channel: Channel, counts: np.ndarray, n: int):
    """``n * g(P_hat)`` (without skew) for count tables ``[..., x, y]``.

    Computed from the integer type so that equal types give bit-identical scores.
    """
    if metric.uses_likelihood:
        L = metric.log_table(channel)
        fin = np.isfinite(L)
        body = np.tensordot(counts, np.where(fin, L, 0.0), axes=([-2, -1], [0, 1]))
        bad = np.tensordot(counts, (~fin).astype(np.int64), axes=([-2, -1], [0, 1])) > 0
        return np.where(bad, -np.inf, body)
    c = counts.astype(float)
    px = c.sum(-1, keepdims=True)
    py = c.sum(-2, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(c > 0, c * np.log(c * n / (px * py)), 0.0)
    return terms.sum(axis=(-2, -1))


def _log_posteriors(metric: DecodingMetric, scores: np.ndarray) -> np.ndarray:
    """Log decoding probabilities per message; ``scores`` has messages on axis 0."""
    if metric.is_argmax:
        top = scores.max(axis=0, keepdims=True)
        win = scores == top
        with np.errstate(divide="ignore"):
            return np.log(win / win.sum(axis=0, keepdims=True))
    s = metric.skew * scores if metric.skew > 0 else np.zeros_like(scores)
    finite_any = np.isfinite(s).any(axis=0, keepdims=True)
    s = np.where(finite_any, s, 0.0)  # every metric -inf: decoder is uniform
    return s - logsumexp(s, axis=0, keepdims=True)


def exact_error_prob(codebook: RgvCodebook, channel: Channel, metric: DecodingMetric,
                     chunk: int = 4096) -> float:
    """Exact average error probability of the decoder over all output sequences."""
    cw = codebook.codewords
    M, n = cw.shape
    k, l = channel.matrix.shape
    if M < 2:
        return 0.0
    if float(l) ** n > MAX_OUTPUTS:
        raise InstanceTooLargeError(f"|Y|^n = {l}^{n} exceeds the guard {MAX_OUTPUTS}")
    logW = channel.log_matrix()
    total_terms = []
    for start in range(0, l ** n, chunk):
        idx = np.arange(start, min(start + chunk, l ** n))
        ys = np.stack([(idx // l ** (n - 1 - j)) % l for j in range(n)], axis=1)
        counts = pair_types(cw, ys, max(k, l)) if k == l else _pair_counts(cw, ys, k, l)
        counts = counts[..., :k, :l]
        loglik = np.tensordot(counts, np.where(np.isfinite(logW), logW, -1e300),
                              axes=([-2, -1], [0, 1]))
        loglik = np.where(loglik < -1e299, -np.inf, loglik)
        scores = _metric_scores(metric, channel, counts, n)
        logpost = _log_posteriors(metric, scores)
        # log(1 - post(m|y)) computed stably
        post = np.exp(logpost)
        with np.errstate(divide="ignore"):
            log_err = np.where(post < 0.5, np.log1p(-post), _log_others(logpost))
        total_terms.append(logsumexp(loglik + log_err))
    return float(min(max(math.exp(logsumexp(total_terms)) / M, 0.0), 1.0))


def _log_others(logpost):
    """``log(sum_{m' != m} post(m'|y))`` for each m."""
    M = logpost.shape[0]
    out = np.empty_like(logpost)
    for m in range(M):
        rest = np.delete(logpost, m, axis=0)
        out[m] = logsumexp(rest, axis=0)
    return out


def _pair_counts(a, b, k, l):
    return np.einsum("inx,jny->ijxy", _onehot(a, k), _onehot(b, l))


@dataclass
class MCEstimate:
    estimate: float
    half_width: float
    lower: float
    upper: float
    errors: int
    trials: int

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def mc_error_prob(codebook: RgvCodebook, channel: Channel, metric: DecodingMetric,
                  trials: int, seed=0, confidence=0.95, chunk=20000) -> MCEstimate:
    """Monte Carlo error frequency with a Wilson score interval."""
    if isinstance(trials, bool) or int(trials) != trials or int(trials) <= 0:
        raise InvalidParameterError(f"trials must be a positive integer, got {trials!r}")
    trials = int(trials)
    rng = make_rng(seed)
    cw = codebook.codewords
    M, n = cw.shape
    k, l = channel.matrix.shape
    cdf = np.cumsum(channel.matrix, axis=1)
    cdf[:, -1] = 1.0
    errors = 0
    done = 0
    while done < trials:
        b = min(chunk, trials - done)
        msgs = rng.integers(0, M, size=b)
        u = rng.random((b, n))
        rows = cdf[cw[msgs]]  # (b, n, l)
        ys = (u[..., None] >= rows).sum(axis=-1)
        ys = np.minimum(ys, l - 1)
        counts = _pair_counts(cw, ys, k, l)  # (M, b, k, l)
        scores = _metric_scores(metric, channel, counts, n)
        logpost = _log_posteriors(metric, scores)  # (M, b)
        # sample the decision by inverse CDF over messages
        post = np.exp(logpost)
        cum = np.cumsum(post, axis=0)
        cum[-1] = np.maximum(cum[-1], 1.0)
        v = rng.random(b)
        dec = (v[None, :] >= cum).sum(axis=0)
        errors += int(np.count_nonzero(dec != msgs))
        done += b
    ci = stats.binomtest(errors, trials).proportion_ci(confidence_level=confidence, method="wilson")
    est = errors / trials
    return MCEstimate(est, float(ci.high - ci.low) / 2, float(ci.low), float(ci.high), errors, trials)


# ---- type enumerators and ensemble checks -------------------------------------

def type_enumerator(codebook: RgvCodebook, joint) -> int:
    """Number of ordered pairs ``m != m'`` whose joint type equals ``joint``."""
    n = codebook.n
    jt = joint if isinstance(joint, JointType) else JointType.from_table(joint, n)
    if jt.n != n:
        raise InvalidParameterError(f"joint type has n={jt.n}, codebook n={n}")
    k = jt.counts.shape[0]
    types = pair_types(codebook.codewords, codebook.codewords, k)
    hit = np.all(types == jt.counts, axis=(-2, -1))
    np.fill_diagonal(hit, False)
    return int(hit.sum())


def _type_class(params: RgvParams, limit=10**6):
    counts = params.counts
    n = params.n
    size = math.factorial(n)
    for c in counts:
        size //= math.factorial(int(c))
    if size > limit:
        return None
    base_seq = tuple(np.repeat(np.arange(len(counts)), counts).tolist())
    seqs = sorted(set(itertools.permutations(base_seq))) if n <= 10 else None
    if seqs is None:
        # lexicographic multiset permutations without materializing n! tuples
        seqs = list(_multiset_perms(list(counts)))
    return np.array(seqs, dtype=np.int64)


def _multiset_perms(counts):
    n = sum(counts)
    out = []

    def rec(prefix):
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        for s, c in enumerate(counts):
            if c:
                counts[s] -= 1
                prefix.append(s)
                rec(prefix)
                prefix.pop()
                counts[s] += 1

    rec([])
    return out


def lemma_checks(params: RgvParams, replications: int, alpha=0.01) -> dict:
    """Empirical checks of the construction's distributional properties.

    (a) shrinkage of the admissible set along sampled construction paths,
    (b) chi-square uniformity of each codeword's marginal on the type class,
    (c) pair-type frequencies against the two-sided moment bounds.
    """
    from .exponents import ExponentProblem, check_keycond
    from .channel import make_bsc

    replications = check_positive_int(replications, "replications")
    n, k, M = params.n, params.alphabet_size, params.M
    unit = log_unit(params.base)
    delta = params.slack
    shrink = math.exp(-n * delta * unit)
    tc = _type_class(params)
    report = {"params": params.to_dict(), "replications": replications, "M": M}

    books = []
    for r in range(replications):
        p = RgvParams(n, params.rate, params.composition, params.distance, params.slack,
                      derive_seed(params.seed, r), params.base)
        books.append(generate_codebook(p))
    report["distance_violations"] = int(sum(check_codebook(b) for b in books))

    # keycond on the continuous polytope (channel is irrelevant here)
    prob = ExponentProblem(make_bsc(0.1) if k == 2 else _dummy_channel(k), params.composition,
                           rate=params.rate, distance=params.distance, base=params.base,
                           slack=params.slack)
    kc = check_keycond(prob, params.slack)
    report["keycond"] = {"holds": kc.holds, "margin": kc.margin}

    if tc is None:
        report["shrinkage"] = {"skipped": True, "reason": "type class larger than 10^6"}
        report["uniformity"] = {"skipped": True}
    else:
        T = tc.shape[0]
        index = {tuple(s): i for i, s in enumerate(tc.tolist())}
        # (a) admissible-set sizes along each path
        lo_bound = (1.0 - shrink) * T
        violations, worst = 0, math.inf
        for b in books:
            for i in range(1, M):
                tab = pair_types(b.codewords[:i], tc, k)  # (i, T, k, k)
                ok = np.ones(T, dtype=bool)
                if params.distance.is_active:
                    uniq = {}
                    for a in range(i):
                        for t in range(T):
                            key = tab[a, t].tobytes()
                            if key not in uniq:
                                uniq[key] = params.distance.admits(JointType(tab[a, t], n), params.base)
                            ok[t] &= uniq[key]
                size = int(ok.sum())
                worst = min(worst, size / T)
                if size < lo_bound - 1e-9 or size > T:
                    violations += 1
        report["shrinkage"] = {
            "skipped": False,
            "checked": kc.holds,
            "type_class_size": T,
            "lower_bound_fraction": 1.0 - shrink,
            "worst_fraction": worst,
            "violations": violations,
            "holds": violations == 0,
        }
        # (b) chi-square per codeword index
        per_index = []
        for i in range(M):
            freq = np.zeros(T)
            for b in books:
                freq[index[tuple(b.codewords[i].tolist())]] += 1
            res = stats.chisquare(freq)
            per_index.append({"index": i, "statistic": float(res.statistic),
                              "p_value": float(res.pvalue), "pass": bool(res.pvalue >= alpha)})
        report["uniformity"] = {"skipped": False, "alpha": alpha, "per_index": per_index,
                                "holds": all(e["pass"] for e in per_index)}

    # (c) pair-type frequency of (1, 2) against the sandwich bounds
    types = enumerate_joint_types(n, params.composition)
    dn = shrink / (1.0 - shrink) if shrink < 1 else math.inf
    logT = _log_multinomial(n, params.counts)
    pair_rows = []
    hits = {t.key(): 0 for t in types}
    for b in books:
        c = pair_types(b.codewords[0], b.codewords[1], k)[0, 0]
        hits[JointType(c, n).key()] += 1
    for t in types:
        if not params.distance.admits(t, params.base):
            continue
        L = math.exp(_log_multinomial(n, t.counts.ravel()) - 2 * logT)
        lo = (1 - 4 * dn * dn) * math.exp(-2 * dn) * L if dn < 0.5 else 0.0
        hi = L / (1.0 - shrink) ** 2 if shrink < 1 else math.inf
        cnt = hits[t.key()]
        ci = stats.binomtest(cnt, replications).proportion_ci(confidence_level=0.99, method="wilson")
        pair_rows.append({"type": t.counts.tolist(), "empirical": cnt / replications,
                          "lower": lo, "upper": hi, "ci": [float(ci.low), float(ci.high)],
                          "consistent": bool(ci.high >= lo and ci.low <= hi)})
    report["pair_probability"] = {"delta_n": dn, "rows": pair_rows,
                                  "holds": all(r["consistent"] for r in pair_rows)}

    # type-enumerator means against exp{n(2R - I)}
    enum_rows = []
    poly = (n + 1) ** (k * k)
    for t in types:
        if not params.distance.admits(t, params.base):
            continue
        mean = float(np.mean([type_enumerator(b, t) for b in books]))
        from .measures import mutual_information
        target = math.exp(n * (2 * params.rate * unit - mutual_information(t.table, "e")))
        enum_rows.append({"type": t.counts.tolist(), "mean": mean, "scaling": target,
                          "within": bool(target / poly <= mean <= target * poly)})
    report["enumerator_scaling"] = {"factor": poly, "rows": enum_rows,
                                    "holds": all(r["within"] for r in enum_rows)}
    return report


def _log_multinomial(n, counts) -> float:
    return math.lgamma(n + 1) - sum(math.lgamma(int(c) + 1) for c in counts)


def _dummy_channel(k):
    return Channel(np.eye(k))
