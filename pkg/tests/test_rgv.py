import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cases import tiny_instances
from oracles import frac_matrix, mi_direct, pe_bruteforce
from rgvexp import (
    Channel,
    ConstructionInfeasibleError,
    DecodingMetric,
    DistanceSpec,
    InstanceTooLargeError,
    InvalidParameterError,
    RgvCodebook,
    RgvParams,
    exact_error_prob,
    make_bsc,
    make_z_channel,
    mc_error_prob,
    type_enumerator,
)
from rgvexp.measures import enumerate_joint_types
from rgvexp.rgv import check_codebook, generate_codebook, lemma_checks, pair_types

HALF = (0.5, 0.5)
# four-output hand enumeration, see oracles.pe_bruteforce
PE_BSC_01_10 = 0.10975609756097561


def neg_i(thr):
    return DistanceSpec("neg-mutual-information", thr)


def book(rows, n=None, comp=HALF):
    rows = np.array(rows)
    n = rows.shape[1]
    return RgvCodebook(rows, RgvParams(n, 1.0, comp))


# ---- construction ---------------------------------------------------------------

def test_params_validation():
    with pytest.raises(InvalidParameterError):
        RgvParams(4, 0.1, HALF)  # M = 1
    with pytest.raises(InvalidParameterError):
        RgvParams(5, 0.5, HALF)  # not a 5-type
    with pytest.raises(InvalidParameterError):
        RgvParams(0, 0.5, HALF)
    assert RgvParams(8, 0.25, HALF).M == 4


def test_unconstrained_pair_from_type_class():
    b = generate_codebook(RgvParams(4, 0.25, HALF, seed=3))
    assert b.M == 2
    for row in b.codewords:
        assert sorted(row.tolist()) == [0, 0, 1, 1]


def test_unconstrained_marginal_uniform_on_six_sequences():
    rep = lemma_checks(RgvParams(4, 0.25, HALF, seed=0), replications=600)
    uni = rep["uniformity"]
    assert rep["shrinkage"]["type_class_size"] == 6
    assert uni["holds"]
    assert rep["shrinkage"]["holds"]


def test_neg_mi_constraint_holds_on_1000_runs():
    worst = -math.inf
    for seed in range(1000):
        b = generate_codebook(RgvParams(8, 0.25, HALF, neg_i(-0.5), seed=seed))
        assert check_codebook(b) == 0
        types = pair_types(b.codewords, b.codewords, 2)
        for m in range(4):
            for mm in range(4):
                if m != mm:
                    worst = max(worst, mi_direct((types[m, mm] / 8).tolist(), 2.0))
    assert worst < 0.5


def test_infeasible_threshold_raises():
    # -I <= 0 for every pair, so no second codeword exists
    with pytest.raises(ConstructionInfeasibleError) as err:
        generate_codebook(RgvParams(4, 0.25, HALF, neg_i(0.0), seed=5), max_draws=200)
    assert err.value.index == 1


def test_generation_is_deterministic():
    p = RgvParams(8, 0.25, HALF, neg_i(-0.35), slack=0.05, seed=42)
    assert generate_codebook(p) == generate_codebook(p)
    other = RgvParams(8, 0.25, HALF, neg_i(-0.35), slack=0.05, seed=43)
    assert generate_codebook(p) != generate_codebook(other)


def test_codebook_round_trip(tmp_path):
    p = RgvParams(8, 0.25, HALF, DistanceSpec("hamming", 0.2), slack=0.01, seed=9)
    b = generate_codebook(p)
    assert RgvCodebook.loads(b.dumps()) == b
    path = tmp_path / "cb.txt"
    b.save(path)
    assert RgvCodebook.load(path) == b
    first = path.read_text().splitlines()[1]
    assert first == " ".join(str(s) for s in b.codewords[0])


def test_bad_codebook_header():
    with pytest.raises(InvalidParameterError):
        RgvCodebook.loads("not json\n0 1\n")


# ---- exact error probability ---------------------------------------------------------

def test_exact_two_codewords_hand_value():
    b = book([[0, 1], [1, 0]])
    pe = exact_error_prob(b, make_bsc(0.1), DecodingMetric("likelihood", 1.0))
    assert pe == pytest.approx(PE_BSC_01_10, rel=1e-12)
    W = [[0.9, 0.1], [0.1, 0.9]]
    assert pe_bruteforce([[0, 1], [1, 0]], W, "likelihood", 1.0) == pytest.approx(
        PE_BSC_01_10, rel=1e-12)


@pytest.mark.parametrize("idx", range(24))
def test_exact_matches_bruteforce(idx):
    c = tiny_instances()[idx]
    cw = np.array(c["codewords"])
    got = exact_error_prob(RgvCodebook(cw, RgvParams(2, 1.0, HALF)), Channel(np.array(c["W"])),
                           DecodingMetric(c["kind"], c["skew"]))
    want = pe_bruteforce(c["codewords"], c["W"], c["kind"], c["skew"], frac_matrix(c["W"]))
    assert got == pytest.approx(want, rel=1e-10, abs=1e-300)


def test_noiseless_ml_is_zero():
    b = book([[0, 0, 1, 1], [1, 1, 0, 0], [0, 1, 0, 1]])
    assert exact_error_prob(b, Channel(np.eye(2)), DecodingMetric.ml()) == 0.0


def test_single_message_is_zero():
    b = book([[0, 1]])
    assert exact_error_prob(b, make_bsc(0.1), DecodingMetric.ml()) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.permutations([0, 1, 2]), st.sampled_from([1.0, 2.0, math.inf]))
def test_relabeling_messages(perm, skew):
    rows = [[0, 0, 1], [1, 0, 0], [0, 1, 1]]
    ch = make_z_channel(0.3)
    m = DecodingMetric("likelihood", skew)
    a = exact_error_prob(book(rows, comp=(1 / 3, 2 / 3)), ch, m)
    b = exact_error_prob(book([rows[i] for i in perm], comp=(1 / 3, 2 / 3)), ch, m)
    assert a == pytest.approx(b, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.integers(0, 1), min_size=3, max_size=3), min_size=2, max_size=4),
       st.floats(0.01, 0.49))
def test_exact_in_unit_interval(rows, p):
    pe = exact_error_prob(book(rows, comp=(1 / 3, 2 / 3)), make_bsc(p), DecodingMetric("likelihood", 1.0))
    assert 0.0 <= pe <= 1.0


def test_output_guard():
    b = book(np.zeros((2, 24), dtype=int).tolist())
    with pytest.raises(InstanceTooLargeError):
        exact_error_prob(b, make_bsc(0.1), DecodingMetric.ml())


# ---- Monte Carlo -----------------------------------------------------------------

def test_mc_rejects_zero_trials():
    with pytest.raises(InvalidParameterError):
        mc_error_prob(book([[0, 1], [1, 0]]), make_bsc(0.1), DecodingMetric.ml(), trials=0)


def test_mc_single_trial_is_bernoulli():
    for seed in range(5):
        est = mc_error_prob(book([[0, 1], [1, 0]]), make_bsc(0.3), DecodingMetric.ml(), 1, seed)
        assert est.estimate in (0.0, 1.0)
        assert est.trials == 1


def test_mc_noiseless_is_zero():
    b = book([[0, 0, 1, 1], [1, 1, 0, 0]])
    est = mc_error_prob(b, Channel(np.eye(2)), DecodingMetric.ml(), 2000, seed=1)
    assert est.estimate == 0.0 and est.errors == 0


def test_mc_deterministic_and_consistent():
    b = book([[0, 1, 1], [1, 0, 1], [1, 1, 0]], comp=(1 / 3, 2 / 3))
    ch, m = make_bsc(0.2), DecodingMetric("likelihood", 1.0)
    a = mc_error_prob(b, ch, m, 20000, seed=4)
    assert a == mc_error_prob(b, ch, m, 20000, seed=4)
    exact = exact_error_prob(b, ch, m)
    assert abs(a.estimate - exact) < 4 * a.half_width
    assert a.lower <= a.estimate <= a.upper


# ---- type enumerators --------------------------------------------------------------

def test_enumerator_two_codewords():
    b = generate_codebook(RgvParams(4, 0.25, HALF, seed=1))
    types = enumerate_joint_types(4, HALF)
    counts = [type_enumerator(b, t) for t in types]
    assert sum(counts) == 2
    for t in types:
        if np.array_equal(t.counts, t.counts.T):
            assert type_enumerator(b, t) in (0, 2)
        else:
            pair = type_enumerator(b, t) + type_enumerator(b, t.counts.T / 4)
            assert pair in (0, 2)


@pytest.mark.parametrize("seed", range(5))
def test_enumerator_partitions_pairs(seed):
    b = generate_codebook(RgvParams(6, 0.4, HALF, neg_i(-0.6), seed=seed))
    total = sum(type_enumerator(b, t) for t in enumerate_joint_types(6, HALF))
    assert total == b.M * (b.M - 1)


def test_enumerator_rejects_non_type():
    b = generate_codebook(RgvParams(4, 0.25, HALF, seed=1))
    with pytest.raises(InvalidParameterError):
        type_enumerator(b, [[0.3, 0.2], [0.2, 0.3]])


# ---- lemma checks ---------------------------------------------------------------

def test_lemma_checks_shrinkage_on_twenty_sequences():
    # n = 6: |T(Q)| = 20; R and delta chosen so keycond holds
    R, d = 0.2, 0.05
    rep = lemma_checks(RgvParams(6, R, HALF, neg_i(-(R + 2 * d)), slack=d, seed=3), 200)
    assert rep["keycond"]["holds"]
    assert rep["shrinkage"]["type_class_size"] == 20
    assert rep["shrinkage"]["holds"]
    assert rep["distance_violations"] == 0


def test_lemma_checks_negative_control():
    # eight codewords in a 20-sequence class where each one rules out two others:
    # keycond fails and the admissible set shrinks far below the bound
    rep = lemma_checks(RgvParams(6, 0.5, HALF, neg_i(-0.1), slack=0.3, seed=3), 100)
    assert not rep["keycond"]["holds"]
    assert not rep["shrinkage"]["holds"]
    assert rep["shrinkage"]["violations"] > 0


def test_lemma_checks_skip_large_type_class():
    rep = lemma_checks(RgvParams(30, 0.04, HALF, seed=1), 2)
    assert rep["shrinkage"]["skipped"]
    assert rep["uniformity"]["skipped"]
