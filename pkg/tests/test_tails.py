import math

import numpy as np
import pytest

from rgvexp import DecodingMetric, DistanceSpec, ExponentProblem, alpha, gamma, make_bsc
from rgvexp.tails import (
    TailProblem,
    beta_fn,
    condition_flags,
    lambda_fn,
    lower_tail_lower,
    lower_tail_upper,
    tail_condition_report,
    upper_tail_lower,
    upper_tail_upper,
)

R = 0.2


def sym(u):
    return np.array([[u, 0.5 - u], [0.5 - u, u]])


@pytest.fixture(scope="module")
def cc(zchan):
    p = ExponentProblem(zchan, (0.5, 0.5), DecodingMetric.ml(), rate=R, base="e",
                        grid_resolution=16)
    return TailProblem(p, 0.0)


@pytest.fixture(scope="module")
def rgv(cc):
    return TailProblem(cc.base.with_distance(DistanceSpec("neg-mutual-information", -R)), 0.0)


@pytest.mark.parametrize("u", [0.05, 0.15, 0.3, 0.45])
def test_lambda_equals_gamma_on_z_channel(zproblem, u):
    assert lambda_fn(sym(u), R, zproblem) == pytest.approx(gamma(sym(u), R, zproblem), abs=1e-9)


@pytest.mark.parametrize("py", [[0.5, 0.5], [0.3, 0.7]])
def test_beta_at_least_alpha(py):
    p = ExponentProblem(make_bsc(0.1), (0.5, 0.5), base="e")
    for rate in (0.05, 0.3):
        assert beta_fn(rate, py, p) >= alpha(rate, py, p) - 1e-9


def test_beta_mi_metric_is_max_of_rate_and_largest_information():
    p = ExponentProblem(make_bsc(0.1), (0.5, 0.5), DecodingMetric("mutual-information", 1.0))
    # the diagonal coupling carries one full bit
    assert beta_fn(0.3, [0.5, 0.5], p) == pytest.approx(1.0, abs=1e-6)
    assert beta_fn(1.0, [0.5, 0.5], p) == pytest.approx(1.0, abs=1e-6)


def test_lower_tail_below_e0_min_is_empty(cc):
    for which in (lower_tail_upper, lower_tail_lower):
        v = which(cc.with_e0(0.1))
        assert v.value == math.inf
        assert v.empty and v.flags == ["empty"]


def test_lower_tail_vanishes_at_large_e0(cc):
    v = lower_tail_upper(cc.with_e0(1.0))
    assert v.value == pytest.approx(0.0, abs=1e-9)
    assert not v.empty


def test_lower_tail_bounds_ordered_and_nonincreasing(cc):
    ups = [lower_tail_upper(cc.with_e0(e)).value for e in (0.25, 0.35, 0.45)]
    lows = [lower_tail_lower(cc.with_e0(e)).value for e in (0.25, 0.35, 0.45)]
    assert all(b <= a + 1e-9 for a, b in zip(ups, ups[1:]))
    # Lambda = Gamma here, so both bounds coincide
    assert lows == pytest.approx(ups, abs=1e-6)


def test_lower_tail_known_value(cc):
    # the minimizer sits at I = 2R + E0 - Gamma with Gamma = 0 at the diagonal corner
    assert lower_tail_upper(cc.with_e0(0.2)).value == pytest.approx(0.29314718056, abs=1e-6)


def test_upper_tail_empty_at_small_e0(cc):
    for which in (upper_tail_upper, upper_tail_lower):
        v = which(cc.with_e0(0.1)) if which is upper_tail_upper else which(cc.with_e0(0.1), False)
        assert v.value == 0.0 and v.empty


def test_upper_tail_capped_by_rate(cc):
    for e in (0.6, 1.0, 1.4):
        v = upper_tail_upper(cc.with_e0(e))
        assert 0.0 <= v.value <= R + 1e-12
    assert upper_tail_upper(cc.with_e0(1.0)).value == pytest.approx(R, abs=1e-9)


def test_upper_tail_lower_never_exceeds_2r(cc):
    for e in (0.6, 1.4):
        assert upper_tail_lower(cc.with_e0(e), check_domain=False).value <= 2 * R + 1e-12


def test_upper_tail_lower_domain_flag(rgv):
    inside = upper_tail_lower(rgv.with_e0(0.6))
    outside = upper_tail_lower(rgv.with_e0(0.75))
    assert not inside.out_of_domain
    assert outside.out_of_domain and "out-of-domain" in outside.flags


def test_rgv_lower_tail_is_empty_until_expurgated(rgv):
    assert lower_tail_upper(rgv.with_e0(0.6)).value == math.inf
    assert lower_tail_upper(rgv.with_e0(0.75)).value == pytest.approx(0.0, abs=1e-9)


def test_distance_constraint_shrinks_upper_tail(cc, rgv):
    for e in (0.6, 0.7):
        assert upper_tail_upper(rgv.with_e0(e)).value <= upper_tail_upper(cc.with_e0(e)).value + 1e-9


def test_condition_report_structure(rgv):
    rep = tail_condition_report(rgv.with_e0(0.7))
    for key in ("keycond", "condkeyb", "condkeyc", "ek1cond", "condkeymu", "cond0", "ek1condmod"):
        assert key in rep
        assert isinstance(rep[key]["holds"], bool)
    assert rep["keycond"]["holds"]
    flags = condition_flags(rep)
    assert flags.startswith("keycond=pass;")
    assert flags.count("=") == 5


def test_condition_report_vacuous_without_distance(cc):
    rep = tail_condition_report(cc.with_e0(0.7))
    assert rep["keycond"]["vacuous"]
    assert rep["keycond"]["holds"]
    assert rep["keycond"]["margin"] == math.inf


def test_negative_e0_rejected(cc):
    from rgvexp import InvalidParameterError

    with pytest.raises(InvalidParameterError):
        cc.with_e0(-0.1)
