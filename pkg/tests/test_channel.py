import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rgvexp import Channel, DecodingMetric, InvalidParameterError, make_bsc, make_z_channel
from rgvexp.channel import linear_metric, metric_value, unskewed_metric


def test_rows_must_sum_to_one():
    with pytest.raises(InvalidParameterError):
        Channel(np.array([[0.5, 0.4], [0.5, 0.5]]))


def test_negative_entry_rejected():
    with pytest.raises(InvalidParameterError):
        Channel(np.array([[1.1, -0.1], [0.5, 0.5]]))


def test_z_channel_layout():
    W = make_z_channel(0.001).matrix
    assert W[0].tolist() == [1.0, 0.0]
    assert W[1].tolist() == [0.001, 0.999]


def test_matrix_is_read_only():
    ch = make_bsc(0.1)
    with pytest.raises(ValueError):
        ch.matrix[0, 0] = 0.3


def test_json_document_shape():
    doc = make_bsc(0.25).to_dict()
    assert doc == {"inputs": 2, "outputs": 2, "rows": [[0.75, 0.25], [0.25, 0.75]]}


def test_json_shape_mismatch():
    with pytest.raises(InvalidParameterError):
        Channel.from_dict({"inputs": 2, "outputs": 3, "rows": [[1, 0], [0, 1]]})


def test_load_save(tmp_path):
    ch = make_z_channel(0.123456789012345)
    path = tmp_path / "ch.json"
    ch.save(path)
    assert Channel.load(path) == ch


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.data())
def test_json_round_trip_bit_exact(k, l, data):
    rows = []
    for _ in range(k):
        w = data.draw(st.lists(st.floats(0.01, 1.0), min_size=l, max_size=l))
        s = sum(w)
        row = [v / s for v in w]
        row[-1] = 1.0 - sum(row[:-1])
        if row[-1] < 0:
            row[-1] = 0.0
        rows.append(row)
    try:
        ch = Channel(np.array(rows))
    except InvalidParameterError:
        return
    back = Channel.from_json(ch.to_json())
    assert np.array_equal(back.matrix, ch.matrix)


def test_likelihood_metric_minus_inf_on_zero_entry():
    ch = make_z_channel(0.001)
    joint = np.array([[0.25, 0.25], [0.0, 0.5]])
    assert unskewed_metric(DecodingMetric("likelihood", 1.0), joint, ch) == -math.inf


def test_metric_value_scales_with_skew():
    ch = make_bsc(0.1)
    joint = np.array([[0.4, 0.1], [0.1, 0.4]])
    g1 = metric_value(DecodingMetric("likelihood", 1.0), joint, ch, base="e")
    g3 = metric_value(DecodingMetric("likelihood", 3.0), joint, ch, base="e")
    assert g3 == pytest.approx(3 * g1)
    assert g1 == pytest.approx(0.8 * math.log(0.9) + 0.2 * math.log(0.1))


def test_metric_value_refuses_infinite_skew():
    with pytest.raises(InvalidParameterError):
        metric_value(DecodingMetric.ml(), np.eye(2) / 2, make_bsc(0.1))


def test_mutual_information_metric():
    joint = np.array([[0.5, 0.0], [0.0, 0.5]])
    assert metric_value(DecodingMetric("mutual-information", 1.0), joint, make_bsc(0.1)) == pytest.approx(1.0)


def test_unknown_metric_kind():
    with pytest.raises(InvalidParameterError):
        DecodingMetric("hamming")


def test_linear_metric_ignores_empty_cells():
    table = np.array([[0.0, -np.inf], [-1.0, -2.0]])
    joint = np.array([[0.5, 0.0], [0.25, 0.25]])
    assert linear_metric(table, joint) == pytest.approx(-0.75)
