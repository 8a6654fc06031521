import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metricdcov.metrics import (
    DistanceMatrix,
    MetricError,
    MetricSpec,
    SampleSet,
    check_matrix_axioms,
    check_metric_axioms,
    chebyshev,
    discrete,
    distance_matrix,
    euclidean,
    eval_metric,
    load_matrix_csv,
    minkowski,
    parse_metric,
    power_transform,
    precomputed,
    product_sum_metric,
)


def test_eval_examples():
    assert eval_metric(euclidean(), [0, 0], [3, 4]) == 5.0
    assert eval_metric(discrete(), "red", "red") == 0.0
    assert eval_metric(discrete(), "red", "blue") == 1.0
    assert eval_metric(power_transform(euclidean(), 0.5), [0], [4]) == 2.0
    assert eval_metric(power_transform(euclidean(), 0.5), [0], [9]) == 3.0
    assert eval_metric(chebyshev(), [0, 0, 0], [1, -3, 2]) == 3.0
    assert eval_metric(minkowski(1), [0, 0], [1, 1]) == 2.0


def test_eval_errors():
    with pytest.raises(MetricError):
        eval_metric(euclidean(), [0, 0], [1, 2, 3])
    spec = precomputed(np.array([[0, 1], [1, 0]]))
    with pytest.raises(MetricError):
        eval_metric(spec, [0.0, 1.0], [1.0, 0.0])
    assert eval_metric(spec, 0, 1) == 1.0


def test_power_validation():
    for bad in (0, -0.5, 1.5, 2):
        with pytest.raises(MetricError):
            power_transform(euclidean(), bad)
    spec = euclidean()
    assert power_transform(spec, 1) is spec
    composed = power_transform(power_transform(spec, 0.5), 0.5)
    assert composed.power == 0.25
    assert eval_metric(composed, [0], [16]) == 2.0


def test_product_sum_metric():
    s = product_sum_metric(euclidean(), euclidean(), 1)
    assert eval_metric(s, ([0], [0]), ([3], [4])) == 7.0
    s_half = product_sum_metric(euclidean(), euclidean(), 0.5)
    assert eval_metric(s_half, ([0], [0]), ([3], [4])) == pytest.approx(math.sqrt(7), rel=1e-15)
    assert eval_metric(s_half, ([1], [2]), ([1], [2])) == 0.0
    with pytest.raises(MetricError):
        product_sum_metric(euclidean(), euclidean(), 3)


def test_distance_matrix_examples():
    d = distance_matrix(discrete(), SampleSet.labels(["a", "b", "c"]))
    np.testing.assert_array_equal(d.entries, 1 - np.eye(3))
    d1 = distance_matrix(euclidean(), SampleSet.vectors([[7.0, 1.0]]))
    np.testing.assert_array_equal(d1.entries, [[0.0]])
    d3 = distance_matrix(euclidean(), SampleSet.vectors([0.0, 1.0, 3.0]))
    np.testing.assert_array_equal(d3.entries, [[0, 1, 3], [1, 0, 2], [3, 2, 0]])


def test_distance_matrix_pairs():
    xs = SampleSet.vectors([0.0, 3.0])
    ys = SampleSet.vectors([0.0, 4.0])
    d = distance_matrix(product_sum_metric(euclidean(), euclidean(), 0.5), SampleSet.pairs(xs, ys))
    assert d.entries[0, 1] == pytest.approx(math.sqrt(7))


@pytest.mark.parametrize(
    "spec",
    [euclidean(), minkowski(1.5), chebyshev(), power_transform(minkowski(3), 0.5)],
    ids=lambda s: s.describe(),
)
def test_distance_matrix_matches_eval_and_workers(spec):
    rng = np.random.default_rng(3)
    s = SampleSet.vectors(rng.normal(size=(37, 4)))
    d1 = distance_matrix(spec, s, workers=1)
    for k in (2, 3, 8):
        assert np.array_equal(distance_matrix(spec, s, workers=k).entries, d1.entries)
    for i, j in [(0, 1), (5, 30), (36, 2)]:
        assert d1.entries[i, j] == eval_metric(spec, s[i], s[j])
    assert np.array_equal(d1.entries, d1.entries.T)


def test_label_fast_path_matches_eval():
    labels = ["a", "b", "a", "c", "b"]
    d = distance_matrix(discrete(), SampleSet.labels(labels))
    for i in range(5):
        for j in range(5):
            assert d.entries[i, j] == eval_metric(discrete(), labels[i], labels[j])


@settings(max_examples=60, deadline=None)
@given(
    pts=st.lists(
        st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=3, max_size=3),
        min_size=2,
        max_size=6,
    ),
    r=st.floats(0.05, 1.0),
)
def test_power_equals_pow_of_base(pts, r):
    base = minkowski(1.5)
    powered = power_transform(base, r)
    a, b = np.array(pts[0]), np.array(pts[1])
    d = eval_metric(base, a, b)
    assert eval_metric(powered, a, b) == pytest.approx(d ** r, rel=1e-14, abs=0)
    assert eval_metric(powered, a, b) == eval_metric(powered, b, a)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), r=st.sampled_from([1.0, 0.5, 0.3]))
def test_axioms_hold_on_samples(seed, r):
    rng = np.random.default_rng(seed)
    s = SampleSet.vectors(rng.uniform(-10, 10, size=(9, 3)))
    for spec in (euclidean(), minkowski(1.5), chebyshev()):
        rep = check_metric_axioms(power_transform(spec, r), s)
        assert rep.ok, rep


def test_axioms_discrete_pass():
    assert check_metric_axioms(discrete(), SampleSet.labels(list("abcab"))).ok


def test_axioms_detect_violation():
    m = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], dtype=float)
    rep = check_metric_axioms(precomputed(m), SampleSet.indices([0, 1, 2]))
    assert not rep.ok
    assert rep.worst_triple == (0, 1, 2)
    assert rep.triangle_violation == 3.0


def test_axioms_on_raw_nonsymmetric_matrix():
    m = np.array([[0, 1], [2, 0]], dtype=float)
    rep = check_matrix_axioms(m)
    assert not rep.ok and rep.symmetry_violation == 1.0
    with pytest.raises(MetricError):
        DistanceMatrix(m)


def test_distance_matrix_rejects_bad_input():
    with pytest.raises(MetricError):
        DistanceMatrix(np.array([[0, -1], [-1, 0]]))
    with pytest.raises(MetricError):
        DistanceMatrix(np.array([[1, 0], [0, 0]]))


def test_sample_fingerprint_and_immutability():
    a = SampleSet.vectors([[1.0, 2.0], [3.0, 4.0]])
    b = SampleSet.vectors([[1.0, 2.0], [3.0, 4.0]])
    c = SampleSet.vectors([[1.0, 2.0], [3.0, 5.0]])
    assert a.fingerprint() == b.fingerprint() != c.fingerprint()
    with pytest.raises(ValueError):
        a.points[0, 0] = 9.0
    with pytest.raises(MetricError):
        SampleSet.vectors(np.empty((0, 2)))


def test_parse_metric_and_csv(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("0,1,2\n1,0,1\n2,1,0\n")
    spec = parse_metric(f"precomputed:{path}")
    assert spec.kind == "precomputed" and spec.matrix.shape == (3, 3)
    np.testing.assert_array_equal(load_matrix_csv(path), spec.matrix)
    assert parse_metric("minkowski:1.5").p == 1.5
    assert parse_metric("chebyshev", power=0.5).power == 0.5
    assert parse_metric("euclidean").describe() == "euclidean"
    with pytest.raises(MetricError):
        parse_metric("cosine")
    with pytest.raises(MetricError):
        parse_metric("minkowski:0.5")
    assert MetricSpec("minkowski", p=2) == minkowski(2)
