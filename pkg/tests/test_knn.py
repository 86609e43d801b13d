import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from signbench.knn import (
    EUCLIDEAN, MANHATTAN, DistanceMetric, KnnModel, distance, knn_evaluate, knn_predict,
    knn_predict_many, pairwise_distances, vote_nearest,
)

MINK3 = DistanceMetric("minkowski", 3)


def _histograms(rng, n, k=20):
    h = rng.random((n, k))
    return h / h.sum(axis=1, keepdims=True)


def full_sort_oracle(refs, labels, q, k, order):
    """Sort every reference by (distance, index), then vote with the documented tie rule."""
    dists = [(float(mpmath.fsum(abs(mpmath.mpf(a) - mpmath.mpf(b)) ** order for a, b in zip(r, q))
                    ** (mpmath.mpf(1) / order)), i) for i, r in enumerate(refs)]
    dists.sort()
    top = dists[:k]
    votes = {}
    for d, i in top:
        c = int(labels[i])
        n, first = votes.get(c, (0, d))
        votes[c] = (n + 1, min(first, d))
    return min(votes, key=lambda c: (-votes[c][0], votes[c][1], c))


def test_distance_examples():
    assert distance([0, 0], [3, 4], EUCLIDEAN) == 5.0
    assert distance([0, 0, 0], [1, 1, 1], MANHATTAN) == 3.0
    expected = float(mpmath.cbrt(9))
    assert distance([0, 0], [1, 2], MINK3) == pytest.approx(expected, abs=1e-12)
    assert round(expected, 6) == 2.080084


def test_distance_errors():
    with pytest.raises(ValueError):
        distance([0, 0], [1, 2, 3])
    with pytest.raises(ValueError):
        DistanceMetric("minkowski", 0.5)
    with pytest.raises(ValueError):
        DistanceMetric.parse("cosine")


def test_parse_and_labels():
    assert DistanceMetric.parse("L1") == MANHATTAN
    assert DistanceMetric.parse("euclidean") == EUCLIDEAN
    assert DistanceMetric.parse("minkowski:3") == MINK3
    assert [m.label for m in (MANHATTAN, EUCLIDEAN, MINK3)] == ["L1", "L2", "minkowski3"]


def test_minkowski_special_orders():
    rng = np.random.default_rng(0)
    for _ in range(100):
        p, q = rng.normal(size=(2, 16))
        assert abs(distance(p, q, DistanceMetric("minkowski", 1)) - distance(p, q, MANHATTAN)) <= 1e-9
        assert abs(distance(p, q, DistanceMetric("minkowski", 2)) - distance(p, q, EUCLIDEAN)) <= 1e-9


@pytest.mark.parametrize("order", [1, 1.5, 2, 3])
def test_metric_axioms(order):
    m = DistanceMetric("minkowski", order)
    rng = np.random.default_rng(int(order * 10))
    for _ in range(200):
        a, b, c = rng.normal(size=(3, 8))
        assert distance(a, a, m) == 0
        assert abs(distance(a, b, m) - distance(b, a, m)) <= 1e-12
        assert distance(a, c, m) <= distance(a, b, m) + distance(b, c, m) + 1e-9


def test_pairwise_matches_scalar_and_chunks():
    rng = np.random.default_rng(1)
    q, r = rng.random((13, 7)), rng.random((29, 7))
    for m in (MANHATTAN, EUCLIDEAN, MINK3):
        full = pairwise_distances(q, r, m)
        tiny = pairwise_distances(q, r, m, chunk_bytes=1)
        np.testing.assert_array_equal(full, tiny)
        assert full[4, 9] == pytest.approx(distance(q[4], r[9], m), abs=1e-15)


@pytest.mark.parametrize("metric, order", [(MANHATTAN, 1), (EUCLIDEAN, 2), (MINK3, 3)])
def test_predictions_match_full_sort_oracle(metric, order):
    rng = np.random.default_rng(order)
    refs = _histograms(rng, 200)
    labels = rng.integers(0, 4, 200)
    queries = _histograms(rng, 25)
    model = KnnModel(refs, labels)
    for k in (1, 3, 5):
        got = knn_predict_many(model, queries, k, metric)
        want = [full_sort_oracle(refs, labels, q, k, order) for q in queries]
        np.testing.assert_array_equal(got, want)


def test_vote_rules():
    d = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
    assert vote_nearest(d, np.array([0, 0, 1, 1, 1]), 5) == 1
    # 2-2 tie: class 1's nearest member is closer
    assert vote_nearest(d[:4], np.array([1, 0, 0, 1]), 4) == 1
    # 1-1 tie at equal distance: lower class wins
    assert vote_nearest(np.array([0.5, 0.5]), np.array([3, 2]), 2) == 2
    # distance tie between references: lower reference index kept for k=1
    assert vote_nearest(np.array([0.2, 0.1, 0.1]), np.array([0, 5, 4]), 1) == 5


def test_predict_examples_and_errors():
    refs = np.eye(3)
    model = KnnModel(refs, [2, 0, 1])
    assert knn_predict(model, [0.9, 0.1, 0], 1) == 2
    with pytest.raises(ValueError):
        knn_predict(model, [1, 0, 0], 0)
    with pytest.raises(ValueError):
        knn_predict(model, [1, 0, 0], 4)
    with pytest.raises(ValueError):
        KnnModel(np.zeros((2, 3)), [0])


def test_evaluate_examples():
    rng = np.random.default_rng(3)
    refs = rng.random((30, 5))
    labels = rng.integers(0, 3, 30)
    model = KnnModel(refs, labels)
    assert knn_evaluate(model, refs, labels, 1) == 1.0
    assert knn_evaluate(model, refs, (labels + 1) % 3, 1) == 0.0
    with pytest.raises(ValueError):
        knn_evaluate(model, np.zeros((0, 5)), [], 1)


def test_all_one_class_with_k_equal_n():
    rng = np.random.default_rng(4)
    model = KnnModel(rng.random((12, 4)), np.full(12, 2))
    assert set(knn_predict_many(model, rng.random((20, 4)), 12).tolist()) == {2}


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 3, 5]))
def test_reference_permutation_invariance(seed, k):
    rng = np.random.default_rng(seed)
    refs = rng.random((40, 6))
    labels = rng.integers(0, 3, 40)
    q = rng.random((10, 6))
    perm = rng.permutation(40)
    a = knn_predict_many(KnnModel(refs, labels), q, k, EUCLIDEAN)
    b = knn_predict_many(KnnModel(refs[perm], labels[perm]), q, k, EUCLIDEAN)
    np.testing.assert_array_equal(a, b)
