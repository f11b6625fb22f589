import numpy as np
import pytest

from errest.kmeans import KMeansError, kmeans


def wcss(X, labels, centers):
    return float(sum(((X[labels == j] - centers[j]) ** 2).sum() for j in range(len(centers))))


def test_separated_clouds(rng):
    X = np.vstack([rng.normal(0, 0.2, (30, 2)), rng.normal(8, 0.2, (40, 2))])
    res = kmeans(X, 2, seed=1)
    assert len(set(res.labels[:30])) == 1
    assert len(set(res.labels[30:])) == 1
    assert res.labels[0] != res.labels[-1]


def test_objective_monotone_nonincreasing(rng):
    for trial in range(10):
        X = rng.standard_normal((80, 3))
        res = kmeans(X, 5, seed=trial)
        hist = np.asarray(res.history)
        assert np.all(np.diff(hist) <= 1e-9 * hist[0])


def test_inertia_matches_labels(rng):
    X = rng.standard_normal((50, 2))
    res = kmeans(X, 4, seed=3)
    assert res.inertia <= wcss(X, res.labels, res.centers) + 1e-9


def test_deterministic(rng):
    X = rng.standard_normal((40, 2))
    a = kmeans(X, 3, seed=9)
    b = kmeans(X, 3, seed=9)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.centers, b.centers)


def test_k_equals_distinct_points():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    res = kmeans(X, 3, seed=0)
    assert sorted(np.bincount(res.labels).tolist()) == [1, 1, 1]


def test_too_few_distinct_rows():
    X = np.zeros((5, 2))
    with pytest.raises(KMeansError, match="distinct"):
        kmeans(X, 2, seed=0)
