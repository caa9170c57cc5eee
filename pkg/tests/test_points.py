import numpy as np
import pytest

from snowembed.core.errors import BadParams, DuplicatePoints, EmptyInput, IndexOutOfRange
from snowembed.metric.points import Norm, PointSet, distance, normalize, pairwise_distances


@pytest.mark.parametrize("norm, expected", [(Norm.L2, 5.0), (Norm.L1, 7.0), (Norm.LINF, 4.0)])
def test_distance_by_norm(norm, expected):
    s = PointSet(np.array([[0.0, 0.0], [3.0, 4.0]]), norm=norm)
    assert distance(s, 0, 1) == pytest.approx(expected)
    assert distance(s, 1, 0) == pytest.approx(expected)
    assert distance(s, 1, 1) == 0.0


def test_distance_rejects_bad_index():
    s = PointSet(np.array([[0.0], [1.0]]))
    with pytest.raises(IndexOutOfRange):
        distance(s, 0, 2)
    with pytest.raises(IndexOutOfRange):
        s.distance(-1, 0)


@pytest.mark.parametrize("text, norm", [("2", Norm.L2), ("l1", Norm.L1), ("inf", Norm.LINF), ("∞", Norm.LINF)])
def test_norm_parse(text, norm):
    assert Norm.parse(text) is norm


def test_norm_parse_unknown():
    with pytest.raises(BadParams):
        Norm.parse("l3")


def test_normalize_two_points_on_line():
    s = normalize(PointSet(np.array([[0.0], [5.0]])))
    assert s.scale == pytest.approx(5.0)
    assert s.distance(0, 1) == pytest.approx(1.0)


def test_normalize_three_points():
    s = normalize(PointSet(np.array([[0.0], [2.0], [10.0]])))
    assert s.scale == pytest.approx(2.0)
    assert sorted(s.distances[np.triu_indices(3, 1)]) == pytest.approx([1.0, 4.0, 5.0])


def test_normalize_is_identity_on_normalized_set(line10):
    again = normalize(line10)
    assert again.scale == line10.scale == 1.0
    assert np.array_equal(again.points, line10.points)


def test_normalize_rejects_duplicates_and_tiny_sets():
    with pytest.raises(DuplicatePoints):
        normalize(PointSet(np.array([[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]])))
    with pytest.raises(EmptyInput):
        normalize(PointSet(np.array([[1.0]])))


def test_pointset_validation():
    with pytest.raises(EmptyInput):
        PointSet(np.zeros((0, 2)))
    with pytest.raises(BadParams):
        PointSet(np.array([[np.nan, 0.0]]))
    with pytest.raises(BadParams):
        PointSet(np.array([[0.0]]), scale=0.0)


def test_metric_axioms_on_random_set():
    rng = np.random.default_rng(0)
    for norm in Norm:
        s = PointSet(rng.normal(size=(15, 4)), norm=norm)
        d = s.distances
        assert np.allclose(d, d.T)
        assert np.all(d >= 0)
        through = d[:, :, None] + d[None, :, :]
        assert np.all(d[:, None, :] <= through * (1 + 1e-9) + 1e-12)


def test_subset_and_aspect_ratio(line10):
    sub = line10.subset([0, 9])
    assert sub.n == 2
    assert sub.diameter == pytest.approx(9.0)
    assert line10.aspect_ratio == pytest.approx(9.0)
    assert line10.is_normalized()
    assert line10.denormalize(2.0) == pytest.approx(2.0)


def test_pairwise_distances_matches_cached_matrix(grid8):
    assert np.allclose(pairwise_distances(grid8.points, norm=grid8.norm), grid8.distances)
