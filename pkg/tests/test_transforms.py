import math
from decimal import Decimal, getcontext

import numpy as np
import pytest

from snowembed.core.errors import BadParams, ClusterTooLarge, EmptyNetIntersection, Infeasible
from snowembed.embed.transforms import (
    Transform,
    TransformKind,
    cut_decomposition_l1,
    frechet_embed_linf,
    gaussian,
    gaussian_embed,
    laplace,
    merge_cuts,
    threshold,
    transform_value,
)
from snowembed.metric.points import Norm, PointSet, pairwise_distances
from snowembed.utils.helpers import condensed

GRID = np.logspace(-3, 3, 10_000)


def test_gaussian_closed_form():
    getcontext().prec = 40
    oracle = float((1 - Decimal(-1).exp()).sqrt())
    g = Transform(TransformKind.GAUSSIAN, 1.0)
    assert transform_value(g, 0.0) == 0.0
    assert transform_value(g, 1.0) == pytest.approx(oracle, rel=1e-15)
    assert transform_value(Transform(TransformKind.THRESHOLD, 2.0), 5.0) == 2.0


def test_transform_value_rejects_negative():
    with pytest.raises(BadParams):
        transform_value(Transform(TransformKind.LAPLACE, 1.0), -1.0)
    with pytest.raises(BadParams):
        Transform(TransformKind.GAUSSIAN, 0.0)


@pytest.mark.parametrize("r", [0.5, 1.0, 20.0])
def test_gaussian_below_identity_and_scale(r):
    t = GRID * r
    assert np.all(gaussian(t, r) <= np.minimum(t, r) * (1 + 1e-9))


@pytest.mark.parametrize("r", [1.0, 7.0])
def test_gaussian_ratio_nonincreasing(r):
    t = GRID * r
    ratio = gaussian(t, r) / t
    assert np.all(np.diff(ratio) <= 1e-9 * ratio[:-1])


@pytest.mark.parametrize("eta", [0.05, 0.1, 0.2, 0.3])
def test_gaussian_growth_bound(eta):
    r = 3.0
    t = GRID * r
    assert np.all(gaussian((1 + eta) * t, r) / gaussian(t, r) <= (1 + 3 * eta) * (1 + 1e-9))


@pytest.mark.parametrize("r", [0.25, 1.0, 40.0])
def test_laplace_gaussian_identity(r):
    t = GRID * r
    assert np.allclose(laplace(t, r), r * gaussian(np.sqrt(t / r), 1.0) ** 2, rtol=1e-12, atol=0)
    assert np.all(threshold(t, r) == np.minimum(t, r))


def test_transform_kind_for_norm():
    assert TransformKind.for_norm(Norm.L2) is TransformKind.GAUSSIAN
    assert TransformKind.for_norm(Norm.L1).reference == "L_r"
    assert TransformKind.for_norm(Norm.LINF).reference == "T_r"


def test_gaussian_embed_singleton_and_pair():
    single = gaussian_embed(PointSet(np.array([[1.0, 2.0]])), r=1.0)
    assert np.array_equal(single.coordinates, np.zeros((1, 1)))
    pair = gaussian_embed(PointSet(np.array([[0.0], [1.0]])), r=1.0)
    gap = np.linalg.norm(pair.coordinates[0] - pair.coordinates[1])
    assert gap == pytest.approx(math.sqrt(1 - math.exp(-1)), abs=1e-9)
    assert np.all(pair.coordinates[pair.row_of(pair.origin_member)] == 0)


def test_gaussian_embed_random_clusters():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = int(rng.integers(2, 41))
        d = int(rng.integers(2, 65))
        cluster = PointSet(rng.uniform(0, 5, size=(n, d)))
        r = cluster.diameter * rng.uniform(0.5, 2.0)
        e = gaussian_embed(cluster, r, members=np.arange(100, 100 + n))
        got = condensed(pairwise_distances(e.coordinates))
        want = condensed(gaussian(cluster.distances, r))
        assert np.all(np.abs(got - want) <= 1e-7 * want)
        assert e.origin_member == 100


def test_gaussian_embed_needs_l2():
    with pytest.raises(BadParams):
        gaussian_embed(PointSet(np.array([[0.0], [1.0]]), norm=Norm.L1), r=1.0)


def test_cut_decomposition_two_points():
    cuts = cut_decomposition_l1(np.array([[0.0, 2.5], [2.5, 0.0]]))
    assert cuts.weights.tolist() == pytest.approx([2.5])
    assert cuts.subsets.shape == (1, 2)


def test_cut_decomposition_collinear():
    s = PointSet(np.array([[0.0], [1.0], [3.0]]), norm=Norm.L1)
    cuts = cut_decomposition_l1(s.distances)
    assert np.allclose(cuts.reconstruct(), s.distances, atol=1e-9)
    assert sorted(cuts.weights.tolist()) == pytest.approx([1.0, 2.0])


def test_cut_decomposition_random_l1(random_l1):
    s = random_l1.subset(range(6))
    dist = laplace(s.distances, s.diameter)
    cuts = cut_decomposition_l1(dist, tol=1e-6)
    assert np.max(np.abs(cuts.reconstruct() - dist)) <= 1e-6 * dist.max()
    assert np.all(cuts.weights >= 0)


def test_cut_decomposition_rejects_non_l1_metric():
    # K_{2,3} 的最短路度量不满足五边形不等式
    d = np.array([
        [0, 2, 1, 1, 1],
        [2, 0, 1, 1, 1],
        [1, 1, 0, 2, 2],
        [1, 1, 2, 0, 2],
        [1, 1, 2, 2, 0],
    ], dtype=float)
    with pytest.raises(Infeasible):
        cut_decomposition_l1(d)


def test_cut_decomposition_cap():
    with pytest.raises(ClusterTooLarge):
        cut_decomposition_l1(np.zeros((5, 5)), cap=4)


def test_merge_cuts_all_net_is_isometric(random_l1):
    s = random_l1.subset(range(7))
    dist = laplace(s.distances, s.diameter)
    e = merge_cuts(cut_decomposition_l1(dist), np.arange(7))
    got = pairwise_distances(e.coordinates, norm=Norm.L1)
    assert np.allclose(got, dist, atol=1e-6 * dist.max())


def test_merge_cuts_single_net_point(random_l1):
    s = random_l1.subset(range(6))
    dist = laplace(s.distances, s.diameter)
    cuts = cut_decomposition_l1(dist)
    e = merge_cuts(cuts, [2], members=np.arange(10, 16))
    assert e.width <= 2
    assert e.origin_member == 12
    got = pairwise_distances(e.coordinates, norm=Norm.L1)
    assert np.all(got <= cuts.reconstruct() + 1e-9)


def test_merge_cuts_keeps_net_pairs(random_l1):
    s = random_l1.subset(range(8))
    dist = laplace(s.distances, s.diameter)
    cuts = cut_decomposition_l1(dist)
    net = np.array([0, 3, 5])
    e = merge_cuts(cuts, net)
    got = pairwise_distances(e.coordinates, norm=Norm.L1)
    before = cuts.reconstruct()
    assert np.allclose(got[np.ix_(net, net)], before[np.ix_(net, net)], rtol=0, atol=1e-12)
    assert np.all(got <= before + 1e-9)


def test_frechet_pair_and_threshold():
    pair = PointSet(np.array([[0.0, 0.0], [1.5, 0.5]]), norm=Norm.LINF)
    e = frechet_embed_linf(pair, [0, 1], r=2.0)
    assert e.width == 2
    assert np.max(np.abs(e.coordinates[0] - e.coordinates[1])) == pytest.approx(1.5)

    far = PointSet(np.array([[0.0], [6.0]]), norm=Norm.LINF)
    e = frechet_embed_linf(far, [0, 1], r=2.0)
    assert np.max(np.abs(e.coordinates[0] - e.coordinates[1])) == pytest.approx(2.0)


def test_frechet_random_cluster():
    rng = np.random.default_rng(4)
    s = PointSet(rng.uniform(0, 4, size=(8, 3)), norm=Norm.LINF)
    net = np.array([1, 3, 4, 6])
    r = 2.5
    e = frechet_embed_linf(s, net, r)
    got = pairwise_distances(e.coordinates, norm=Norm.LINF)
    assert np.all(got <= s.distances * (1 + 1e-12) + 1e-12)
    assert np.allclose(got[np.ix_(net, net)], threshold(s.distances, r)[np.ix_(net, net)], rtol=1e-12, atol=1e-12)


def test_frechet_needs_net_point():
    with pytest.raises(EmptyNetIntersection):
        frechet_embed_linf(PointSet(np.array([[0.0], [1.0]]), norm=Norm.LINF), [], r=1.0)
