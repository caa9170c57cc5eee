from itertools import combinations

import numpy as np
import pytest

from snowembed.apps.clustering import cluster_demo, covering_radius, k_center
from snowembed.core.errors import BadParams
from snowembed.embed.snowflake import distortion_audit
from snowembed.metric.points import Norm


def test_k_center_on_line(line10):
    centers, radius = k_center(line10.points, 2)
    assert centers.tolist() == [0, 9]
    assert radius == pytest.approx(4.0)
    _, radius = k_center(line10.points, line10.n)
    assert radius == 0.0


def test_k_center_is_two_approximation():
    rng = np.random.default_rng(6)
    points = rng.uniform(0, 10, size=(9, 2))
    distances = np.abs(points[:, None, :] - points[None, :, :]).sum(axis=2)
    optimum = min(covering_radius(distances, np.array(c)) for c in combinations(range(9), 3))
    centers, radius = k_center(points, 3, Norm.L1)
    assert radius == pytest.approx(covering_radius(distances, centers))
    assert radius <= 2 * optimum + 1e-12


def test_k_center_validation(line10):
    with pytest.raises(BadParams):
        k_center(line10.points, 0)
    with pytest.raises(BadParams):
        k_center(line10.points, 11)


def test_cluster_demo(tiny_snowflake, audit_settings):
    result = cluster_demo(tiny_snowflake, 3)
    assert len(result["original_centers"]) == len(result["embedded_centers"]) == 3
    assert result["original_radius"] > 0
    band = distortion_audit(tiny_snowflake, audit_settings).band
    assert 0 < result["ratio"] <= (2 * band) ** 2
