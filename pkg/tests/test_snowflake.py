import json
import math
from decimal import Decimal, getcontext

import numpy as np
import pytest

from snowembed.core.config import EmbeddingSettings
from snowembed.core.errors import BadParams, IndexOutOfRange
from snowembed.embed.snowflake import (
    build_snowflake,
    compute_m,
    distortion_audit,
    group_count,
    log_steps,
    nominal_scale_dimension,
    pair_table,
    scale_plan,
)
from snowembed.metric.generators import generate, ultrametric_distances
from snowembed.metric.points import PointSet, normalize


def test_log_steps_and_group_count():
    assert log_steps(0.1) == 25
    assert log_steps(0.25) == 7
    assert group_count(0.1, 0.5) == 150
    assert group_count(0.1, 0.9) == 750
    assert group_count(0.2, 0.5) == 54


def test_compute_m_two_terms():
    expected = (1 - math.exp(-1)) + 1.1 ** 2 * (1 - math.exp(-1.1 ** -2))
    assert compute_m(0.1, 2) == pytest.approx(expected, rel=1e-14)


def test_compute_m_against_decimal_oracle():
    getcontext().prec = 50
    base = Decimal("1.1")
    oracle = Decimal(0)
    for b in range(-74, 76):
        oracle += base ** b * (1 - (-(base ** (-2 * b))).exp())
    assert compute_m(0.1, 150, alpha=0.5) == pytest.approx(float(oracle), rel=1e-11)


def test_compute_m_other_norms():
    assert compute_m(0.1, 1, norm="linf") == pytest.approx(1.0)
    assert compute_m(0.1, 1, norm="l1") == pytest.approx(1 - math.exp(-1))
    with pytest.raises(BadParams):
        compute_m(0.1, 0)


def test_scale_plan_two_points(two_points):
    plan = scale_plan(two_points, alpha=0.5, eps=0.1)
    assert plan.p == 150
    assert plan.i_min == -120
    assert plan.i_max == 120
    assert plan.delta == pytest.approx(1.1 ** -75)
    assert plan.normaliser == pytest.approx(math.sqrt(plan.M))
    assert plan.divisor(2) == pytest.approx(1.1)


def test_scale_plan_validation(two_points):
    with pytest.raises(BadParams):
        scale_plan(two_points, alpha=1.0, eps=0.1)
    with pytest.raises(BadParams):
        scale_plan(two_points, alpha=0.5, eps=0.3)


def test_target_dim_is_independent_of_n():
    settings = EmbeddingSettings(c_m=1.0, dim_override=2.0)
    dims = []
    for n in (24, 48):
        s = normalize(generate("subspace", {"n": n, "intrinsic": 2, "ambient": 10}, seed=5))
        e = build_snowflake(s, alpha=0.5, eps=0.25, seed=1, settings=settings)
        assert e.target_dim == e.params.p * e.k_per_scale
        dims.append(e.target_dim)
    assert dims[0] == dims[1]
    assert nominal_scale_dimension(0.2, 0.01, 2.0, settings=settings) < \
        nominal_scale_dimension(0.1, 0.01, 2.0, settings=settings)


def test_tiny_snowflake_shape(tiny_snowflake, tiny_grid):
    e = tiny_snowflake
    assert e.params.p == 54
    assert e.target_dim == e.params.p * e.nominal_scale_dim
    assert set(e.scale_images) == set(e.params.scales)
    assert len(e.group_columns) == min(e.params.p, len(e.params.scales))
    assert e.images.shape == (tiny_grid.n, e.stored_dim)
    assert all(rec.lemma_ok for rec in e.scales)
    json.dumps(e.header())


def test_tiny_snowflake_audit(tiny_snowflake, audit_settings):
    audit = distortion_audit(tiny_snowflake, audit_settings)
    assert audit.band is not None
    assert audit.band <= 1 + 16 * 0.2
    assert audit.band_ok
    assert audit.tail["tail_violations"] == 0
    assert audit.dominance["dominance_violations"] == 0
    assert audit.passed


def test_pair_table_flags(tiny_snowflake):
    table = pair_table(tiny_snowflake)
    assert len(table) == 16 * 15 // 2
    assert table.window.all()
    assert np.allclose(table.ratio, table.image / np.sqrt(table.source))


def test_evaluate(tiny_snowflake):
    assert np.array_equal(tiny_snowflake.evaluate(0), tiny_snowflake.images[0])
    with pytest.raises(IndexOutOfRange):
        tiny_snowflake.evaluate(16)
    with pytest.raises(IndexOutOfRange):
        tiny_snowflake.evaluate(-1)
    assert np.allclose(tiny_snowflake.denormalized_images(), tiny_snowflake.images)


def test_build_is_deterministic():
    s = normalize(generate("line", {"n": 3}))
    settings = EmbeddingSettings(c_m=1.0)
    a = build_snowflake(s, alpha=0.5, eps=0.25, seed=8, settings=settings)
    b = build_snowflake(s, alpha=0.5, eps=0.25, seed=8, settings=settings)
    assert np.array_equal(a.images, b.images)
    assert a.header() == b.header()


def test_alpha_seven_tenths(tiny_grid, audit_settings):
    e = build_snowflake(tiny_grid, alpha=0.7, eps=0.2, seed=3, settings=EmbeddingSettings())
    assert e.params.p == group_count(0.2, 0.7)
    audit = distortion_audit(e, audit_settings)
    assert audit.band <= 1 + 16 * 0.2
    assert audit.passed


def test_square_root_of_squared_ultrametric():
    s = normalize(generate("ultrametric", {"depth": 3, "power": 2.0}))
    e = build_snowflake(s, alpha=0.5, eps=0.25, seed=2, settings=EmbeddingSettings(c_m=1.0))
    table = pair_table(e)
    tree = ultrametric_distances(3)[table.i, table.j]
    assert np.ptp(np.sqrt(table.source) / tree) < 1e-9
    ratio = table.image / tree
    assert ratio.max() / ratio.min() <= 1 + 16 * 0.25


def test_scaling_moves_images_by_power_of_alpha(audit_settings):
    s = normalize(generate("line", {"n": 5}))
    doubled = PointSet(2.0 * s.points)
    settings = EmbeddingSettings(c_m=1.0, dim_override=1.0)
    base = build_snowflake(s, alpha=0.5, eps=0.25, seed=4, settings=settings)
    scaled = build_snowflake(doubled, alpha=0.5, eps=0.25, seed=4, settings=settings)
    growth = pair_table(scaled).image / pair_table(base).image
    assert np.exp(np.mean(np.log(growth))) == pytest.approx(2 ** 0.5, rel=0.25)
    assert distortion_audit(scaled, audit_settings).location == \
        pytest.approx(distortion_audit(base, audit_settings).location, rel=0.25)


def test_grid_with_sparse_top_scales(audit_settings):
    # δ = 1.1⁻⁷⁵，i ≥ 100 的尺度上网是真子集，需要延拓
    s = normalize(generate("grid", {"side": 6}))
    e = build_snowflake(s, alpha=0.5, eps=0.1, seed=0, settings=EmbeddingSettings(c_m=1.0))
    assert max(e.params.scales) > 100
    audit = distortion_audit(e, audit_settings)
    assert audit.band <= 2.6
