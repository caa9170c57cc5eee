import math
from dataclasses import replace

import numpy as np
import pytest

from snowembed.core.errors import BadParams, HeaderMismatch
from snowembed.apps.labeling import (
    DistanceLabel,
    LabelHeader,
    LabelSet,
    dls_build,
    dls_query,
    label_summary,
    nominal_label_bits,
    query_all,
)
from snowembed.embed.snowflake import distortion_audit
from snowembed.utils.helpers import condensed
from snowembed.metric.points import Norm, pairwise_distances


@pytest.fixture(scope="module")
def labels(tiny_snowflake):
    return dls_build(tiny_snowflake)


def test_quantization_step(labels, tiny_snowflake):
    h = labels.header
    assert h.k == tiny_snowflake.stored_dim
    assert h.q == pytest.approx(0.2 * np.abs(tiny_snowflake.images).max() / (2 * h.k))
    assert h.alpha == 0.5
    assert np.abs(labels.codes).max() == round(2 * h.k / 0.2)


def test_dequantize_is_within_half_step(labels, tiny_snowflake):
    for index in range(len(labels)):
        error = np.abs(labels[index].dequantize() - tiny_snowflake.images[index])
        assert error.max() <= labels.header.q / 2 * (1 + 1e-9)


def test_query_same_label_is_zero(labels):
    result = dls_query(labels[3], labels[3])
    assert result.snowflaked == 0.0
    assert result.original == 0.0
    assert result.snowflaked_factor == pytest.approx(1.6)


def test_query_tracks_embedding_distance(labels, tiny_snowflake):
    h = labels.header
    exact = condensed(pairwise_distances(tiny_snowflake.images))
    estimates = np.array([r.snowflaked for r in query_all(labels)])
    assert estimates.shape == exact.shape
    assert np.all(np.abs(estimates - exact) <= math.sqrt(h.k) * h.q * (1 + 1e-9))


def test_query_stays_inside_embedding_band(labels, tiny_snowflake, audit_settings):
    audit = distortion_audit(tiny_snowflake, audit_settings)
    source = condensed(tiny_snowflake.source.distances) ** 0.5
    slack = math.sqrt(labels.header.k) * labels.header.q
    for value, target in zip(query_all(labels), source):
        assert value.snowflaked <= audit.distortion.max_ratio * target + slack
        assert value.snowflaked >= audit.distortion.min_ratio * target - slack
        assert value.original == pytest.approx(value.snowflaked ** 2 * tiny_snowflake.source.scale)


def test_header_mismatch(labels):
    other = LabelSet(labels.header.model_copy(update={"q": labels.header.q * 2}), labels.ids, labels.codes)
    with pytest.raises(HeaderMismatch):
        dls_query(labels[0], other[1])
    # ε 不参与比较
    relaxed = LabelSet(labels.header.model_copy(update={"eps": 0.19}), labels.ids, labels.codes)
    dls_query(labels[0], relaxed[1])


def test_zero_codes():
    header = LabelHeader(k=3, q=0.1, alpha=0.5, M=1.0, scale=2.0, eps=0.1)
    a = DistanceLabel(0, np.zeros(3, dtype=np.int32), header)
    b = DistanceLabel(1, np.array([3, 4, 0], dtype=np.int32), header)
    assert dls_query(a, a).snowflaked == 0.0
    result = dls_query(a, b)
    assert result.snowflaked == pytest.approx(0.5)
    assert result.original == pytest.approx(0.25 * 2.0)
    assert result.snowflaked_factor == pytest.approx(1.3 + math.sqrt(3) * 0.1 / 0.5)
    assert result.original_factor == pytest.approx(result.snowflaked_factor ** 2)


def test_by_id(labels):
    assert labels.by_id(5).point_id == 5
    with pytest.raises(BadParams):
        labels.by_id(999)


def test_label_size(labels, tiny_snowflake):
    h = labels.header
    peak = int(np.abs(labels.codes).max())
    assert labels.bits_per_label == h.k * math.ceil(math.log2(2 * peak + 2))
    assert nominal_label_bits(4, 0.25, 16.0) == pytest.approx(4 * math.log2(16.0 * 32.0))
    summary = label_summary(labels, tiny_snowflake.source.aspect_ratio)
    assert 0.5 <= summary["bits_ratio"] <= 2.0


def test_build_rejects_bad_eps(tiny_snowflake):
    with pytest.raises(BadParams):
        dls_build(tiny_snowflake, eps=0.0)


def test_build_rejects_non_euclidean(tiny_snowflake):
    l1 = replace(tiny_snowflake, params=tiny_snowflake.params.model_copy(update={"norm": Norm.L1}))
    with pytest.raises(BadParams):
        dls_build(l1)
