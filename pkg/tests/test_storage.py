import json
import os

import numpy as np
import pytest

from snowembed.apps.labeling import dls_build, dls_query
from snowembed.core.errors import BadParams, EmptyInput
from snowembed.embed.decomposition import build_decomposition
from snowembed.embed.snowflake import pair_table
from snowembed.metric.points import Norm, PointSet


def test_points_csv(storage, tmp_path):
    s = PointSet(np.array([[0.1, 1.0 / 3.0], [2.0, -5e-12]]), norm=Norm.L1, scale=0.7)
    path = storage.save_points(s, "data/points.csv")
    assert path == os.path.join(str(tmp_path), "data/points.csv")
    with open(path, encoding="utf-8") as f:
        assert f.readline().startswith("# norm=1 scale=")
    loaded = storage.load_points("data/points.csv")
    assert np.array_equal(loaded.points, s.points)
    assert loaded.norm is Norm.L1
    assert loaded.scale == 0.7
    assert storage.load_points("data/points.csv", norm="inf").norm is Norm.LINF


def test_points_json(storage):
    s = PointSet(np.array([[1.0], [4.0], [9.0]]), norm=Norm.LINF)
    storage.save_points(s, "points.json")
    loaded = storage.load_points("points.json")
    assert np.array_equal(loaded.points, s.points)
    assert loaded.norm is Norm.LINF


def test_points_errors(storage, tmp_path):
    (tmp_path / "empty.csv").write_text("# norm=2 scale=1\n", encoding="utf-8")
    with pytest.raises(EmptyInput):
        storage.load_points("empty.csv")
    (tmp_path / "broken.json").write_text("{not json", encoding="utf-8")
    with pytest.raises(BadParams):
        storage.load_points("broken.json")


def test_decomposition(storage, grid8):
    d = build_decomposition(grid8, delta=8.0, pad_radius=0.5, eps_pad=0.2, seed=2, c_m=1.0)
    storage.save_decomposition(d, "decomposition.json")
    loaded = storage.load_decomposition("decomposition.json")
    assert np.array_equal(loaded.labels, d.labels)
    assert np.array_equal(loaded.padded_fraction, d.padded_fraction)
    assert loaded.delta == d.delta


def test_embedding_dump(storage, tiny_snowflake):
    json_path, bin_path = storage.save_embedding(tiny_snowflake.header(), tiny_snowflake.images, "dump.json")
    assert os.path.getsize(bin_path) == tiny_snowflake.images.size * 8
    header, images = storage.load_embedding(json_path)
    assert np.array_equal(images, tiny_snowflake.images)
    assert header["kind"] == "snowflake"
    assert header["data"]["shape"] == list(tiny_snowflake.images.shape)


def test_embedding_dump_shape_check(storage, tmp_path):
    storage.save_embedding({"kind": "single-scale"}, np.ones((3, 2)), "short.json")
    (tmp_path / "short.bin").write_bytes(b"\0" * 8)
    with pytest.raises(BadParams):
        storage.load_embedding("short.json")


def test_labels(storage, tiny_snowflake, tmp_path):
    labels = dls_build(tiny_snowflake)
    path = storage.save_labels(labels, "labels.bin")
    assert os.path.getsize(path) == 42 + len(labels) * (8 + 4 * labels.header.k)
    loaded = storage.load_labels("labels.bin")
    assert loaded.header.key == labels.header.key
    assert loaded.header.eps == pytest.approx(0.2, rel=1e-3)
    assert np.array_equal(loaded.codes, labels.codes)
    assert dls_query(loaded[0], loaded[5]).snowflaked == dls_query(labels[0], labels[5]).snowflaked

    raw = (tmp_path / "labels.bin").read_bytes()
    (tmp_path / "bad_magic.bin").write_bytes(b"XXXX" + raw[4:])
    (tmp_path / "partial.bin").write_bytes(raw[:-3])
    (tmp_path / "short.bin").write_bytes(raw[:10])
    for name in ("bad_magic.bin", "partial.bin", "short.bin"):
        with pytest.raises(BadParams):
            storage.load_labels(name)


def test_report_is_deterministic(storage, tiny_snowflake, tmp_path):
    table = pair_table(tiny_snowflake)
    first = storage.save_report(table, {"passed": True}, "a/report.csv")
    second = storage.save_report(table, {"passed": True}, "b/report.csv")
    assert (tmp_path / "a/report.csv").read_bytes() == (tmp_path / "b/report.csv").read_bytes()
    assert json.loads((tmp_path / "a/report.json").read_text(encoding="utf-8")) == {"passed": True}
    assert set(first) == set(second) == {"pairs", "summary"}

    loaded = storage.load_report(first["pairs"])
    assert len(loaded) == len(table)
    assert np.array_equal(loaded.source, table.source)
    assert np.array_equal(loaded.window, table.window)


def test_report_json_only(storage):
    written = storage.save_report(None, {"band": 1.5}, "summary.json", fmt="json")
    assert set(written) == {"summary"}
