import numpy as np
import pytest

from snowembed.core.config import AuditSettings, EmbeddingSettings
from snowembed.embed.snowflake import build_snowflake
from snowembed.metric.generators import generate
from snowembed.metric.points import Norm, PointSet, normalize
from snowembed.storage.manager import Manager


@pytest.fixture
def embedding_settings():
    return EmbeddingSettings()


@pytest.fixture
def audit_settings():
    return AuditSettings()


@pytest.fixture
def line10():
    return normalize(generate("line", {"n": 10}))


@pytest.fixture
def grid8():
    return normalize(generate("grid", {"side": 8}))


@pytest.fixture
def grid10():
    return normalize(generate("grid", {"side": 10}))


@pytest.fixture
def two_points():
    return normalize(PointSet(np.array([[0.0, 0.0], [3.0, 4.0]])))


@pytest.fixture
def random_l1():
    rng = np.random.default_rng(7)
    return normalize(PointSet(rng.uniform(0, 10, size=(12, 3)), norm=Norm.L1))


@pytest.fixture
def random_linf():
    rng = np.random.default_rng(11)
    return normalize(PointSet(rng.uniform(0, 10, size=(40, 3)), norm=Norm.LINF))


@pytest.fixture(scope="session")
def tiny_grid():
    return normalize(generate("grid", {"side": 4}))


@pytest.fixture(scope="session")
def tiny_snowflake(tiny_grid):
    """4×4 网格上的雪花嵌入（ε = 0.2），多个测试共享"""
    return build_snowflake(tiny_grid, alpha=0.5, eps=0.2, seed=3, settings=EmbeddingSettings())


@pytest.fixture
def storage(tmp_path):
    return Manager(str(tmp_path))
