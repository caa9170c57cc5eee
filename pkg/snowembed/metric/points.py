"""
点集存储与 ℓp 距离。

归一化在读入时只做一次：所有尺度 r、尺度集合 I 都以归一化单位表示，
``scale`` 字段记录除掉的因子，便于还原到原始单位。
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np
from scipy.spatial.distance import cdist

from ..core.errors import BadParams, DuplicatePoints, EmptyInput, IndexOutOfRange

logger = logging.getLogger(__name__)

DUPLICATE_TOL = 1e-12
NORMALIZED_TOL = 1e-9


class Norm(str, Enum):
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"

    @classmethod
    def parse(cls, value: Union[str, int, float, "Norm"]) -> "Norm":
        """接受 1/2/inf、"l1"/"l2"/"linf"、"∞" 等写法"""
        if isinstance(value, Norm):
            return value
        text = str(value).strip().lower()
        aliases = {
            "1": cls.L1, "l1": cls.L1, "1.0": cls.L1,
            "2": cls.L2, "l2": cls.L2, "2.0": cls.L2,
            "inf": cls.LINF, "linf": cls.LINF, "∞": cls.LINF, "l∞": cls.LINF, "infinity": cls.LINF,
        }
        if text not in aliases:
            raise BadParams(f"Unknown norm '{value}'")
        return aliases[text]

    @property
    def metric(self) -> str:
        """scipy cdist 的度量名"""
        return {"l1": "cityblock", "l2": "euclidean", "linf": "chebyshev"}[self.value]

    @property
    def tag(self) -> str:
        """文件头里的写法"""
        return {"l1": "1", "l2": "2", "linf": "inf"}[self.value]

    @property
    def order(self) -> float:
        return {"l1": 1.0, "l2": 2.0, "linf": np.inf}[self.value]


def pairwise_distances(a: np.ndarray, b: Optional[np.ndarray] = None, norm: Norm = Norm.L2) -> np.ndarray:
    """a 与 b（缺省为 a）之间的 ℓp 距离矩阵"""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = a if b is None else np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    return cdist(a, b, metric=Norm.parse(norm).metric)


def vector_norms(x: np.ndarray, norm: Norm = Norm.L2) -> np.ndarray:
    """逐行范数"""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] == 0:
        return np.zeros(x.shape[0])
    return np.linalg.norm(x, ord=Norm.parse(norm).order, axis=1)


@dataclass(frozen=True, eq=False)
class PointSet:
    """
    n 个 d 维点及其范数标签

    Args:
        points: n × d 坐标矩阵
        norm: 范数标签
        scale: 归一化时除掉的因子（原始距离 = 归一化距离 × scale）
    """

    points: np.ndarray
    norm: Norm = Norm.L2
    scale: float = 1.0

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=float, copy=True)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 1:
            raise EmptyInput(f"Point set must be a non-empty n x d matrix, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise BadParams("Point coordinates must be finite")
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise BadParams(f"Scale must be a positive finite number, got {self.scale}")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "norm", Norm.parse(self.norm))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @cached_property
    def distances(self) -> np.ndarray:
        """缓存的全对距离矩阵（只读）"""
        matrix = pairwise_distances(self.points, norm=self.norm)
        matrix.setflags(write=False)
        return matrix

    def distance(self, i: int, j: int) -> float:
        return distance(self, i, j)

    def _check_index(self, i: int) -> int:
        if not isinstance(i, (int, np.integer)) or i < 0 or i >= self.n:
            raise IndexOutOfRange(f"Point index {i} out of range for {self.n} points")
        return int(i)

    def subset(self, indices: Sequence[int]) -> "PointSet":
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size == 0:
            raise EmptyInput("Subset must contain at least one point")
        for i in (idx.min(), idx.max()):
            self._check_index(int(i))
        return PointSet(self.points[idx], norm=self.norm, scale=self.scale)

    @cached_property
    def diameter(self) -> float:
        return float(self.distances.max()) if self.n > 1 else 0.0

    @cached_property
    def min_distance(self) -> float:
        if self.n < 2:
            return 0.0
        d = self.distances
        return float(d[~np.eye(self.n, dtype=bool)].min())

    @property
    def aspect_ratio(self) -> float:
        """直径 / 最小点间距（归一化后即直径）"""
        if self.n < 2:
            return 1.0
        return self.diameter / self.min_distance

    def is_normalized(self, tol: float = NORMALIZED_TOL) -> bool:
        return self.n >= 2 and abs(self.min_distance - 1.0) <= tol

    def denormalize(self, distance_value: float) -> float:
        return float(distance_value) * self.scale


def distance(s: PointSet, i: int, j: int) -> float:
    """
    第 i、j 个点的 ℓp 距离

    Raises:
        IndexOutOfRange: 下标越界
    """
    i = s._check_index(i)
    j = s._check_index(j)
    if i == j:
        return 0.0
    diff = s.points[i] - s.points[j]
    return float(np.linalg.norm(diff, ord=s.norm.order))


def normalize(raw: PointSet) -> PointSet:
    """
    缩放点集使最小点间距为 1

    Args:
        raw: 原始点集

    Returns:
        归一化点集，scale 记录累计的缩放因子

    Raises:
        EmptyInput: 少于 2 个点
        DuplicatePoints: 存在（相对直径）重合的点对
    """
    if raw.n < 2:
        raise EmptyInput(f"Normalization needs at least 2 points, got {raw.n}")
    d = raw.distances
    off_diagonal = d[~np.eye(raw.n, dtype=bool)]
    diameter = float(off_diagonal.max())
    min_d = float(off_diagonal.min())
    if diameter == 0.0 or min_d < DUPLICATE_TOL * diameter:
        i, j = np.unravel_index(np.argmin(d + np.diag(np.full(raw.n, np.inf))), d.shape)
        raise DuplicatePoints("Point set contains coincident points", first=int(i), second=int(j))
    if min_d == 1.0:
        return PointSet(raw.points, norm=raw.norm, scale=raw.scale)
    logger.debug(f"Normalizing {raw.n} points by factor {min_d:.6g}")
    return PointSet(raw.points / min_d, norm=raw.norm, scale=raw.scale * min_d)
