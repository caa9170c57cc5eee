"""
合成倍增点集生成器

所有生成器对固定种子是确定的，返回未归一化的点集（scale = 1）。
"""

import logging
from typing import Any, Dict, Mapping, Optional, Type, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..core.errors import BadParams, UnknownKind
from .points import Norm, PointSet

logger = logging.getLogger(__name__)


class _GeneratorParams(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LineParams(_GeneratorParams):
    n: int = Field(default=10, ge=1)
    spacing: float = Field(default=1.0, gt=0)


class GridParams(_GeneratorParams):
    side: int = Field(default=8, ge=1)
    dim: int = Field(default=2, ge=1, le=6)


class SubspaceParams(_GeneratorParams):
    n: int = Field(default=200, ge=1)
    intrinsic: int = Field(default=3, ge=1)
    ambient: int = Field(default=50, ge=1)
    noise: float = Field(default=0.0, ge=0)
    extent: float = Field(default=10.0, gt=0)


class BallParams(_GeneratorParams):
    n: int = Field(default=100, ge=1)
    dim: int = Field(default=3, ge=1)
    radius: float = Field(default=10.0, gt=0)


class UltrametricParams(_GeneratorParams):
    depth: int = Field(default=4, ge=1, le=12)
    ratio: float = Field(default=2.0, ge=1.0)
    power: float = Field(default=1.0, gt=0)


def ultrametric_heights(depth: int, ratio: float = 2.0, power: float = 1.0) -> np.ndarray:
    """h[ℓ] 为最近公共祖先在第 ℓ 层的两片叶子之间的距离，h[0] = 0"""
    levels = np.arange(1, depth + 1, dtype=float)
    return np.concatenate([[0.0], (ratio ** (levels - 1.0)) ** power])


def ultrametric_distances(depth: int, ratio: float = 2.0, power: float = 1.0) -> np.ndarray:
    """
    平衡二叉树上 2^depth 个叶子的超度量距离矩阵

    叶子 i、j 的最近公共祖先层数为 (i XOR j) 的二进制位数。
    """
    heights = ultrametric_heights(depth, ratio, power)
    leaves = np.arange(2 ** depth)
    xor = np.bitwise_xor(leaves[:, None], leaves[None, :])
    level = np.zeros_like(xor)
    while np.any(xor >> level):
        level += (xor >> level) > 0
    return heights[level]


def _ultrametric(p: UltrametricParams, rng: np.random.Generator) -> np.ndarray:
    # 每个非根节点一个正交方向，叶子坐标是其祖先链上的边权
    heights = ultrametric_heights(p.depth, p.ratio, p.power)
    weights = np.sqrt(np.maximum(np.diff(heights ** 2), 0.0) / 2.0)
    n = 2 ** p.depth
    blocks = []
    for level in range(p.depth):
        ancestors = np.arange(n) >> level
        block = np.zeros((n, n >> level))
        block[np.arange(n), ancestors] = weights[level]
        blocks.append(block)
    return np.hstack(blocks)


def _line(p: LineParams, rng: np.random.Generator) -> np.ndarray:
    return (np.arange(p.n, dtype=float) * p.spacing).reshape(-1, 1)


def _grid(p: GridParams, rng: np.random.Generator) -> np.ndarray:
    axes = np.indices((p.side,) * p.dim).reshape(p.dim, -1).T
    return axes.astype(float)


def _subspace(p: SubspaceParams, rng: np.random.Generator) -> np.ndarray:
    if p.intrinsic > p.ambient:
        raise BadParams(f"Intrinsic dimension {p.intrinsic} exceeds ambient dimension {p.ambient}")
    basis, _ = np.linalg.qr(rng.standard_normal((p.ambient, p.intrinsic)))
    coeffs = rng.uniform(0.0, p.extent, size=(p.n, p.intrinsic))
    offset = rng.standard_normal(p.ambient)
    points = coeffs @ basis.T + offset
    if p.noise > 0:
        points += rng.uniform(-p.noise, p.noise, size=points.shape)
    return points


def _ball(p: BallParams, rng: np.random.Generator) -> np.ndarray:
    directions = rng.standard_normal((p.n, p.dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = p.radius * rng.uniform(0.0, 1.0, size=(p.n, 1)) ** (1.0 / p.dim)
    return directions * radii


GENERATORS: Dict[str, tuple] = {
    "line": (LineParams, _line),
    "grid": (GridParams, _grid),
    "subspace": (SubspaceParams, _subspace),
    "ball": (BallParams, _ball),
    "ultrametric": (UltrametricParams, _ultrametric),
}


def parse_params(kind: str, params: Optional[Mapping[str, Any]] = None) -> BaseModel:
    """按生成器类型校验参数"""
    if kind not in GENERATORS:
        raise UnknownKind(f"Unknown generator kind '{kind}'", known=",".join(sorted(GENERATORS)))
    model: Type[BaseModel] = GENERATORS[kind][0]
    try:
        return model(**dict(params or {}))
    except ValidationError as e:
        raise BadParams(f"Invalid parameters for generator '{kind}': {e.errors()[0]['msg']}", kind=kind)


def generate(
    kind: str,
    params: Optional[Mapping[str, Any]] = None,
    seed: int = 0,
    norm: Union[str, Norm] = Norm.L2,
) -> PointSet:
    """
    生成合成点集

    Args:
        kind: line / grid / subspace / ball / ultrametric
        params: 生成器参数
        seed: 随机种子
        norm: 点集的范数标签

    Returns:
        未归一化的 PointSet

    Raises:
        UnknownKind: 未知的生成器
        BadParams: 参数不合法
    """
    parsed = parse_params(kind, params)
    rng = np.random.default_rng(seed)
    points = GENERATORS[kind][1](parsed, rng)
    logger.debug(f"Generated {kind} set: {points.shape[0]} points in dimension {points.shape[1]}")
    return PointSet(points, norm=Norm.parse(norm))
