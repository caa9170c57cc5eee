"""
随机移位球切分构造的填充分解

每个划分：对网点取均匀随机排列作为候选中心，取半径 ρ ~ U[Δ/4, Δ/2]，
每个点归入排列中第一个与它距离不超过 ρ 的中心。簇直径因此不超过 2ρ ≤ Δ。

划分数 m 按 Chernoff 界取值，采样后逐点审计填充比例，不达标则 m 加倍重采样。
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import BadParams, PaddingUnachievable
from ..metric.points import PointSet
from ..utils.helpers import make_rng

logger = logging.getLogger(__name__)

# 逐块计算填充比例时单块布尔张量的元素上限
_CHUNK_ELEMENTS = 20_000_000


def canonical_labels(raw: np.ndarray) -> np.ndarray:
    """按首次出现顺序重新编号簇标签"""
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int32)
    rank[np.argsort(first)] = np.arange(first.size, dtype=np.int32)
    return rank[np.asarray(inverse).reshape(-1)]


@dataclass(frozen=True, eq=False)
class Partition:
    """
    网点的一个划分

    Args:
        cluster_of: 每个网点（局部下标）的簇编号
    """

    cluster_of: np.ndarray

    @cached_property
    def clusters(self) -> List[np.ndarray]:
        order = np.argsort(self.cluster_of, kind="stable")
        bounds = np.flatnonzero(np.diff(self.cluster_of[order])) + 1
        return np.split(order, bounds)

    @property
    def size(self) -> int:
        return int(self.cluster_of.max()) + 1 if self.cluster_of.size else 0

    def check(self, distances: np.ndarray, delta: float) -> bool:
        """覆盖、不交与直径界（穷举）"""
        covered = np.zeros(self.cluster_of.size, dtype=bool)
        for members in self.clusters:
            if members.size == 0 or covered[members].any():
                return False
            covered[members] = True
            if members.size > 1 and distances[np.ix_(members, members)].max() > delta:
                return False
        return bool(covered.all())


@dataclass(frozen=True, eq=False)
class PaddedDecomposition:
    """
    填充分解（划分的多重集）

    Args:
        labels: m × n_net 的簇编号矩阵，每行一个划分
        delta: 簇直径上界 Δ
        pad_radius: 填充球半径
        eps_pad: 允许的填充失败比例
        padded_fraction: 每个网点的填充比例
        members: 网点在父点集中的下标
        attempts: 采样轮数（含首轮）
    """

    labels: np.ndarray
    delta: float
    pad_radius: float
    eps_pad: float
    padded_fraction: np.ndarray
    members: np.ndarray
    attempts: int = 1

    @property
    def m(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n(self) -> int:
        return int(self.labels.shape[1])

    def partition(self, i: int) -> Partition:
        return Partition(self.labels[i])

    @property
    def partitions(self) -> List[Partition]:
        return [Partition(row) for row in self.labels]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "delta": self.delta,
            "pad_radius": self.pad_radius,
            "eps_pad": self.eps_pad,
            "m": self.m,
            "members": self.members.tolist(),
            "partitions": self.labels.tolist(),
            "padded_fraction": self.padded_fraction.tolist(),
        }


def support_size(n_net: int, eps_pad: float, dim_hat: float, c_m: float = 4.0, c_0: float = 2.0) -> int:
    """m = max(⌈c_m·ε⁻²·ln(2n)⌉, ⌈c_0·ε⁻¹·dim·max(1, ln dim)⌉)"""
    chernoff = math.ceil(c_m * eps_pad ** -2 * math.log(2 * max(n_net, 1)))
    dim = max(float(dim_hat), 0.0)
    support = math.ceil(c_0 / eps_pad * dim * max(1.0, math.log(dim))) if dim > 0 else 0
    return max(1, chernoff, support)


def carve(distances: np.ndarray, delta: float, rng: np.random.Generator) -> np.ndarray:
    """一次移位球切分，返回规范化后的簇编号"""
    n = distances.shape[0]
    order = rng.permutation(n)
    rho = rng.uniform(delta / 4.0, delta / 2.0)
    within = distances[order] <= rho
    # 每列第一个为真的行 = 排列中第一个覆盖该点的中心
    first = np.argmax(within, axis=0)
    return canonical_labels(first)


def unique_partitions(labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    去重后的划分与重数

    Returns:
        (distinct_labels, counts)，按字典序排列
    """
    distinct, counts = np.unique(labels, axis=0, return_counts=True)
    return distinct, counts


def _padded_counts(labels: np.ndarray, ball: np.ndarray) -> np.ndarray:
    distinct, counts = unique_partitions(labels)
    n = labels.shape[1]
    total = np.zeros(n, dtype=np.int64)
    chunk = max(1, _CHUNK_ELEMENTS // max(n * n, 1))
    for start in range(0, distinct.shape[0], chunk):
        block = distinct[start:start + chunk]
        split = block[:, :, None] != block[:, None, :]
        padded = ~np.any(split & ball[None, :, :], axis=2)
        total += counts[start:start + chunk] @ padded.astype(np.int64)
    return total


def build_decomposition(
    net_points: PointSet,
    delta: float,
    pad_radius: float,
    eps_pad: float,
    seed: int = 0,
    dim_hat: float = 1.0,
    members: Optional[Sequence[int]] = None,
    c_m: float = 4.0,
    c_0: float = 2.0,
    retries: int = 4,
    enforce: bool = True,
) -> PaddedDecomposition:
    """
    Monte Carlo 填充分解

    Args:
        net_points: 网点
        delta: 簇直径上界 Δ
        pad_radius: 填充球半径（需 ≤ Δ/4）
        eps_pad: 允许的失败比例
        seed: 种子
        dim_hat: 倍增维数估计
        members: 网点在父点集中的下标
        c_m, c_0: 划分数常数
        retries: m 加倍重采样的次数
        enforce: 为 False 时不检查填充比例（用于审计对抗构造）

    Returns:
        PaddedDecomposition

    Raises:
        PaddingUnachievable: 重试后仍有点的填充比例 < 1 − eps_pad
    """
    if not delta > 0 or not pad_radius > 0:
        raise BadParams(f"delta and pad_radius must be positive, got {delta}, {pad_radius}")
    if pad_radius > delta / 4.0 * (1.0 + 1e-12):
        raise BadParams(f"pad_radius {pad_radius:.6g} exceeds delta/4 = {delta / 4.0:.6g}")
    if not 0 < eps_pad <= 0.25:
        raise BadParams(f"eps_pad must lie in (0, 1/4], got {eps_pad}")

    n = net_points.n
    members = np.arange(n, dtype=np.int64) if members is None else np.asarray(members, dtype=np.int64)
    distances = net_points.distances
    ball = distances <= pad_radius
    m = support_size(n, eps_pad, dim_hat, c_m, c_0)
    required = (1.0 - eps_pad) * (1.0 - 1e-12)

    for attempt in range(retries + 1):
        labels = np.empty((m, n), dtype=np.int32)
        for i in range(m):
            labels[i] = carve(distances, delta, make_rng(seed, attempt, i))
        fraction = _padded_counts(labels, ball) / m
        worst = float(fraction.min())
        if worst >= required or not enforce:
            logger.info(
                f"Padded decomposition: {n} net points, m={m}, delta={delta:.4g}, "
                f"pad={pad_radius:.4g}, min fraction {worst:.4f}"
            )
            return PaddedDecomposition(labels, float(delta), float(pad_radius), float(eps_pad),
                                       fraction, members, attempt + 1)
        logger.warning(f"Padding fraction {worst:.4f} below {1 - eps_pad:.4f} with m={m}, resampling")
        m *= 2

    raise PaddingUnachievable(
        "Padding guarantee not reached after retries",
        min_fraction=worst,
        m=m // 2,
        delta=delta,
        pad_radius=pad_radius,
    )


def padding_audit(d: PaddedDecomposition, distances: np.ndarray) -> Dict[str, Any]:
    """
    逐划分重新计算每个网点的填充比例

    Args:
        d: 分解
        distances: 网点间距离矩阵

    Returns:
        {"fraction": 每点比例, "min": 最小值, "mean": 平均值, "matches": 是否与存储值一致}
    """
    ball = np.asarray(distances) <= d.pad_radius
    counts = np.zeros(d.n, dtype=np.int64)
    for row in d.labels:
        same = row[:, None] == row[None, :]
        counts += ~np.any(ball & ~same, axis=1)
    fraction = counts / d.m
    return {
        "fraction": fraction,
        "min": float(fraction.min()) if fraction.size else 1.0,
        "mean": float(fraction.mean()) if fraction.size else 1.0,
        "matches": bool(np.array_equal(fraction, d.padded_fraction)),
    }
