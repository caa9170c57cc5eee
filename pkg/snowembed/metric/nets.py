import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..core.errors import BadParams
from .points import PointSet, pairwise_distances

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Net:
    """
    ε-网

    Args:
        radius: 网半径（归一化单位）
        members: 网点在父点集中的下标（按加入顺序，即升序）
        assignment: 每个父点对应的覆盖网点下标（父点集下标）
    """

    radius: float
    members: np.ndarray
    assignment: np.ndarray

    @property
    def size(self) -> int:
        return int(self.members.size)

    def mask(self, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=bool)
        out[self.members] = True
        return out

    def check_packing(self, s: PointSet) -> bool:
        """任意两个不同网点距离 ≥ radius（穷举）"""
        if self.size < 2:
            return True
        d = s.distances[np.ix_(self.members, self.members)]
        np.fill_diagonal(d, np.inf)
        return bool(d.min() >= self.radius)

    def check_covering(self, s: PointSet) -> bool:
        """每个父点到其指派网点的距离 < radius"""
        d = s.distances[np.arange(s.n), self.assignment]
        return bool(np.all(d < self.radius)) and bool(np.all(np.isin(self.assignment, self.members)))


def greedy_net(s: PointSet, radius: float) -> Net:
    """
    按下标顺序贪心构造网：未被覆盖的点加入网

    Args:
        s: 点集
        radius: 网半径

    Returns:
        满足打包与覆盖性质的 Net
    """
    if not radius > 0:
        raise BadParams(f"Net radius must be positive, got {radius}")
    assignment = np.full(s.n, -1, dtype=np.int64)
    members = []
    for i in range(s.n):
        if assignment[i] >= 0:
            continue
        members.append(i)
        row = pairwise_distances(s.points[i:i + 1], s.points, norm=s.norm)[0]
        newly = (row < radius) & (assignment < 0)
        assignment[newly] = i
    return Net(radius=float(radius), members=np.asarray(members, dtype=np.int64), assignment=assignment)


@dataclass(frozen=True)
class DoublingEstimate:
    lambda_hat: float
    dim_hat: float
    method: str

    @classmethod
    def from_lambda(cls, lambda_hat: float, method: str) -> "DoublingEstimate":
        lambda_hat = max(1.0, float(lambda_hat))
        return cls(lambda_hat=lambda_hat, dim_hat=math.log2(lambda_hat), method=method)


def _greedy_cover_count(ball_distances: np.ndarray, radius: float) -> int:
    """用以球内点为中心、半径 radius 的闭球贪心覆盖，返回球数"""
    covers = ball_distances <= radius
    uncovered = np.ones(covers.shape[0], dtype=bool)
    count = 0
    while uncovered.any():
        gains = (covers & uncovered[None, :]).sum(axis=1)
        best = int(np.argmax(gains))
        uncovered &= ~covers[best]
        count += 1
    return count


def estimate_doubling(
    s: PointSet,
    max_centers: int = 64,
    seed: int = 0,
    radii: Optional[Sequence[float]] = None,
) -> DoublingEstimate:
    """
    估计倍增常数

    对几何网格 ρ = 2^j 上的每个半径和采样中心 x，贪心计算覆盖 B(x, ρ)
    所需的 ρ/2 球数，取最大值。

    Args:
        s: 归一化点集
        max_centers: 点数超过该值时随机采样中心
        seed: 采样种子
        radii: 自定义半径序列（缺省为 2, 4, ... 直到覆盖直径）

    Returns:
        DoublingEstimate
    """
    if s.n < 2:
        return DoublingEstimate.from_lambda(1.0, "greedy-cover")
    d = s.distances
    if radii is None:
        top = max(1, math.ceil(math.log2(max(s.diameter, 2.0))))
        radii = [2.0 ** j for j in range(1, top + 1)]
    if s.n <= max_centers:
        centers = np.arange(s.n)
    else:
        rng = np.random.default_rng(seed)
        centers = np.sort(rng.choice(s.n, size=max_centers, replace=False))

    best = 1
    for rho in radii:
        for x in centers:
            ball = np.flatnonzero(d[x] <= rho)
            if ball.size <= best:
                continue
            count = _greedy_cover_count(d[np.ix_(ball, ball)], rho / 2.0)
            best = max(best, count)
    estimate = DoublingEstimate.from_lambda(best, "greedy-cover")
    logger.debug(f"Doubling estimate for {s.n} points: lambda={estimate.lambda_hat:g}, dim={estimate.dim_hat:.3f}")
    return estimate
