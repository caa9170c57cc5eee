"""
距离变换与簇内坐标嵌入

- Gaussian 变换 G_r(t) = r·(1 − e^{−t²/r²})^{1/2}，ℓ2 路径用 Gram 矩阵分解实现
- Laplace 变换 L_r(t) = r·(1 − e^{−t/r})，ℓ1 路径用割分解线性规划实现
- 阈值变换 T_r(t) = min(t, r)，ℓ∞ 路径用 Fréchet 映射实现
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import linprog

from ..core.errors import BadParams, ClusterTooLarge, EmptyNetIntersection, Infeasible, NotEuclidean
from ..metric.points import Norm, PointSet, pairwise_distances
from ..utils.helpers import condensed, pair_indices

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class TransformKind(str, Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    THRESHOLD = "threshold"

    @classmethod
    def for_norm(cls, norm: Norm) -> "TransformKind":
        return {Norm.L2: cls.GAUSSIAN, Norm.L1: cls.LAPLACE, Norm.LINF: cls.THRESHOLD}[Norm.parse(norm)]

    @property
    def reference(self) -> str:
        """报告中的参考函数名"""
        return {"gaussian": "G_r", "laplace": "L_r", "threshold": "T_r"}[self.value]


def gaussian(t: ArrayLike, r: float = 1.0) -> ArrayLike:
    x = np.asarray(t, dtype=float) / r
    return r * np.sqrt(-np.expm1(-x * x))


def laplace(t: ArrayLike, r: float = 1.0) -> ArrayLike:
    return r * -np.expm1(-np.asarray(t, dtype=float) / r)


def threshold(t: ArrayLike, r: float = 1.0) -> ArrayLike:
    return np.minimum(np.asarray(t, dtype=float), r)


_FUNCTIONS = {
    TransformKind.GAUSSIAN: gaussian,
    TransformKind.LAPLACE: laplace,
    TransformKind.THRESHOLD: threshold,
}


@dataclass(frozen=True)
class Transform:
    """带尺度 r 的距离变换"""

    kind: TransformKind
    r: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", TransformKind(self.kind))
        if not (self.r > 0 and np.isfinite(self.r)):
            raise BadParams(f"Transform scale must be positive and finite, got {self.r}")

    def __call__(self, x: ArrayLike) -> ArrayLike:
        return _FUNCTIONS[self.kind](x, self.r)


def transform_value(t: Transform, x: float) -> float:
    if x < 0:
        raise BadParams(f"Transform argument must be nonnegative, got {x}")
    return float(t(x))


@dataclass(frozen=True, eq=False)
class ClusterEmbedding:
    """
    单个簇的坐标嵌入

    Args:
        members: 簇成员在父点集中的下标
        coordinates: |C| × k_C 坐标矩阵（目标范数）
        origin_member: 像为零向量的成员（父点集下标）
        achieved_error: 相对目标变换度量的最大相对偏差
    """

    members: np.ndarray
    coordinates: np.ndarray
    origin_member: int
    achieved_error: float = 0.0

    @property
    def width(self) -> int:
        return int(self.coordinates.shape[1])

    def row_of(self, member: int) -> int:
        return int(np.flatnonzero(self.members == member)[0])


def _members_of(n: int, members: Optional[Sequence[int]]) -> np.ndarray:
    if members is None:
        return np.arange(n, dtype=np.int64)
    members = np.asarray(members, dtype=np.int64)
    if members.size != n:
        raise BadParams(f"Got {members.size} member ids for a cluster of {n} points")
    return members


def _relative_error(coords: np.ndarray, target: np.ndarray, norm: Norm) -> float:
    if coords.shape[0] < 2:
        return 0.0
    got = condensed(pairwise_distances(coords, norm=norm))
    want = condensed(target)
    mask = want > 0
    if not mask.any():
        return float(np.abs(got).max())
    return float(np.max(np.abs(got[mask] - want[mask]) / want[mask]))


def gaussian_embed(
    cluster: PointSet,
    r: float,
    tol: float = 1e-9,
    members: Optional[Sequence[int]] = None,
) -> ClusterEmbedding:
    """
    用双中心化 Gram 矩阵实现 G_r 变换后的欧氏嵌入

    Args:
        cluster: 簇内点（ℓ2）
        r: 变换尺度
        tol: 负特征值容差（相对最大特征值）
        members: 父点集下标，缺省为 0..|C|-1

    Returns:
        ClusterEmbedding，origin_member 为下标最小的成员

    Raises:
        NotEuclidean: 存在小于 −tol·λ_max 的特征值
    """
    if cluster.norm is not Norm.L2:
        raise BadParams(f"Gaussian embedding needs an l2 cluster, got {cluster.norm.value}")
    members = _members_of(cluster.n, members)
    origin = int(np.argmin(members))
    if cluster.n == 1:
        return ClusterEmbedding(members, np.zeros((1, 1)), int(members[origin]))

    target = gaussian(cluster.distances, r)
    squared = target ** 2
    # B = −½ J D² J
    centered = squared - squared.mean(axis=0, keepdims=True) - squared.mean(axis=1, keepdims=True) + squared.mean()
    gram = -0.5 * centered
    gram = (gram + gram.T) / 2.0
    evals, evecs = np.linalg.eigh(gram)
    lam_max = max(float(evals[-1]), 0.0)
    if evals[0] < -tol * lam_max:
        raise NotEuclidean(
            "Transformed distances are not Euclidean",
            min_eigenvalue=float(evals[0]),
            max_eigenvalue=lam_max,
        )
    keep = evals > cluster.n * np.finfo(float).eps * lam_max
    order = np.flatnonzero(keep)[::-1]
    coords = evecs[:, order] * np.sqrt(evals[order])
    if coords.shape[1] == 0:
        coords = np.zeros((cluster.n, 1))
    coords = coords - coords[origin]
    error = _relative_error(coords, target, Norm.L2)
    return ClusterEmbedding(members, coords, int(members[origin]), error)


@dataclass(frozen=True, eq=False)
class CutDecomposition:
    """
    ℓ1 度量的割分解

    Args:
        subsets: 每行一个割 A 的指示向量（簇内局部下标），最后一个元素恒不在 A 中
        weights: 非负权重 γ_A
        residual: 最大重构误差
    """

    subsets: np.ndarray
    weights: np.ndarray
    residual: float

    def reconstruct(self) -> np.ndarray:
        n = self.subsets.shape[1]
        if self.weights.size == 0:
            return np.zeros((n, n))
        ind = self.subsets.astype(float)
        return np.abs(ind[:, :, None] - ind[:, None, :]).transpose(1, 2, 0) @ self.weights


def _all_cuts(n: int) -> np.ndarray:
    masks = np.arange(1, 2 ** (n - 1), dtype=np.int64)
    bits = (masks[:, None] >> np.arange(n - 1)[None, :]) & 1
    return np.hstack([bits.astype(bool), np.zeros((masks.size, 1), dtype=bool)])


def cut_decomposition_l1(dist: np.ndarray, tol: float = 1e-6, cap: int = 14) -> CutDecomposition:
    """
    把 ℓ1 可嵌入度量写成割度量的非负组合

    变量为全部 2^{n−1} − 1 个非平凡割的权重，最小化逐对松弛之和。

    Raises:
        ClusterTooLarge: 簇大小超过 cap
        Infeasible: 残差超过 tol·max(dist)
    """
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    if n > cap:
        raise ClusterTooLarge(f"Cluster of {n} points exceeds the cut LP cap {cap}", size=n, cap=cap)
    if n < 2:
        return CutDecomposition(np.zeros((0, n), dtype=bool), np.zeros(0), 0.0)

    cuts = _all_cuts(n)
    i, j = pair_indices(n)
    target = dist[i, j]
    scale = float(target.max())
    pair_cut = (cuts[:, i] != cuts[:, j]).T.astype(float)
    n_pairs, n_cuts = pair_cut.shape
    eye = np.eye(n_pairs)
    a_eq = np.hstack([pair_cut, eye, -eye])
    cost = np.concatenate([np.zeros(n_cuts), np.ones(2 * n_pairs)])
    result = linprog(cost, A_eq=a_eq, b_eq=target, bounds=(0, None), method="highs")
    if result.status != 0:
        raise Infeasible(f"Cut LP failed: {result.message}", size=n)

    gamma = np.clip(result.x[:n_cuts], 0.0, None)
    residual = float(np.max(np.abs(pair_cut @ gamma - target)))
    if residual > tol * scale:
        raise Infeasible(
            "Distances are not a conic combination of cut metrics",
            residual=residual,
            bound=tol * scale,
        )
    support = gamma > 1e-12 * scale
    logger.debug(f"Cut LP on {n} points: {int(support.sum())} cuts in support, residual {residual:.3g}")
    return CutDecomposition(cuts[support], gamma[support], residual)


def merge_cuts(
    cuts: CutDecomposition,
    net_local: Sequence[int],
    members: Optional[Sequence[int]] = None,
) -> ClusterEmbedding:
    """
    相同网迹 A ∩ (C ∩ N) 的割合并为一个坐标

    Args:
        cuts: 割分解
        net_local: 簇内网点的局部下标
        members: 父点集下标

    Returns:
        ℓ1 簇嵌入；在网点上等距，在整个簇上 1-Lipschitz
    """
    n = cuts.subsets.shape[1]
    members = _members_of(n, members)
    net_local = np.asarray(net_local, dtype=np.int64)
    origin = int(net_local[np.argmin(members[net_local])]) if net_local.size else int(np.argmin(members))
    if cuts.weights.size == 0:
        return ClusterEmbedding(members, np.zeros((n, 1)), int(members[origin]))

    if net_local.size:
        _, group = np.unique(cuts.subsets[:, net_local], axis=0, return_inverse=True)
        group = np.asarray(group).reshape(-1)
    else:
        group = np.zeros(cuts.weights.size, dtype=np.int64)
    n_groups = int(group.max()) + 1
    # 坐标 = Σ_{A∈组} γ_A·1_A(x)
    weighted = cuts.subsets.astype(float) * cuts.weights[:, None]
    coords = np.zeros((n_groups, n))
    np.add.at(coords, group, weighted)
    coords = coords.T
    return ClusterEmbedding(members, coords - coords[origin], int(members[origin]))


def frechet_embed_linf(
    cluster: PointSet,
    net_local: Sequence[int],
    r: float,
    members: Optional[Sequence[int]] = None,
) -> ClusterEmbedding:
    """
    阈值 Fréchet 嵌入再限制到网点坐标

    第一步 x ↦ (min{‖x−w‖∞, r})_w 使 ‖g(x)−g(y)‖∞ = T_r(‖x−y‖∞)；
    第二步对每个网点 z 取坐标 ‖g(x)−g(z)‖∞。

    Raises:
        EmptyNetIntersection: 簇中没有网点
    """
    members = _members_of(cluster.n, members)
    net_local = np.asarray(net_local, dtype=np.int64)
    if net_local.size == 0:
        raise EmptyNetIntersection("Cluster contains no net point", size=cluster.n)
    net_local = net_local[np.argsort(members[net_local])]
    truncated = threshold(cluster.distances, r)
    coords = pairwise_distances(truncated, truncated[net_local], norm=Norm.LINF)
    origin = int(net_local[0])
    coords = coords - coords[origin]
    error = _relative_error(coords[net_local], truncated[np.ix_(net_local, net_local)], Norm.LINF)
    return ClusterEmbedding(members, coords, int(members[origin]), error)
