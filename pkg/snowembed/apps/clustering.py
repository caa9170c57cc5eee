import logging
from typing import Any, Dict, Tuple

import numpy as np

from ..core.errors import BadParams
from ..embed.snowflake import SnowflakeEmbedding
from ..metric.points import Norm, pairwise_distances

logger = logging.getLogger(__name__)


def k_center(points: np.ndarray, k: int, norm: Norm = Norm.L2, first: int = 0) -> Tuple[np.ndarray, float]:
    """
    Gonzalez 贪心 k-center（2-近似）

    Args:
        points: n × d 坐标
        k: 中心数
        norm: 距离范数
        first: 第一个中心

    Returns:
        (中心下标, 覆盖半径)
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[0]
    if not 1 <= k <= n:
        raise BadParams(f"k must lie in [1, {n}], got {k}")
    centers = [first]
    nearest = pairwise_distances(points[first:first + 1], points, norm=norm)[0]
    while len(centers) < k:
        far = int(np.argmax(nearest))
        centers.append(far)
        nearest = np.minimum(nearest, pairwise_distances(points[far:far + 1], points, norm=norm)[0])
    return np.asarray(centers, dtype=np.int64), float(nearest.max())


def covering_radius(distances: np.ndarray, centers: np.ndarray) -> float:
    return float(distances[:, centers].min(axis=1).max())


def cluster_demo(e: SnowflakeEmbedding, k: int) -> Dict[str, Any]:
    """
    在原空间与嵌入空间分别做 k-center，两组中心都按原始单位的原空间半径比较
    """
    s = e.source
    original_centers, _ = k_center(s.points, k, s.norm)
    embedded_centers, embedded_radius = k_center(np.asarray(e.images), k, e.params.norm)
    original_radius = covering_radius(s.distances, original_centers) * s.scale
    transferred_radius = covering_radius(s.distances, embedded_centers) * s.scale
    logger.info(f"k-center with k={k}: original {original_radius:.6g}, via embedding {transferred_radius:.6g}")
    return {
        "k": k,
        "original_centers": original_centers.tolist(),
        "original_radius": original_radius,
        "embedded_centers": embedded_centers.tolist(),
        "embedded_radius_snowflaked": embedded_radius,
        "embedded_radius": transferred_radius,
        "ratio": transferred_radius / original_radius if original_radius > 0 else 1.0,
    }
