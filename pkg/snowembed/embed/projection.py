import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.spatial.distance import pdist

from ..core.errors import BadParams, ProjectionFailed
from ..utils.helpers import make_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    """
    随机投影结果

    Args:
        matrix: k′ × k_C 投影矩阵（已包含 1/√k′ 与膨胀归一化）
        achieved_max_expansion: 最大像距/原距比
        achieved_max_contraction: 最小像距/原距比
        tries: 采样次数（恒等映射时为 0）
    """

    matrix: np.ndarray
    achieved_max_expansion: float
    achieved_max_contraction: float
    tries: int

    @property
    def k_prime(self) -> int:
        return int(self.matrix.shape[0])


def jl_dimension(n_points: int, eps: float, k_c: Optional[int] = None, c_jl: float = 8.0) -> int:
    """
    k′ = min(k_C, ⌈c_jl·ε⁻²·ln max(n, 2)⌉)，单点时为 1
    """
    if n_points < 1:
        raise BadParams(f"Need at least one point, got {n_points}")
    if not 0 < eps <= 0.25:
        raise BadParams(f"eps must lie in (0, 1/4], got {eps}")
    if n_points == 1:
        return 1
    k = math.ceil(c_jl * eps ** -2 * math.log(max(n_points, 2)))
    return max(1, min(k, k_c)) if k_c is not None else k


def _ratios(source: np.ndarray, image: np.ndarray) -> np.ndarray:
    d_src = pdist(source)
    d_img = pdist(image)
    mask = d_src > 0
    return d_img[mask] / d_src[mask]


def _identity(coords: np.ndarray, origin_row: int, tries: int) -> Tuple[ProjectionResult, np.ndarray]:
    result = ProjectionResult(np.eye(coords.shape[1]), 1.0, 1.0, tries)
    return result, coords - coords[origin_row]


def jl_project(
    coords: np.ndarray,
    eps: float,
    tol: float = 1e-9,
    seed: int = 0,
    origin_row: int = 0,
    c_jl: float = 8.0,
    max_tries: int = 64,
    max_growth: int = 8,
) -> Tuple[ProjectionResult, np.ndarray]:
    """
    Gaussian 随机投影，逐对验证后接受

    输出除以 max(E, 1)（E 为最大膨胀比），上界 ‖Ψ(t)−Ψ(t′)‖ ≤ ‖t−t′‖ 精确成立；
    收缩比低于 1/(1+ε) − tol 时换种子重采样，max_tries 次失败后 k′ 增大 25%。

    Args:
        coords: |C| × k_C 簇坐标
        eps: 允许的收缩
        tol: 验收容差
        seed: 簇种子
        origin_row: 平移到原点的行
        c_jl: k′ 常数
        max_tries: 每个 k′ 的采样次数
        max_growth: k′ 最多增大的次数

    Returns:
        (ProjectionResult, 投影后坐标)

    Raises:
        ProjectionFailed: 重试预算耗尽
    """
    coords = np.asarray(coords, dtype=float)
    n, k_c = coords.shape
    if n <= 1:
        return ProjectionResult(np.zeros((1, k_c)), 1.0, 1.0, 0), np.zeros((n, 1))

    k_prime = jl_dimension(n, eps, k_c, c_jl)
    if k_prime >= k_c:
        return _identity(coords, origin_row, 0)

    floor = 1.0 / (1.0 + eps) - tol
    tries = 0
    worst = 0.0
    for growth in range(max_growth + 1):
        for attempt in range(max_tries):
            tries += 1
            rng = make_rng(seed, growth, attempt)
            matrix = rng.standard_normal((k_prime, k_c)) / math.sqrt(k_prime)
            image = coords @ matrix.T
            ratios = _ratios(coords, image)
            expansion = float(ratios.max())
            divisor = max(expansion, 1.0)
            contraction = float(ratios.min()) / divisor
            worst = max(worst, contraction)
            if contraction >= floor:
                image = image / divisor
                result = ProjectionResult(matrix / divisor, expansion / divisor, contraction, tries)
                return result, image - image[origin_row]
        if growth == max_growth:
            break
        k_prime = math.ceil(1.25 * k_prime)
        logger.debug(f"Growing projection dimension to {k_prime} after {tries} tries")
        if k_prime >= k_c:
            return _identity(coords, origin_row, tries)

    logger.error(f"Random projection failed after {tries} tries at k'={k_prime}")
    raise ProjectionFailed(
        "Random projection did not reach the contraction bound",
        tries=tries,
        k_prime=k_prime,
        best_contraction=worst,
        required=floor,
    )
