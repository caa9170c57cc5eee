"""
ℓ2 到 ℓ2 的 Kirszbraun 延拓

逐点求解球交可行性问题：新点 x 的像 z 必须落在所有
B(image_y, L·(1+tol)·‖x−y‖) 的交中。交集由 Kirszbraun 定理保证非空，
先用循环投影求可行点，停滞时改解 min-t 形式（SLSQP），然后把 x 加入锚点集合。
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import cdist, pdist

from ..core.errors import BadParams, DuplicateSources, ExtensionDidNotConverge

logger = logging.getLogger(__name__)

WARM_SWEEPS = 64


def lipschitz_constant(sources: np.ndarray, images: np.ndarray) -> float:
    """
    穷举所有点对的 像距/原距 最大值

    Raises:
        DuplicateSources: 存在重合的源点
    """
    sources = np.atleast_2d(np.asarray(sources, dtype=float))
    images = np.atleast_2d(np.asarray(images, dtype=float))
    if sources.shape[0] != images.shape[0]:
        raise BadParams(f"Got {sources.shape[0]} sources but {images.shape[0]} images")
    if sources.shape[0] < 2:
        return 0.0
    d_src = pdist(sources)
    if np.any(d_src == 0):
        raise DuplicateSources("Lipschitz constant is undefined for coincident sources")
    return float(np.max(pdist(images) / d_src))


@dataclass
class ExtensionProblem:
    """
    Args:
        sources: 锚点源坐标
        images: 锚点像坐标
        lipschitz_bound: L
        tol: 相对容差
    """

    sources: np.ndarray
    images: np.ndarray
    lipschitz_bound: float
    tol: float = 1e-6
    iterations: list = field(default_factory=list)

    def __post_init__(self) -> None:
        self.sources = np.atleast_2d(np.asarray(self.sources, dtype=float))
        self.images = np.atleast_2d(np.asarray(self.images, dtype=float))
        if self.sources.shape[0] == 0:
            raise BadParams("Extension needs at least one anchor")
        if not self.lipschitz_bound > 0:
            raise BadParams(f"Lipschitz bound must be positive, got {self.lipschitz_bound}")
        measured = lipschitz_constant(self.sources, self.images)
        if measured > self.lipschitz_bound * (1.0 + self.tol):
            raise BadParams(
                f"Anchors have Lipschitz constant {measured:.9g} above the bound {self.lipschitz_bound:.9g}"
            )


def _cyclic_projections(
    centers: np.ndarray,
    radii: np.ndarray,
    start: np.ndarray,
    threshold: float,
    sweeps: int,
) -> Tuple[np.ndarray, int, float]:
    """循环投影到违反的球上；返回 (z, 轮数, 最大违反量)"""
    z = start.copy()
    worst = np.inf
    for sweep in range(sweeps + 1):
        violation = np.linalg.norm(centers - z, axis=1) - radii
        worst = float(violation.max())
        if worst <= threshold or sweep == sweeps:
            return z, sweep, worst
        # 只有违反的球需要投影，满足的球上投影为恒等
        for idx in np.flatnonzero(violation > 0):
            diff = z - centers[idx]
            dist = float(np.linalg.norm(diff))
            if dist > radii[idx]:
                z = centers[idx] + diff * (radii[idx] / dist)
    return z, sweeps, worst


def _minimax_point(
    centers: np.ndarray,
    radii: np.ndarray,
    start: np.ndarray,
    max_iter: int,
) -> Tuple[np.ndarray, int]:
    """
    min t  s.t.  ‖z − c_i‖ ≤ ρ_i·(1+t)，t ≥ −1

    最优值 t* 即锚点集合在新点处所需的 Lipschitz 放大量；Kirszbraun 保证 t* ≤ 0。
    约束写成平方形式 (1+t)² − ‖z − c_i‖²/ρ_i² ≥ 0，坐标以 start 为原点。
    """
    k = centers.shape[1]
    centers = centers - start
    scale = radii ** 2

    def constraint(v: np.ndarray) -> np.ndarray:
        diff = v[:k] - centers
        return (1.0 + v[k]) ** 2 - np.sum(diff * diff, axis=1) / scale

    def constraint_jac(v: np.ndarray) -> np.ndarray:
        jac = np.empty((centers.shape[0], k + 1))
        jac[:, :k] = -2.0 * (v[:k] - centers) / scale[:, None]
        jac[:, k] = 2.0 * (1.0 + v[k])
        return jac

    gradient = np.zeros(k + 1)
    gradient[k] = 1.0
    t0 = max(0.0, float(np.max(np.linalg.norm(centers, axis=1) / radii)) - 1.0)
    result = minimize(
        lambda v: v[k],
        np.append(np.zeros(k), t0),
        jac=lambda v: gradient,
        method="SLSQP",
        bounds=[(None, None)] * k + [(-1.0, None)],
        constraints=[{"type": "ineq", "fun": constraint, "jac": constraint_jac}],
        options={"maxiter": max_iter, "ftol": 1e-15},
    )
    return start + np.asarray(result.x[:k]), int(result.nit)


def kirszbraun_extend(
    problem: ExtensionProblem,
    new_points: np.ndarray,
    max_iter: int = 10000,
) -> np.ndarray:
    """
    按给定顺序逐点延拓

    先做至多 WARM_SWEEPS 轮循环投影；球交很薄时循环投影只能次线性收敛，
    此时改解 min-t 问题（SLSQP），以循环投影的结果为初值。

    Args:
        problem: 锚点与 Lipschitz 界（延拓后的点会追加到 problem 中）
        new_points: 待延拓的源点
        max_iter: SLSQP 的最大迭代数

    Returns:
        新点的像

    Raises:
        ExtensionDidNotConverge: 两种求解都没有达到阈值
    """
    new_points = np.atleast_2d(np.asarray(new_points, dtype=float))
    L = problem.lipschitz_bound
    inflate = L * (1.0 + problem.tol)
    out = np.zeros((new_points.shape[0], problem.images.shape[1]))
    for row, x in enumerate(new_points):
        d = cdist(x[None, :], problem.sources)[0]
        nearest = int(np.argmin(d))
        if d[nearest] == 0.0:
            out[row] = problem.images[nearest]
            problem.iterations.append(0)
            continue
        threshold = problem.tol * L * float(d[nearest])
        radii = inflate * d
        z, sweeps, worst = _cyclic_projections(problem.images, radii, problem.images[nearest], threshold,
                                               min(max_iter, WARM_SWEEPS))
        if worst > threshold:
            z, steps = _minimax_point(problem.images, L * d, z, max_iter)
            worst = float(np.max(np.linalg.norm(problem.images - z, axis=1) - radii))
            sweeps += steps
        if worst > threshold:
            logger.error(f"Extension failed at point {row} with {problem.sources.shape[0]} anchors")
            raise ExtensionDidNotConverge(
                "No point found in the ball intersection",
                worst_residual=worst,
                threshold=threshold,
                max_iter=max_iter,
                point=row,
                anchors=problem.sources.shape[0],
            )
        out[row] = z
        problem.iterations.append(sweeps)
        problem.sources = np.vstack([problem.sources, x])
        problem.images = np.vstack([problem.images, z])
    return out


def extension_summary(problem: ExtensionProblem) -> Optional[dict]:
    if not problem.iterations:
        return None
    sweeps = np.asarray(problem.iterations)
    return {"points": int(sweeps.size), "max_sweeps": int(sweeps.max()), "mean_sweeps": float(sweeps.mean())}
