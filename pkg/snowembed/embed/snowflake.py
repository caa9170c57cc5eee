"""
雪花嵌入 Φ：把尺度 r = (1+ε)^i（i ∈ I）上的单尺度嵌入按 i mod p 分成 p 组，
组内求和、组间直和，最后除以归一化常数。

Φ_j = Σ_{i ≡ j (mod p)} φ_i / (1+ε)^{i(1−α)}
Φ   = (⊕_j Φ_j) / √M        （ℓ1 为 /M₁，ℓ∞ 为 /M∞）

各尺度的 φ_i 先乘回 (1+Cε)，使 Φ 在位置上也逼近 d^α。
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..audit.report import DistortionReport, PairTable, ratio_report
from ..core.config import AuditSettings, EmbeddingSettings, get_settings
from ..core.errors import BadParams, EmbeddingError, IndexOutOfRange
from ..metric.nets import estimate_doubling
from ..metric.points import Norm, PointSet, pairwise_distances
from ..utils.helpers import condensed, derive_seed, format_duration, pair_indices
from .single_scale import SingleScaleParams, build_single_scale

logger = logging.getLogger(__name__)


def log_steps(eps: float) -> int:
    """c = ⌈log_{1+ε}(1/ε)⌉"""
    return math.ceil(math.log(1.0 / eps) / math.log1p(eps) - 1e-9)


def group_count(eps: float, alpha: float) -> int:
    """α = 1/2 时 p = 6c，一般 α 时 p = ⌈3c/(1−α)⌉"""
    c = log_steps(eps)
    if alpha == 0.5:
        return 6 * c
    return math.ceil(3.0 * c / (1.0 - alpha) - 1e-9)


def compute_m(eps: float, p: int, alpha: float = 1.0, norm: Union[str, Norm] = Norm.L2) -> float:
    """
    归一化常数

    ℓ2: Σ_b ((1+ε)^{bα}·G((1+ε)^{−b}))²，b ∈ (−p/2, p/2]
    ℓ1: Σ_b (1+ε)^{bα}·L((1+ε)^{−b})
    ℓ∞: max_b (1+ε)^{bα}·T_1((1+ε)^{−b})

    α = 1 给出未按雪花指数调整的原始常数。
    """
    norm = Norm.parse(norm)
    if p < 1:
        raise BadParams(f"p must be a positive integer, got {p}")
    log_base = math.log1p(eps)
    terms = []
    for b in range(math.floor(-p / 2) + 1, math.floor(p / 2) + 1):
        growth = math.exp(b * alpha * log_base)
        t = math.exp(-b * log_base)
        if norm is Norm.L2:
            terms.append(growth * growth * -math.expm1(-t * t))
        elif norm is Norm.L1:
            terms.append(growth * -math.expm1(-t))
        else:
            terms.append(growth * min(t, 1.0))
    return max(terms) if norm is Norm.LINF else math.fsum(terms)


class SnowflakeParams(BaseModel):
    """雪花嵌入的尺度计划"""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(gt=0, lt=1)
    eps: float = Field(gt=0, le=0.25)
    p: int = Field(ge=1)
    i_min: int
    i_max: int
    delta: float = Field(gt=0)
    M: float = Field(gt=0)
    norm: Norm = Norm.L2

    @field_validator("norm", mode="before")
    @classmethod
    def _parse_norm(cls, value: Any) -> Norm:
        return Norm.parse(value)

    @property
    def scales(self) -> List[int]:
        return list(range(self.i_min, self.i_max + 1))

    def radius(self, i: int) -> float:
        return math.exp(i * math.log1p(self.eps))

    def divisor(self, i: int) -> float:
        return math.exp(i * (1.0 - self.alpha) * math.log1p(self.eps))

    @property
    def normaliser(self) -> float:
        return math.sqrt(self.M) if self.norm is Norm.L2 else self.M


def scale_plan(s: PointSet, alpha: float, eps: float, norm: Optional[Union[str, Norm]] = None) -> SnowflakeParams:
    """
    计算 p、δ、I 与 M

    Args:
        s: 归一化点集
        alpha: 雪花指数
        eps: 精度
        norm: 缺省为点集的范数

    Returns:
        SnowflakeParams
    """
    if not 0 < alpha < 1:
        raise BadParams(f"alpha must lie in (0, 1), got {alpha}")
    if not 0 < eps <= 0.25:
        raise BadParams(f"eps must lie in (0, 1/4], got {eps}")
    norm = Norm.parse(norm if norm is not None else s.norm)
    p = group_count(eps, alpha)
    delta = math.exp(-p * (1.0 - alpha) * math.log1p(eps))
    diameter = max(s.diameter, 1.0)
    i_min = math.ceil(5.0 * math.log(eps) / math.log1p(eps) - 1e-9)
    i_max = math.floor(math.log(eps ** -5 * diameter) / math.log1p(eps) + 1e-9)
    ratio = delta / eps ** 3
    if not 1e-3 <= ratio <= 1.0:
        logger.warning(f"Per-scale delta {delta:.3g} is far from eps^3 (ratio {ratio:.3g})")
    try:
        return SnowflakeParams(alpha=alpha, eps=eps, p=p, i_min=i_min, i_max=i_max, delta=delta,
                               M=compute_m(eps, p, alpha, norm), norm=norm)
    except ValidationError as e:
        raise BadParams(f"Invalid snowflake plan: {e.errors()[0]['msg']}")


def nominal_scale_dimension(
    eps: float,
    delta: float,
    dim_hat: float,
    norm: Union[str, Norm] = Norm.L2,
    settings: Optional[EmbeddingSettings] = None,
) -> int:
    """
    与 n 无关的单尺度维数：支撑大小 ⌈c_0·ε⁻¹·dim·log dim⌉ × 每簇维数

    每簇维数由倍增界 |C| ≤ (4Δ/(εδr))^dim 推出：
    ℓ2 为 c_jl·ε⁻²·ln|C|，ℓ∞ 为 |C|，ℓ1 为 2^{min(|C|, cap)}。
    """
    cfg = settings or get_settings().embedding
    norm = Norm.parse(norm)
    dim = max(1.0, float(dim_hat))
    support = math.ceil(cfg.c_0 / eps * dim * max(1.0, math.log(dim)))
    log_cluster = dim * math.log(4.0 * 3.0 * cfg.c_pad * dim / (eps * delta ** 2))
    if norm is Norm.L2:
        per_cluster = math.ceil(cfg.c_jl * eps ** -2 * log_cluster)
    else:
        cluster = math.ceil(math.exp(min(log_cluster, 700.0)))
        per_cluster = cluster if norm is Norm.LINF else 2 ** min(cluster, cfg.l1_cluster_cap)
    return int(support * per_cluster)


@dataclass(frozen=True, eq=False)
class ScaleRecord:
    index: int
    r: float
    m: int
    stored_dim: int
    target_dim: int
    delta_used: float
    lemma_ok: bool


@dataclass(frozen=True, eq=False)
class SnowflakeEmbedding:
    """
    雪花嵌入 Φ

    Args:
        params: 尺度计划
        source: 源点集（归一化）
        images: n × stored_dim 的 Φ
        scale_images: 尺度 i → 校准后的 φ_i（未除以 (1+ε)^{i(1−α)}）
        group_columns: 组号 j → Φ 中的列区间
        scales: 各尺度摘要
        target_dim: p × nominal_scale_dim
        nominal_scale_dim: 与 n 无关的单尺度维数
        dim_hat: 使用的倍增维数
        seed: 全局种子
    """

    params: SnowflakeParams
    source: PointSet
    images: np.ndarray
    scale_images: Dict[int, np.ndarray]
    group_columns: Dict[int, slice]
    scales: List[ScaleRecord]
    target_dim: int
    nominal_scale_dim: int
    dim_hat: float
    seed: int

    @property
    def n(self) -> int:
        return self.source.n

    @property
    def stored_dim(self) -> int:
        return int(self.images.shape[1])

    @property
    def k_per_scale(self) -> int:
        return self.nominal_scale_dim

    def evaluate(self, point_index: int) -> np.ndarray:
        if not isinstance(point_index, (int, np.integer)) or not 0 <= point_index < self.n:
            raise IndexOutOfRange(f"Point index {point_index} out of range for {self.n} points")
        return self.images[int(point_index)].copy()

    def denormalized_images(self) -> np.ndarray:
        """原始单位下的像：d_原始^α = d^α·scale^α"""
        return np.asarray(self.images) * self.source.scale ** self.params.alpha

    def header(self) -> Dict[str, Any]:
        return {
            "kind": "snowflake",
            "params": self.params.model_dump(mode="json"),
            "n": self.n,
            "seed": self.seed,
            "scale": self.source.scale,
            "dim_hat": self.dim_hat,
            "target_dim": self.target_dim,
            "k_per_scale": self.k_per_scale,
            "stored_dim": self.stored_dim,
            "scales": [
                {"i": rec.index, "r": rec.r, "m": rec.m, "k": rec.target_dim, "stored": rec.stored_dim,
                 "delta_used": rec.delta_used, "lemma_ok": rec.lemma_ok}
                for rec in self.scales
            ],
        }


def build_snowflake(
    s: PointSet,
    alpha: float = 0.5,
    eps: float = 0.1,
    seed: int = 0,
    settings: Optional[EmbeddingSettings] = None,
    plan: Optional[SnowflakeParams] = None,
    dim_hat: Optional[float] = None,
) -> SnowflakeEmbedding:
    """
    构造雪花嵌入

    Args:
        s: 归一化点集
        alpha: 雪花指数
        eps: 精度
        seed: 全局种子，尺度 i 使用 derive_seed(seed, i)
        settings: 构造常数
        plan: 预先算好的尺度计划
        dim_hat: 倍增维数（缺省为配置覆盖值或估计值，全程只算一次）

    Returns:
        SnowflakeEmbedding
    """
    started = time.perf_counter_ns()
    cfg = settings or get_settings().embedding
    plan = plan or scale_plan(s, alpha, eps)
    if dim_hat is None:
        dim_hat = cfg.dim_override if cfg.dim_override is not None else \
            estimate_doubling(s, cfg.doubling_max_centers, seed).dim_hat
    logger.info(
        f"Snowflake plan: alpha={plan.alpha}, eps={plan.eps}, p={plan.p}, "
        f"I=[{plan.i_min}, {plan.i_max}], delta={plan.delta:.4g}, M={plan.M:.6g}"
    )

    groups: Dict[int, np.ndarray] = {}
    scale_images: Dict[int, np.ndarray] = {}
    records: List[ScaleRecord] = []
    for i in plan.scales:
        params = SingleScaleParams(r=plan.radius(i), delta=plan.delta, eps=plan.eps, norm=plan.norm,
                                   seed=derive_seed(seed, i))
        try:
            phi = build_single_scale(s, params, cfg, dim_hat)
        except EmbeddingError as e:
            logger.error(f"Single-scale build failed at scale index {i}")
            raise e.with_context(scale_index=i)
        calibrated = np.asarray(phi.images) * phi.calibration
        scale_images[i] = calibrated
        records.append(ScaleRecord(i, params.r, phi.m, phi.stored_dim, phi.target_dim, phi.delta_used, phi.lemma.ok))

        contribution = calibrated / plan.divisor(i)
        j = i % plan.p
        current = groups.get(j)
        if current is None:
            groups[j] = contribution
            continue
        width = max(current.shape[1], contribution.shape[1])
        groups[j] = np.pad(current, ((0, 0), (0, width - current.shape[1]))) + \
            np.pad(contribution, ((0, 0), (0, width - contribution.shape[1])))

    columns: Dict[int, slice] = {}
    parts = []
    offset = 0
    for j in sorted(groups):
        columns[j] = slice(offset, offset + groups[j].shape[1])
        offset += groups[j].shape[1]
        parts.append(groups[j])
    images = np.hstack(parts) / plan.normaliser
    images.setflags(write=False)

    nominal = nominal_scale_dimension(plan.eps, plan.delta, dim_hat, plan.norm, cfg)
    embedding = SnowflakeEmbedding(
        params=plan,
        source=s,
        images=images,
        scale_images=scale_images,
        group_columns=columns,
        scales=records,
        target_dim=plan.p * nominal,
        nominal_scale_dim=nominal,
        dim_hat=float(dim_hat),
        seed=seed,
    )
    logger.info(
        f"Snowflake built: {len(records)} scales, target_dim={embedding.target_dim}, "
        f"stored_dim={embedding.stored_dim}, took {format_duration(time.perf_counter_ns() - started)}"
    )
    return embedding


def pair_table(e: SnowflakeEmbedding) -> PairTable:
    """逐对明细：比值相对 d^α，window_flag 标记主尺度落在 I 内的点对"""
    i, j = pair_indices(e.n)
    source = condensed(e.source.distances)
    image = condensed(pairwise_distances(e.images, norm=e.params.norm))
    ratio = image / source ** e.params.alpha
    dominant = np.floor(np.log(source) / math.log1p(e.params.eps) + 1e-12)
    flag = (dominant >= e.params.i_min) & (dominant <= e.params.i_max)
    return PairTable(i, j, source, image, ratio, flag)


class SnowflakeAudit(BaseModel):
    """雪花嵌入的审计结果"""

    distortion: DistortionReport
    band: Optional[float] = None
    band_limit: float
    band_ok: bool
    location: Optional[float] = None
    tail: Dict[str, Any]
    dominance: Dict[str, Any]
    passed: bool


def _scale_distances(e: SnowflakeEmbedding) -> Dict[int, np.ndarray]:
    """B_i：每个尺度的点对像距离除以 (1+ε)^{i(1−α)}"""
    norm = e.params.norm
    return {
        i: condensed(pairwise_distances(images, norm=norm)) / e.params.divisor(i)
        for i, images in e.scale_images.items()
    }


def tail_diagnostics(e: SnowflakeEmbedding, settings: Optional[AuditSettings] = None) -> Dict[str, Any]:
    """
    窗口外几何尾部与主尺度下界

    对点对 (x, y)，主尺度 i* = ⌊log_{1+ε} d⌋，窗口 A = [i* − ⌈p/2⌉ + 1, i* + ⌊p/2⌋]。
    同余类中窗口外的质量为 组和 − B_i（每个同余类在 A 中恰有一个成员）。
    在 i* 处检查 尾部 ≤ ε(1+ε)^{i*α}·tail_slack 与 B_{i*} ≥ dominance_floor·(1+ε)^{i*α}；
    整个窗口上的尾部比值只做统计。
    """
    cfg = settings or get_settings().audit
    plan = e.params
    base = math.log1p(plan.eps)
    source = condensed(e.source.distances)
    if source.size == 0:
        return {"pairs": 0, "tail_violations": 0, "dominance_violations": 0}

    distances = _scale_distances(e)
    scales = np.asarray(sorted(distances))
    b = np.vstack([distances[i] for i in scales])
    totals = np.zeros((plan.p, source.size))
    np.add.at(totals, scales % plan.p, b)

    def row_of(index: np.ndarray) -> np.ndarray:
        return index - plan.i_min

    pairs = np.arange(source.size)
    dominant = np.floor(np.log(source) / base + 1e-12).astype(np.int64)
    valid = (dominant >= plan.i_min) & (dominant <= plan.i_max)
    pairs, dominant = pairs[valid], dominant[valid]

    b_star = b[row_of(dominant), pairs]
    tail_star = totals[dominant % plan.p, pairs] - b_star
    level = np.exp(dominant * plan.alpha * base)
    tail_ratio = tail_star / (plan.eps * level)
    dominance_ratio = b_star / level

    window_max = 0.0
    for offset in range(-math.ceil(plan.p / 2) + 1, math.floor(plan.p / 2) + 1):
        idx = dominant + offset
        inside = (idx >= plan.i_min) & (idx <= plan.i_max)
        if not inside.any():
            continue
        sel, at = pairs[inside], idx[inside]
        tail = totals[at % plan.p, sel] - b[row_of(at), sel]
        window_max = max(window_max, float(np.max(tail / (plan.eps * np.exp(at * plan.alpha * base)))))

    tail_bad = tail_ratio > cfg.tail_slack
    dominance_bad = dominance_ratio < cfg.dominance_floor
    return {
        "pairs": int(pairs.size),
        "max_tail_ratio": float(tail_ratio.max()) if tail_ratio.size else 0.0,
        "max_tail_ratio_window": window_max,
        "tail_slack": cfg.tail_slack,
        "tail_violations": int(tail_bad.sum()),
        "min_dominance_ratio": float(dominance_ratio.min()) if dominance_ratio.size else None,
        "dominance_floor": cfg.dominance_floor,
        "dominance_violations": int(dominance_bad.sum()),
    }


def distortion_audit(e: SnowflakeEmbedding, settings: Optional[AuditSettings] = None) -> SnowflakeAudit:
    """
    穷举点对的 ‖Φ(x)−Φ(y)‖ / d^α，并附带尾部诊断

    验收看带宽 max/min ≤ 1 + band_c·ε，而不是比值的位置。
    """
    cfg = settings or get_settings().audit
    plan = e.params
    table = pair_table(e)
    expected = table.source ** plan.alpha
    limit = 1.0 + cfg.band_c * plan.eps
    report = ratio_report(f"d^{plan.alpha:g}", table.i, table.j, table.source, table.image, expected,
                          slack=cfg.float_slack, max_violations=cfg.max_violations)
    band = report.band
    band_ok = band is None or band <= limit * (1.0 + cfg.float_slack)
    if not band_ok:
        report = ratio_report(f"d^{plan.alpha:g}", table.i, table.j, table.source, table.image, expected,
                              lower=report.min_ratio, upper=report.min_ratio * limit,
                              slack=cfg.float_slack, max_violations=cfg.max_violations, check="band")
    location = None
    if report.pair_count:
        location = float(np.exp(np.mean(np.log(table.ratio[table.ratio > 0]))))

    diagnostics = tail_diagnostics(e, cfg)
    tail = {k: v for k, v in diagnostics.items() if "dominance" not in k}
    dominance = {k: v for k, v in diagnostics.items() if "dominance" in k}
    passed = band_ok and diagnostics["tail_violations"] == 0 and diagnostics["dominance_violations"] == 0
    logger.info(f"Snowflake audit: band={band}, location={location}, passed={passed}")
    return SnowflakeAudit(
        distortion=report,
        band=band,
        band_limit=limit,
        band_ok=band_ok,
        location=location,
        tail=tail,
        dominance=dominance,
        passed=passed,
    )
