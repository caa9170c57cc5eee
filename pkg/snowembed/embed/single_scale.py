"""
单尺度嵌入 φ

构造步骤：
1. 取半径 εδr 的网 N
2. 对定义域（ℓ2 为 N，ℓ1/ℓ∞ 为整个 S）做填充分解，Δ = 3·c_pad·max(1, dim)·r/δ
3. 每个簇做变换嵌入：ℓ2 为 Gram 分解 + 随机投影，ℓ1 为割分解 + 合并，ℓ∞ 为 Fréchet 映射
4. 每个划分 φ_i(x) = f_{P_i(x)}(x)·min{1, (δ/r)·h_{P_i(x)}(x)}
5. 按范数直和并缩放（ℓ2: m^{-1/2}，ℓ1: m^{-1}，ℓ∞: (1+2√δ)^{-1}）
6. ℓ2 对非网点做 Kirszbraun 延拓
7. ℓ2/ℓ1 整体再乘 1/(1+Cε)

相同的划分只计算一次，按重数加权。ℓ2 的直和用逐块正交约化保存为 n × k_s
的等距坐标（距离与范数与字面直和相同），字面分块在规模允许时保留。
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..audit.report import DistortionReport, PairTable, ratio_report
from ..core.config import AuditSettings, EmbeddingSettings, get_settings
from ..core.errors import (
    BadParams,
    EmbeddingError,
    EmptyNetIntersection,
    IndexOutOfRange,
    PaddingUnachievable,
)
from ..metric.nets import Net, estimate_doubling, greedy_net
from ..metric.points import Norm, PointSet, pairwise_distances, vector_norms
from ..utils.helpers import condensed, derive_seed, format_duration, pair_indices
from .decomposition import PaddedDecomposition, Partition, build_decomposition, unique_partitions
from .extension import ExtensionProblem, extension_summary, kirszbraun_extend, lipschitz_constant
from .projection import jl_project
from .transforms import (
    ClusterEmbedding,
    Transform,
    TransformKind,
    cut_decomposition_l1,
    frechet_embed_linf,
    gaussian_embed,
    merge_cuts,
)

logger = logging.getLogger(__name__)


class SingleScaleParams(BaseModel):
    """单尺度参数"""

    model_config = ConfigDict(frozen=True)

    r: float = Field(gt=0)
    delta: float = Field(gt=0, le=0.25)
    eps: float = Field(gt=0, le=0.25)
    norm: Norm = Norm.L2
    seed: int = 0

    @field_validator("norm", mode="before")
    @classmethod
    def _parse_norm(cls, value: Any) -> Norm:
        return Norm.parse(value)

    @model_validator(mode="after")
    def _linf_delta(self) -> "SingleScaleParams":
        if self.norm is Norm.LINF and self.delta > self.eps ** 2 / 4.0 * (1.0 + 1e-12):
            raise ValueError(f"l_inf path needs delta <= eps^2/4 = {self.eps ** 2 / 4.0:.6g}")
        return self

    @classmethod
    def create(cls, **kwargs: Any) -> "SingleScaleParams":
        try:
            return cls(**kwargs)
        except ValidationError as e:
            raise BadParams(f"Invalid single-scale parameters: {e.errors()[0]['msg']}")

    @property
    def net_radius(self) -> float:
        return self.eps * self.delta * self.r

    @property
    def pad_radius(self) -> float:
        return 3.0 * self.r / self.delta

    @property
    def transform(self) -> Transform:
        return Transform(TransformKind.for_norm(self.norm), self.r)

    def decomposition_delta(self, dim_hat: float, c_pad: float) -> float:
        return 3.0 * c_pad * max(1.0, dim_hat) * self.r / self.delta

    @property
    def window(self) -> Tuple[float, float]:
        upper = self.r / math.sqrt(self.delta) if self.norm is Norm.LINF else self.r / self.delta
        return self.delta * self.r, upper

    @property
    def extended_window(self) -> Tuple[float, float]:
        return 0.5 * self.delta * self.r, 2.0 * self.r / self.delta


@dataclass
class LemmaChecks:
    """构造过程中逐块检查的簇级性质"""

    norm_violations: int = 0
    max_norm_ratio: float = 0.0
    same_cluster_violations: int = 0
    max_same_cluster_ratio: float = 0.0
    transform_violations: int = 0
    split_violations: int = 0
    product_violations: int = 0
    max_product_lipschitz: float = 0.0

    @property
    def ok(self) -> bool:
        return not (self.norm_violations or self.same_cluster_violations or self.transform_violations
                    or self.split_violations or self.product_violations)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "norm_violations": self.norm_violations,
            "max_norm_ratio": self.max_norm_ratio,
            "same_cluster_violations": self.same_cluster_violations,
            "max_same_cluster_ratio": self.max_same_cluster_ratio,
            "transform_violations": self.transform_violations,
            "split_violations": self.split_violations,
            "product_violations": self.product_violations,
            "max_product_lipschitz": self.max_product_lipschitz,
            "ok": self.ok,
        }


@dataclass(frozen=True, eq=False)
class SingleScaleEmbedding:
    """
    单尺度嵌入 φ

    Args:
        params: 参数
        source: 源点集
        net: 网
        domain: 分解所在点的下标（ℓ2 为网点，ℓ1/ℓ∞ 为全部点）
        decomposition: 填充分解
        distinct_labels: 去重后的划分
        counts: 每个去重划分的重数
        cluster_maps: 簇成员元组 → 簇嵌入
        smoothing: 每个去重划分下定义域点的 h_C(x)
        images: n × k_s 的最终坐标（已含整体缩放）
        target_dim: 字面直和维数 m × 最大块宽
        calibration: 整体缩放的倒数（1+Cε，ℓ∞ 为 1）
        dim_hat: 使用的倍增维数
        c_pad: 最终使用的 Δ 常数
        lemma: 簇级性质检查
        lipschitz_bound: ℓ2 延拓使用的 L
        extension: 延拓统计
        blocks: 字面分块 (权重, 块)；规模过大时为 None
    """

    params: SingleScaleParams
    source: PointSet
    net: Net
    domain: np.ndarray
    decomposition: PaddedDecomposition
    distinct_labels: np.ndarray
    counts: np.ndarray
    cluster_maps: Dict[Tuple[int, ...], ClusterEmbedding]
    smoothing: np.ndarray
    images: np.ndarray
    target_dim: int
    calibration: float
    dim_hat: float
    c_pad: float
    lemma: LemmaChecks
    lipschitz_bound: Optional[float] = None
    extension: Optional[Dict[str, Any]] = None
    blocks: Optional[List[Tuple[float, np.ndarray]]] = None

    @property
    def n(self) -> int:
        return self.source.n

    @property
    def stored_dim(self) -> int:
        return int(self.images.shape[1])

    @property
    def m(self) -> int:
        return self.decomposition.m

    @property
    def delta_used(self) -> float:
        return self.decomposition.delta

    @property
    def norm_scale(self) -> float:
        """直和缩放因子"""
        if self.params.norm is Norm.L2:
            return self.m ** -0.5
        if self.params.norm is Norm.L1:
            return 1.0 / self.m
        return 1.0 / (1.0 + 2.0 * math.sqrt(self.params.delta))

    def evaluate(self, point_index: int) -> np.ndarray:
        return evaluate(self, point_index)

    def header(self) -> Dict[str, Any]:
        """写入嵌入转储的头信息"""
        return {
            "kind": "single-scale",
            "params": self.params.model_dump(mode="json"),
            "n": self.n,
            "net_size": self.net.size,
            "m": self.m,
            "distinct_partitions": int(self.counts.size),
            "delta_used": self.delta_used,
            "c_pad": self.c_pad,
            "dim_hat": self.dim_hat,
            "target_dim": self.target_dim,
            "stored_dim": self.stored_dim,
            "calibration": self.calibration,
            "lipschitz_bound": self.lipschitz_bound,
            "extension": self.extension,
            "lemma": self.lemma.as_dict(),
        }


class _FrameAccumulator:
    """ℓ2 直和的正交约化：保持 Y·Yᵀ = Σ B·Bᵀ"""

    def __init__(self, n: int):
        self.n = n
        self.frame = np.zeros((n, 0))
        self.pending: List[np.ndarray] = []
        self.pending_width = 0

    def add(self, block: np.ndarray) -> None:
        if block.shape[1] == 0:
            return
        self.pending.append(block)
        self.pending_width += block.shape[1]
        if self.frame.shape[1] + self.pending_width > 3 * self.n:
            self._reduce()

    def _reduce(self) -> None:
        stacked = np.hstack([self.frame] + self.pending)
        self.pending, self.pending_width = [], 0
        if stacked.shape[1] > self.n:
            # Zᵀ = QR ⇒ Z·Zᵀ = Rᵀ·R
            stacked = np.linalg.qr(stacked.T, mode="r").T
        self.frame = stacked

    def result(self) -> np.ndarray:
        self._reduce()
        if self.frame.shape[1] == 0:
            return np.zeros((self.n, 1))
        return self.frame


class _ColumnAccumulator:
    """ℓ1/ℓ∞ 直和：去掉零列并合并相同列"""

    def __init__(self, n: int, norm: Norm):
        self.n = n
        self.norm = norm
        self.columns = np.zeros((n, 0))
        self.pending: List[np.ndarray] = []
        self.pending_width = 0

    def add(self, block: np.ndarray) -> None:
        if block.shape[1] == 0:
            return
        self.pending.append(block)
        self.pending_width += block.shape[1]
        if self.pending_width > 4 * self.n:
            self._reduce()

    def _reduce(self) -> None:
        stacked = np.hstack([self.columns] + self.pending)
        self.pending, self.pending_width = [], 0
        stacked = stacked[:, np.any(stacked != 0.0, axis=0)]
        if stacked.shape[1] > 1:
            unique, counts = np.unique(stacked, axis=1, return_counts=True)
            # ℓ1 中 t 个相同列等价于一列乘 t，ℓ∞ 中重复列不改变最大值
            stacked = unique * counts[None, :] if self.norm is Norm.L1 else unique
        self.columns = stacked

    def result(self) -> np.ndarray:
        self._reduce()
        if self.columns.shape[1] == 0:
            return np.zeros((self.n, 1))
        return self.columns


@dataclass
class _ClusterEntry:
    embedding: ClusterEmbedding
    max_norm: float
    same_ratio: float
    same_violations: int
    transform_violations: int


@dataclass
class _Builder:
    s: PointSet
    params: SingleScaleParams
    settings: EmbeddingSettings
    domain: np.ndarray
    net_local: np.ndarray
    cache: Dict[Tuple[int, ...], _ClusterEntry] = field(default_factory=dict)
    lemma: LemmaChecks = field(default_factory=LemmaChecks)

    def __post_init__(self) -> None:
        self.distances = self.s.distances[np.ix_(self.domain, self.domain)]

    @property
    def abs_slack(self) -> float:
        return self.settings.cut_tol * self.params.r if self.params.norm is Norm.L1 else 0.0

    @property
    def rel_slack(self) -> float:
        return {Norm.L2: 1e-7, Norm.L1: 1e-9, Norm.LINF: 1e-12}[self.params.norm]

    def _embed(self, members: np.ndarray, local: np.ndarray) -> ClusterEmbedding:
        p, cfg = self.params, self.settings
        cluster = self.s.subset(members)
        if p.norm is Norm.L2:
            base = gaussian_embed(cluster, p.r, cfg.gram_tol, members)
            result, coords = jl_project(
                base.coordinates,
                p.eps,
                tol=cfg.jl_tol,
                seed=derive_seed(p.seed, *members.tolist()),
                origin_row=base.row_of(base.origin_member),
                c_jl=cfg.c_jl,
                max_tries=cfg.jl_max_tries,
                max_growth=cfg.jl_max_growth,
            )
            return ClusterEmbedding(members, coords, base.origin_member, base.achieved_error)
        net_in_cluster = np.flatnonzero(self.net_local[local])
        if p.norm is Norm.L1:
            cuts = cut_decomposition_l1(p.transform(cluster.distances), cfg.cut_tol, cfg.l1_cluster_cap)
            return merge_cuts(cuts, net_in_cluster, members)
        try:
            return frechet_embed_linf(cluster, net_in_cluster, p.r, members)
        except EmptyNetIntersection:
            return ClusterEmbedding(members, np.zeros((members.size, 0)), int(members[0]))

    def cluster(self, local: np.ndarray, partition: int) -> _ClusterEntry:
        members = self.domain[local]
        key = tuple(members.tolist())
        if key in self.cache:
            return self.cache[key]
        try:
            embedding = self._embed(members, local)
        except EmbeddingError as e:
            logger.error(f"Cluster embedding failed in partition {partition} ({members.size} points)")
            raise e.with_context(partition=partition, cluster=key[:8], scale=self.params.r)

        norm = self.params.norm
        coords = embedding.coordinates
        norms = vector_norms(coords, norm) if coords.shape[1] else np.zeros(members.size)
        entry = _ClusterEntry(embedding, float(norms.max()) / self.params.r, 0.0, 0, 0)
        if members.size > 1 and coords.shape[1]:
            i, j = pair_indices(members.size)
            source = condensed(self.s.distances[np.ix_(members, members)])
            expected = self.params.transform(source)
            image = condensed(pairwise_distances(coords, norm=norm))
            entry.same_ratio = float(np.max(image / expected))
            entry.same_violations = int(np.sum(image > expected * (1 + self.rel_slack) + self.abs_slack))
            entry.transform_violations = int(np.sum(expected > source * (1 + 1e-12)))
        self.cache[key] = entry
        return entry

    def block(self, labels: np.ndarray, index: int) -> Tuple[np.ndarray, np.ndarray]:
        """一个划分的 φ_i（定义域点）与 h_C"""
        p = self.params
        distances = self.distances
        split = labels[:, None] != labels[None, :]
        h = np.where(split, distances, np.inf).min(axis=1)
        factor = np.minimum(1.0, p.delta * h / p.r)

        entries = [(local, self.cluster(local, index)) for local in Partition(labels).clusters]
        width = max(entry.embedding.width for _, entry in entries)
        block = np.zeros((self.domain.size, width))
        for local, entry in entries:
            coords = entry.embedding.coordinates
            block[local, :coords.shape[1]] = coords * factor[local, None]
            self._check_cluster(local, entry, block, distances)

        self.lemma.split_violations += int(np.sum(split & (h[:, None] > distances * (1 + 1e-12))))
        return block, h

    def _check_cluster(self, local: np.ndarray, entry: _ClusterEntry, block: np.ndarray,
                       distances: np.ndarray) -> None:
        lemma = self.lemma
        lemma.max_norm_ratio = max(lemma.max_norm_ratio, entry.max_norm)
        if entry.max_norm > 1.0 + 1e-9 + self.abs_slack / self.params.r:
            lemma.norm_violations += 1
        lemma.max_same_cluster_ratio = max(lemma.max_same_cluster_ratio, entry.same_ratio)
        lemma.same_cluster_violations += entry.same_violations
        lemma.transform_violations += entry.transform_violations
        if local.size < 2:
            return
        rows = block[local]
        image = condensed(pairwise_distances(rows, norm=self.params.norm))
        source = condensed(distances[np.ix_(local, local)])
        lipschitz = float(np.max(image / source))
        lemma.max_product_lipschitz = max(lemma.max_product_lipschitz, lipschitz)
        if lipschitz > 1.0 + self.params.delta + 1e-9 + self.abs_slack / float(source.min()):
            lemma.product_violations += 1


def _decompose(
    s: PointSet,
    params: SingleScaleParams,
    cfg: EmbeddingSettings,
    domain: np.ndarray,
    dim_hat: float,
) -> Tuple[PaddedDecomposition, float]:
    eps_pad = cfg.eps_pad if cfg.eps_pad is not None else params.eps
    c_pad = cfg.c_pad
    points = s.subset(domain)
    for growth in range(cfg.delta_growth_limit + 1):
        try:
            decomposition = build_decomposition(
                points,
                params.decomposition_delta(dim_hat, c_pad),
                params.pad_radius,
                eps_pad,
                seed=derive_seed(params.seed, 0x5EED),
                dim_hat=dim_hat,
                members=domain,
                c_m=cfg.c_m,
                c_0=cfg.c_0,
                retries=cfg.padding_retries,
            )
            return decomposition, c_pad
        except PaddingUnachievable as e:
            if growth == cfg.delta_growth_limit:
                logger.error(f"Padding unachievable at r={params.r:.6g} after enlarging delta {growth} times")
                raise e.with_context(scale=params.r, c_pad=c_pad)
            c_pad *= 2.0
            logger.warning(f"Padding failed at r={params.r:.6g}, enlarging delta with c_pad={c_pad:g}")
    raise AssertionError("unreachable")


def build_single_scale(
    s: PointSet,
    params: SingleScaleParams,
    settings: Optional[EmbeddingSettings] = None,
    dim_hat: Optional[float] = None,
) -> SingleScaleEmbedding:
    """
    构造单尺度嵌入

    Args:
        s: 归一化点集（范数标签须与 params.norm 一致）
        params: 单尺度参数
        settings: 构造常数，缺省使用全局配置
        dim_hat: 倍增维数；缺省依次使用配置覆盖值或估计值

    Returns:
        SingleScaleEmbedding

    Raises:
        PaddingUnachievable, ClusterTooLarge, ProjectionFailed, ExtensionDidNotConverge（附带上下文）
    """
    started = time.perf_counter_ns()
    cfg = settings or get_settings().embedding
    p = params
    if s.norm is not p.norm:
        raise BadParams(f"Point set norm {s.norm.value} does not match params norm {p.norm.value}")
    if dim_hat is None:
        dim_hat = cfg.dim_override if cfg.dim_override is not None else \
            estimate_doubling(s, cfg.doubling_max_centers, p.seed).dim_hat

    net = greedy_net(s, p.net_radius)
    domain = net.members if p.norm is Norm.L2 else np.arange(s.n, dtype=np.int64)
    decomposition, c_pad = _decompose(s, p, cfg, domain, dim_hat)
    distinct, counts = unique_partitions(decomposition.labels)
    m = decomposition.m

    builder = _Builder(s, p, cfg, domain, net.mask(s.n)[domain])
    accumulator = _FrameAccumulator(domain.size) if p.norm is Norm.L2 else _ColumnAccumulator(domain.size, p.norm)
    keep = domain.size * distinct.shape[0] * max(1, domain.size) <= cfg.keep_blocks_limit
    blocks: Optional[List[Tuple[float, np.ndarray]]] = [] if keep else None
    smoothing = np.zeros((distinct.shape[0], domain.size))
    max_width = 0
    for index, (labels, count) in enumerate(zip(distinct, counts)):
        block, smoothing[index] = builder.block(labels, index)
        max_width = max(max_width, block.shape[1])
        weight = {Norm.L2: math.sqrt(count / m), Norm.L1: count / m, Norm.LINF: 1.0}[p.norm]
        accumulator.add(block * weight)
        if blocks is not None:
            blocks.append((weight, block))

    domain_images = accumulator.result()
    if p.norm is Norm.LINF:
        domain_images = domain_images / (1.0 + 2.0 * math.sqrt(p.delta))

    images = np.zeros((s.n, domain_images.shape[1]))
    images[domain] = domain_images
    lipschitz_bound, ext = None, None
    if p.norm is Norm.L2 and domain.size < s.n:
        images, lipschitz_bound, ext = _extend(s, net, domain_images, cfg)

    calibration = 1.0 + cfg.rescale_c * p.eps if p.norm is not Norm.LINF else 1.0
    images = images / calibration
    images.setflags(write=False)

    embedding = SingleScaleEmbedding(
        params=p,
        source=s,
        net=net,
        domain=domain,
        decomposition=decomposition,
        distinct_labels=distinct,
        counts=counts,
        cluster_maps={key: entry.embedding for key, entry in builder.cache.items()},
        smoothing=smoothing,
        images=images,
        target_dim=int(m * max_width),
        calibration=float(calibration),
        dim_hat=float(dim_hat),
        c_pad=float(c_pad),
        lemma=builder.lemma,
        lipschitz_bound=lipschitz_bound,
        extension=ext,
        blocks=blocks,
    )
    logger.info(
        f"Single scale r={p.r:.6g} ({p.norm.value}): n={s.n}, net={net.size}, m={m}, "
        f"distinct={counts.size}, k={embedding.target_dim}, stored={embedding.stored_dim}, "
        f"took {format_duration(time.perf_counter_ns() - started)}"
    )
    if not builder.lemma.ok:
        logger.warning(f"Cluster-level checks failed at r={p.r:.6g}: {builder.lemma.as_dict()}")
    return embedding


def _extend(
    s: PointSet,
    net: Net,
    net_images: np.ndarray,
    cfg: EmbeddingSettings,
) -> Tuple[np.ndarray, float, Dict[str, Any]]:
    """非网点按到网的距离升序做 Kirszbraun 延拓"""
    sources = s.points[net.members]
    measured = lipschitz_constant(sources, net_images) if net.size > 1 else 0.0
    bound = measured if measured > 0 else 1.0
    problem = ExtensionProblem(sources, net_images, bound, cfg.kirszbraun_tol)

    others = np.flatnonzero(~net.mask(s.n))
    to_net = s.distances[np.ix_(others, net.members)].min(axis=1)
    order = others[np.lexsort((others, to_net))]
    extended = kirszbraun_extend(problem, s.points[order], cfg.kirszbraun_max_iter)

    images = np.zeros((s.n, net_images.shape[1]))
    images[net.members] = net_images
    images[order] = extended
    summary = extension_summary(problem) or {}
    summary["lipschitz_after"] = lipschitz_constant(s.points, images)
    summary["tol"] = cfg.kirszbraun_tol
    summary["order"] = order.tolist()
    return images, float(bound), summary


def evaluate(e: SingleScaleEmbedding, point_index: int) -> np.ndarray:
    """第 point_index 个点的像（只读副本）"""
    if not isinstance(point_index, (int, np.integer)) or not 0 <= point_index < e.n:
        raise IndexOutOfRange(f"Point index {point_index} out of range for {e.n} points")
    return e.images[int(point_index)].copy()


def direct_sum(e: SingleScaleEmbedding) -> Tuple[np.ndarray, np.ndarray]:
    """
    字面直和（仅定义域点）

    Returns:
        (domain 下标, 坐标矩阵)，坐标已含直和缩放与整体缩放

    Raises:
        BadParams: 构造时分块过大未保留
    """
    if e.blocks is None:
        raise BadParams("Literal blocks were not kept for this build (keep_blocks_limit)")
    p = e.params
    if p.norm is Norm.LINF:
        matrix = np.hstack([block for _, block in e.blocks]) / (1.0 + 2.0 * math.sqrt(p.delta))
    else:
        matrix = np.hstack([weight * block for weight, block in e.blocks])
    return e.domain.copy(), matrix / e.calibration


def pair_table(e: SingleScaleEmbedding) -> PairTable:
    """逐对明细：比值相对变换值，window_flag 标记审计窗口"""
    i, j = pair_indices(e.n)
    source = condensed(e.source.distances)
    image = condensed(pairwise_distances(e.images, norm=e.params.norm))
    expected = e.params.transform(source)
    low, high = e.params.window
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(expected > 0, image / expected, 0.0)
    return PairTable(i, j, source, image, ratio, (source >= low) & (source <= high))


def window_lower_bound(p: SingleScaleParams, cfg: AuditSettings) -> Tuple[float, float]:
    """窗口内比值的声明下界及 ℓ∞ 的归一化因子"""
    if p.norm is Norm.LINF:
        normaliser = 1.0 + 2.0 * math.sqrt(p.delta)
        return 1.0 / ((1.0 + cfg.linf_c_b * p.eps) * normaliser), normaliser
    return 1.0 / (1.0 + cfg.c_b * p.eps), 1.0


class ContractAudit(BaseModel):
    """单尺度三条契约的审计结果"""

    lipschitz: DistortionReport
    window: DistortionReport
    extended_window: DistortionReport
    max_norm: float
    norm_bound: float
    norm_violations: int
    measured_c_b: Optional[float] = None
    lemma: Dict[str, Any]
    extension_lipschitz: Optional[float] = None
    extension_bound: Optional[float] = None
    passed: bool


def contract_audit(e: SingleScaleEmbedding, settings: Optional[AuditSettings] = None) -> ContractAudit:
    """
    穷举点对审计：
    (a) 像距/原距 ≤ 1；
    (b) 窗口内 像距/变换值 ∈ [下界, 1]；
    (c) 像范数 ≤ r(1+εδ)
    """
    cfg = settings or get_settings().audit
    p = e.params
    table = pair_table(e)
    reference = p.transform.kind.reference
    expected = p.transform(table.source)

    lipschitz = ratio_report("identity", table.i, table.j, table.source, table.image, table.source,
                             upper=1.0, slack=cfg.float_slack, max_violations=cfg.max_violations,
                             check="lipschitz")
    lower, normaliser = window_lower_bound(p, cfg)
    common = dict(lower=lower, upper=1.0, slack=cfg.float_slack, max_violations=cfg.max_violations)
    window = ratio_report(reference, table.i, table.j, table.source, table.image, expected,
                          window=p.window, check="window", **common)
    extended = ratio_report(reference, table.i, table.j, table.source, table.image, expected,
                            window=p.extended_window, check="extended_window", **common)

    norms = vector_norms(e.images, p.norm)
    bound = p.r * (1.0 + p.eps * p.delta)
    norm_violations = int(np.sum(norms > bound * (1.0 + cfg.float_slack)))
    measured_c_b = None
    if window.pair_count and window.min_ratio > 0:
        measured_c_b = max(0.0, (1.0 / (window.min_ratio * normaliser) - 1.0) / p.eps)

    ext_lipschitz, ext_bound = None, None
    if e.extension is not None:
        ext_lipschitz = e.extension["lipschitz_after"]
        ext_bound = e.lipschitz_bound * (1.0 + 2.0 * e.extension["tol"])
    passed = lipschitz.ok and window.ok and norm_violations == 0 and e.lemma.ok
    if ext_lipschitz is not None:
        passed = passed and ext_lipschitz <= ext_bound * (1.0 + cfg.float_slack)
    return ContractAudit(
        lipschitz=lipschitz,
        window=window,
        extended_window=extended,
        max_norm=float(norms.max()) if norms.size else 0.0,
        norm_bound=bound,
        norm_violations=norm_violations,
        measured_c_b=measured_c_b,
        lemma=e.lemma.as_dict(),
        extension_lipschitz=ext_lipschitz,
        extension_bound=ext_bound,
        passed=passed,
    )
