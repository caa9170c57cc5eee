"""
基于雪花嵌入的近似距离标注

每个点的标注是 Φ(x) 各坐标量化到步长 q = ε·r_ref/(2k) 后的整数，r_ref 为
坐标绝对值的最大值。两个标注即可估计 d^α，进而估计原始距离。
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..core.errors import BadParams, HeaderMismatch
from ..embed.snowflake import SnowflakeEmbedding
from ..metric.points import Norm

logger = logging.getLogger(__name__)

LABEL_VERSION = 1


class LabelHeader(BaseModel):
    """所有标注共享的头"""

    model_config = ConfigDict(frozen=True)

    k: int
    q: float
    alpha: float
    M: float
    scale: float
    eps: float

    @property
    def key(self) -> Tuple[int, float, float, float, float]:
        """标注文件中保存的字段；ε 不入文件，不参与比较"""
        return self.k, self.q, self.alpha, self.M, self.scale


@dataclass(frozen=True, eq=False)
class DistanceLabel:
    point_id: int
    codes: np.ndarray
    header: LabelHeader

    def dequantize(self) -> np.ndarray:
        return self.codes.astype(float) * self.header.q


@dataclass(frozen=True)
class QueryResult:
    """
    Args:
        snowflaked: d^α 的估计（归一化单位）
        original: 原始单位下 d 的估计
        snowflaked_factor: 估计值的保证因子 1 + 3ε + √k·q/估计值
        original_factor: snowflaked_factor^{1/α}
    """

    snowflaked: float
    original: float
    snowflaked_factor: float
    original_factor: float


@dataclass(frozen=True, eq=False)
class LabelSet:
    header: LabelHeader
    ids: np.ndarray
    codes: np.ndarray

    def __len__(self) -> int:
        return int(self.ids.size)

    def __getitem__(self, index: int) -> DistanceLabel:
        return DistanceLabel(int(self.ids[index]), self.codes[index], self.header)

    def by_id(self, point_id: int) -> DistanceLabel:
        rows = np.flatnonzero(self.ids == point_id)
        if rows.size == 0:
            raise BadParams(f"No label for point id {point_id}")
        return self[int(rows[0])]

    @property
    def bits_per_label(self) -> int:
        """k·⌈log2(取值范围/q + 2)⌉，取值范围为 2·max|code|·q"""
        span = 2.0 * float(np.abs(self.codes).max()) if self.codes.size else 0.0
        return int(self.header.k * math.ceil(math.log2(span + 2.0)))


def nominal_label_bits(k: int, eps: float, aspect_ratio: float) -> float:
    """k·log2(R/(ε/2k))"""
    return k * math.log2(aspect_ratio / (eps / (2.0 * k)))


def dls_build(e: SnowflakeEmbedding, eps: Optional[float] = None) -> LabelSet:
    """
    量化雪花嵌入得到距离标注

    Args:
        e: 雪花嵌入
        eps: 量化精度，缺省为嵌入的 ε

    Returns:
        LabelSet

    Raises:
        BadParams: 嵌入不是 ℓ2 雪花（查询按欧氏距离解码）
    """
    if e.params.norm is not Norm.L2:
        raise BadParams(f"Distance labels need an l2 snowflake, got {e.params.norm.value}")
    eps = e.params.eps if eps is None else eps
    if not eps > 0:
        raise BadParams(f"eps must be positive, got {eps}")
    images = np.asarray(e.images)
    k = images.shape[1]
    r_ref = float(np.abs(images).max())
    if r_ref == 0.0:
        r_ref = 1.0
    q = eps * r_ref / (2.0 * k)
    codes = np.rint(images / q).astype(np.int32)
    header = LabelHeader(k=k, q=q, alpha=e.params.alpha, M=e.params.M, scale=e.source.scale, eps=eps)
    labels = LabelSet(header, np.arange(e.n, dtype=np.uint64), codes)
    logger.info(f"Built {e.n} labels: k={k}, q={q:.6g}, {labels.bits_per_label} bits each")
    return labels


def dls_query(a: DistanceLabel, b: DistanceLabel) -> QueryResult:
    """
    由两个标注估计距离

    Raises:
        HeaderMismatch: 两个标注来自不同的标注集
    """
    if a.header.key != b.header.key:
        raise HeaderMismatch("Labels come from different label sets", first=a.point_id, second=b.point_id)
    h = a.header
    snowflaked = float(np.linalg.norm((a.codes.astype(np.int64) - b.codes.astype(np.int64)).astype(float))) * h.q
    base = 1.0 + 3.0 * h.eps
    if snowflaked == 0.0:
        return QueryResult(0.0, 0.0, base, base ** (1.0 / h.alpha))
    factor = base + math.sqrt(h.k) * h.q / snowflaked
    original = snowflaked ** (1.0 / h.alpha) * h.scale
    return QueryResult(snowflaked, original, factor, factor ** (1.0 / h.alpha))


def label_summary(labels: LabelSet, aspect_ratio: float) -> Dict[str, float]:
    nominal = nominal_label_bits(labels.header.k, labels.header.eps, max(aspect_ratio, 2.0))
    return {
        "k": labels.header.k,
        "q": labels.header.q,
        "bits_per_label": labels.bits_per_label,
        "nominal_bits": nominal,
        "bits_ratio": labels.bits_per_label / nominal,
    }


def query_all(labels: LabelSet) -> List[QueryResult]:
    """全部点对（i < j）的查询结果，按 pdist 顺序"""
    results = []
    for i in range(len(labels)):
        for j in range(i + 1, len(labels)):
            results.append(dls_query(labels[i], labels[j]))
    return results
