"""
失真报告数据模型

报告本身只是穷举点对比值的汇总；各模块的审计函数负责算出像距离与参考值。
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

QUANTILES = (0.01, 0.05, 0.5, 0.95, 0.99)


class Violation(BaseModel):
    """超出声明界的点对"""

    i: int
    j: int
    source_dist: float
    image_dist: float
    ratio: float
    check: str


class DistortionReport(BaseModel):
    """
    点对比值统计

    reference: identity | G_r | L_r | T_r | d^alpha
    """

    reference: str
    pair_count: int = 0
    min_ratio: Optional[float] = None
    max_ratio: Optional[float] = None
    mean_ratio: Optional[float] = None
    quantiles: Dict[str, float] = Field(default_factory=dict)
    window: Optional[Tuple[float, float]] = None
    lower_bound: Optional[float] = None
    upper_bound: Optional[float] = None
    violation_count: int = 0
    violations: List[Violation] = Field(default_factory=list)

    @property
    def band(self) -> Optional[float]:
        if not self.pair_count or not self.min_ratio:
            return None
        return self.max_ratio / self.min_ratio

    @property
    def ok(self) -> bool:
        return self.violation_count == 0


@dataclass(frozen=True, eq=False)
class PairTable:
    """逐对明细（报告 CSV 的行）"""

    i: np.ndarray
    j: np.ndarray
    source: np.ndarray
    image: np.ndarray
    ratio: np.ndarray
    window: np.ndarray

    def rows(self):
        for row in zip(self.i, self.j, self.source, self.image, self.ratio, self.window):
            yield int(row[0]), int(row[1]), float(row[2]), float(row[3]), float(row[4]), bool(row[5])

    def __len__(self) -> int:
        return int(self.i.size)


def ratio_report(
    reference: str,
    i: np.ndarray,
    j: np.ndarray,
    source: np.ndarray,
    image: np.ndarray,
    expected: np.ndarray,
    lower: Optional[float] = None,
    upper: Optional[float] = None,
    window: Optional[Tuple[float, float]] = None,
    slack: float = 1e-9,
    max_violations: int = 100,
    check: str = "",
) -> DistortionReport:
    """
    汇总 image / expected 的比值

    Args:
        reference: 参考函数名
        i, j: 点对下标
        source: 源距离
        image: 像距离
        expected: 参考值（如 G_r(source)）
        lower, upper: 声明的比值界
        window: 只统计源距离落在该区间内的点对
        slack: 浮点相对余量
        max_violations: 报告中保留的违规行数上限
        check: 违规行的检查名

    Returns:
        DistortionReport
    """
    mask = expected > 0
    if window is not None:
        mask &= (source >= window[0]) & (source <= window[1])
    report = DistortionReport(
        reference=reference,
        window=None if window is None else (float(window[0]), float(window[1])),
        lower_bound=lower,
        upper_bound=upper,
    )
    if not mask.any():
        return report

    ratios = image[mask] / expected[mask]
    bad = np.zeros(ratios.size, dtype=bool)
    if lower is not None:
        bad |= ratios < lower * (1.0 - slack)
    if upper is not None:
        bad |= ratios > upper * (1.0 + slack)

    rows = np.flatnonzero(bad)[:max_violations]
    ii, jj, src, img = i[mask], j[mask], source[mask], image[mask]
    violations = [
        Violation(i=int(ii[k]), j=int(jj[k]), source_dist=float(src[k]), image_dist=float(img[k]),
                  ratio=float(ratios[k]), check=check or reference)
        for k in rows
    ]
    report.pair_count = int(ratios.size)
    report.min_ratio = float(ratios.min())
    report.max_ratio = float(ratios.max())
    report.mean_ratio = float(np.clip(ratios.mean(), ratios.min(), ratios.max()))
    report.quantiles = {f"q{int(q * 100):02d}": float(v) for q, v in zip(QUANTILES, np.quantile(ratios, QUANTILES))}
    report.violation_count = int(bad.sum())
    report.violations = violations
    if report.violation_count:
        logger.warning(f"{report.violation_count} pairs breach the {reference} bounds [{lower}, {upper}]")
    return report


def summary_payload(reports: Dict[str, DistortionReport], extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """组装写入 JSON 的汇总"""
    payload: Dict[str, Any] = {name: report.model_dump() for name, report in reports.items()}
    for name, report in reports.items():
        payload[name]["band"] = report.band
        payload[name]["ok"] = report.ok
    if extra:
        payload.update(extra)
    return payload
