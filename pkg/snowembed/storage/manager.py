import csv
import json
import logging
import os
import threading
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..apps.labeling import LABEL_VERSION, LabelHeader, LabelSet
from ..audit.report import PairTable
from ..core.errors import BadParams, EmptyInput
from ..embed.decomposition import PaddedDecomposition
from ..metric.points import Norm, PointSet
from ..utils.helpers import format_size

logger = logging.getLogger(__name__)

LABEL_MAGIC = b"SNFL"
LABEL_HEADER_DTYPE = np.dtype([
    ("magic", "S4"),
    ("version", "<u2"),
    ("k", "<u4"),
    ("q", "<f8"),
    ("alpha", "<f8"),
    ("M", "<f8"),
    ("scale", "<f8"),
])
REPORT_COLUMNS = ("pair_i", "pair_j", "source_dist", "image_dist", "ratio", "window_flag")


def _label_record_dtype(k: int) -> np.dtype:
    return np.dtype([("id", "<u8"), ("codes", "<i4", (k,))])


def _float(value: float) -> str:
    return format(float(value), ".17g")


class Manager:
    """文件存储管理器：点集、分解、嵌入转储、标注文件与报告"""

    def __init__(self, base_dir: str = "."):
        """
        初始化存储管理器

        Args:
            base_dir: 相对路径的根目录
        """
        self.base_dir = base_dir
        self.lock = threading.Lock()

    def _path(self, file_path: str) -> str:
        path = file_path if os.path.isabs(file_path) else os.path.join(self.base_dir, file_path)
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        return path

    def _write_json(self, path: str, payload: Dict[str, Any]) -> None:
        try:
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(payload, f, indent=4, ensure_ascii=False, sort_keys=True)
                f.write("\n")
        except Exception as e:
            logger.error(f"Error saving data to {path}: {str(e)}")
            raise

    def _read_json(self, path: str) -> Dict[str, Any]:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except json.JSONDecodeError as e:
            logger.error(f"Error decoding JSON from {path}: {str(e)}")
            raise BadParams(f"Malformed JSON file {path}", line=e.lineno)

    # 点集

    def save_points(self, s: PointSet, file_path: str, fmt: Optional[str] = None) -> str:
        """
        保存点集，格式由 fmt 或扩展名决定（csv / json）

        CSV 首行为 ``# norm=<p> scale=<s>``，坐标以 %.17g 写出。
        """
        path = self._path(file_path)
        fmt = fmt or ("json" if path.endswith(".json") else "csv")
        with self.lock:
            if fmt == "json":
                self._write_json(path, {"norm": s.norm.tag, "scale": s.scale, "points": s.points.tolist()})
            else:
                np.savetxt(path, s.points, fmt="%.17g", delimiter=",",
                           header=f"norm={s.norm.tag} scale={_float(s.scale)}", comments="# ")
        logger.info(f"Saved {s.n} points to {path}")
        return path

    def load_points(self, file_path: str, norm: Optional[str] = None) -> PointSet:
        """
        读取点集

        Args:
            file_path: CSV 或 JSON 文件
            norm: 覆盖文件头中的范数标签

        Raises:
            EmptyInput: 文件中没有点
        """
        path = self._path(file_path)
        with self.lock:
            if path.endswith(".json"):
                payload = self._read_json(path)
                header = {"norm": str(payload.get("norm", "2")), "scale": str(payload.get("scale", 1.0))}
                points = np.asarray(payload.get("points") or [], dtype=float)
            else:
                header = self._csv_header(path)
                points = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        if points.size == 0:
            raise EmptyInput(f"No points in {path}")
        return PointSet(points, norm=Norm.parse(norm or header.get("norm", "2")),
                        scale=float(header.get("scale", 1.0)))

    @staticmethod
    def _csv_header(path: str) -> Dict[str, str]:
        header: Dict[str, str] = {}
        with open(path, 'r', encoding='utf-8') as f:
            first = f.readline()
        if first.startswith("#"):
            for token in first.lstrip("#").split():
                key, _, value = token.partition("=")
                if value:
                    header[key] = value
        return header

    # 分解

    def save_decomposition(self, d: PaddedDecomposition, file_path: str) -> str:
        path = self._path(file_path)
        with self.lock:
            self._write_json(path, d.to_dict())
        return path

    def load_decomposition(self, file_path: str) -> PaddedDecomposition:
        path = self._path(file_path)
        with self.lock:
            payload = self._read_json(path)
        return PaddedDecomposition(
            labels=np.asarray(payload["partitions"], dtype=np.int64),
            delta=float(payload["delta"]),
            pad_radius=float(payload["pad_radius"]),
            eps_pad=float(payload["eps_pad"]),
            padded_fraction=np.asarray(payload["padded_fraction"], dtype=float),
            members=np.asarray(payload["members"], dtype=np.int64),
        )

    # 嵌入转储

    def save_embedding(self, header: Dict[str, Any], images: np.ndarray, file_path: str) -> Tuple[str, str]:
        """
        JSON 头加小端 float64 行优先数据块（同名 .bin）

        Returns:
            (头文件路径, 数据文件路径)
        """
        path = self._path(file_path)
        stem = path[:-5] if path.endswith(".json") else path
        json_path, bin_path = stem + ".json", stem + ".bin"
        block = np.ascontiguousarray(images, dtype="<f8")
        payload = dict(header)
        payload["data"] = {"file": os.path.basename(bin_path), "dtype": "<f8", "order": "C",
                           "shape": list(block.shape)}
        with self.lock:
            self._write_json(json_path, payload)
            block.tofile(bin_path)
        logger.info(f"Saved embedding {block.shape[0]}x{block.shape[1]} to {json_path}")
        return json_path, bin_path

    def load_embedding(self, file_path: str) -> Tuple[Dict[str, Any], np.ndarray]:
        path = self._path(file_path)
        json_path = path if path.endswith(".json") else path + ".json"
        with self.lock:
            header = self._read_json(json_path)
            data = header.get("data") or {}
            bin_path = os.path.join(os.path.dirname(json_path), data.get("file", ""))
            images = np.fromfile(bin_path, dtype="<f8")
        shape = tuple(data.get("shape") or (0, 0))
        if images.size != int(np.prod(shape)):
            raise BadParams(f"Embedding block {bin_path} does not match shape {shape}")
        return header, images.reshape(shape)

    # 标注文件

    def save_labels(self, labels: LabelSet, file_path: str) -> str:
        h = labels.header
        head = np.array([(LABEL_MAGIC, LABEL_VERSION, h.k, h.q, h.alpha, h.M, h.scale)], dtype=LABEL_HEADER_DTYPE)
        records = np.empty(len(labels), dtype=_label_record_dtype(h.k))
        records["id"] = labels.ids
        records["codes"] = labels.codes
        path = self._path(file_path)
        with self.lock:
            with open(path, 'wb') as f:
                f.write(head.tobytes())
                f.write(records.tobytes())
        logger.info(f"Saved {len(labels)} labels ({format_size(head.nbytes + records.nbytes)}) to {path}")
        return path

    def load_labels(self, file_path: str) -> LabelSet:
        """
        读取二进制标注文件

        文件头不含 ε，按 2k / max|code| 还原。

        Raises:
            BadParams: 魔数、版本或长度不符
        """
        path = self._path(file_path)
        with self.lock:
            with open(path, 'rb') as f:
                raw = f.read()
        if len(raw) < LABEL_HEADER_DTYPE.itemsize:
            raise BadParams(f"Label file {path} is truncated")
        head = np.frombuffer(raw, dtype=LABEL_HEADER_DTYPE, count=1)[0]
        if bytes(head["magic"]) != LABEL_MAGIC:
            raise BadParams(f"Label file {path} has a bad magic number")
        if int(head["version"]) != LABEL_VERSION:
            raise BadParams(f"Unsupported label file version {int(head['version'])}")
        k = int(head["k"])
        record = _label_record_dtype(k)
        body = raw[LABEL_HEADER_DTYPE.itemsize:]
        if len(body) % record.itemsize:
            raise BadParams(f"Label file {path} has a partial record")
        records = np.frombuffer(body, dtype=record)
        codes = np.array(records["codes"], dtype=np.int32).reshape(-1, k)
        peak = int(np.abs(codes).max()) if codes.size else 0
        header = LabelHeader(k=k, q=float(head["q"]), alpha=float(head["alpha"]), M=float(head["M"]),
                             scale=float(head["scale"]), eps=2.0 * k / peak if peak else 0.0)
        return LabelSet(header, np.array(records["id"], dtype=np.uint64), codes)

    # 报告

    def save_report(self, table: Optional[PairTable], summary: Dict[str, Any], file_path: str,
                    fmt: str = "csv") -> Dict[str, str]:
        """
        写出逐对 CSV（fmt 为 csv 时）和 JSON 汇总

        Returns:
            各输出文件的路径
        """
        path = self._path(file_path)
        stem = os.path.splitext(path)[0]
        written: Dict[str, str] = {}
        with self.lock:
            if table is not None and fmt == "csv":
                written["pairs"] = stem + ".csv"
                with open(written["pairs"], 'w', encoding='utf-8', newline='') as f:
                    writer = csv.writer(f, lineterminator="\n")
                    writer.writerow(REPORT_COLUMNS)
                    for i, j, source, image, ratio, flag in table.rows():
                        writer.writerow([i, j, _float(source), _float(image), _float(ratio), int(flag)])
            written["summary"] = stem + ".json"
            self._write_json(written["summary"], summary)
        logger.info(f"Report written to {', '.join(written.values())}")
        return written

    def load_report(self, file_path: str) -> PairTable:
        path = self._path(file_path)
        with self.lock:
            rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if rows.size == 0:
            rows = np.zeros((0, len(REPORT_COLUMNS)))
        return PairTable(rows[:, 0].astype(np.int64), rows[:, 1].astype(np.int64), rows[:, 2], rows[:, 3],
                         rows[:, 4], rows[:, 5].astype(bool))
