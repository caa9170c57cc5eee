from typing import Any, Dict, Tuple

import numpy as np


def format_duration(duration_ns: int) -> str:
    """
    格式化持续时间

    Args:
        duration_ns: 持续时间（纳秒）

    Returns:
        格式化后的持续时间字符串
    """
    duration_ms = duration_ns / 1_000_000  # 转换为毫秒
    if duration_ms < 1000:
        return f"{duration_ms:.2f}ms"
    duration_s = duration_ms / 1000  # 转换为秒
    if duration_s < 60:
        return f"{duration_s:.2f}s"
    duration_m = duration_s / 60  # 转换为分钟
    return f"{duration_m:.2f}m"


def format_size(size_bytes: float) -> str:
    """
    格式化文件大小

    Args:
        size_bytes: 文件大小（字节）

    Returns:
        格式化后的文件大小字符串
    """
    for unit in ['B', 'KB', 'MB', 'GB', 'TB']:
        if size_bytes < 1024:
            return f"{size_bytes:.2f}{unit}"
        size_bytes /= 1024
    return f"{size_bytes:.2f}PB"


def error_payload(error: Exception, command: str = "") -> Dict[str, Any]:
    """
    创建错误输出数据

    Args:
        error: 异常对象
        command: 出错的子命令

    Returns:
        错误描述（类型、信息、上下文）
    """
    return {
        "command": command,
        "error": {
            "type": type(error).__name__,
            "message": getattr(error, "message", str(error)),
            "context": {k: str(v) for k, v in getattr(error, "context", {}).items()},
        },
    }


def derive_seed(seed: int, *keys: int) -> int:
    """
    由全局种子和若干整数键派生独立的子种子

    Args:
        seed: 全局种子
        *keys: 尺度编号、划分编号等（可为负）

    Returns:
        64 位非负整数种子
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))


def pair_indices(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """与 scipy pdist 压缩顺序一致的 (i, j) 对，i < j"""
    return np.triu_indices(n, k=1)


def condensed(matrix: np.ndarray) -> np.ndarray:
    """方阵上三角（不含对角线）按 pdist 顺序展开"""
    i, j = pair_indices(matrix.shape[0])
    return matrix[i, j]
