from typing import Any, Dict


class EmbeddingError(Exception):
    """所有嵌入相关错误的基类，携带上下文信息"""

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = dict(context)

    def with_context(self, **context: Any) -> "EmbeddingError":
        """追加上下文（尺度、划分编号、簇成员等）后返回自身"""
        for key, value in context.items():
            self.context.setdefault(key, value)
        return self

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{k}={v}" for k, v in sorted(self.context.items()))
        return f"{self.message} ({details})"


class EmptyInput(EmbeddingError):
    pass


class DuplicatePoints(EmbeddingError):
    pass


class IndexOutOfRange(EmbeddingError, IndexError):
    pass


class UnknownKind(EmbeddingError, ValueError):
    pass


class BadParams(EmbeddingError, ValueError):
    pass


class PaddingUnachievable(EmbeddingError):
    """Δ 相对 pad_radius·dim 过小，调用方应增大 Δ"""


class NotEuclidean(EmbeddingError):
    pass


class ClusterTooLarge(EmbeddingError):
    pass


class Infeasible(EmbeddingError):
    pass


class EmptyNetIntersection(EmbeddingError):
    pass


class ProjectionFailed(EmbeddingError):
    pass


class DuplicateSources(EmbeddingError):
    pass


class ExtensionDidNotConverge(EmbeddingError):
    pass


class HeaderMismatch(EmbeddingError):
    pass
