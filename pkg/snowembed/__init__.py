"""倍增点集的低失真降维：单尺度嵌入、雪花嵌入与穷举审计"""

__version__ = "1.0.0"
