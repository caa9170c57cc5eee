import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# 本模块安装的处理器，重复调用时先移除
_installed_handlers = []


def setup_logging(
    level: str = "INFO",
    log_dir: Optional[str] = "logs",
    log_file: str = "snowembed.log",
    file_logging: bool = True,
) -> None:
    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))

    for handler in _installed_handlers:
        root_logger.removeHandler(handler)
    _installed_handlers.clear()

    # 文件处理器
    if file_logging and log_dir:
        try:
            path = Path(log_dir)
            path.mkdir(parents=True, exist_ok=True)
            file_handler = RotatingFileHandler(
                filename=path / log_file,
                maxBytes=10*1024*1024,  # 10MB
                backupCount=5,
                delay=True  # 延迟创建文件，直到第一次写入
            )
            file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
            root_logger.addHandler(file_handler)
            _installed_handlers.append(file_handler)
        except (PermissionError, OSError):
            logging.getLogger(__name__).warning("Cannot create log file, logging to console only")

    # 控制台处理器，写到 stderr，不干扰 stdout 上的报告
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root_logger.addHandler(console_handler)
    _installed_handlers.append(console_handler)

    # 数值库的日志只保留警告
    logging.getLogger("scipy").setLevel(logging.WARNING)
