"""
日志工具模块
"""

import logging
import sys

from ..constants import PROJECT_NAME

logger = logging.getLogger(PROJECT_NAME)

LOG_FORMAT = "[%(asctime)s] [%(levelname)s] %(message)s"
DATE_FORMAT = "%H:%M:%S"


def setup_logging(verbose: bool = False) -> logging.Logger:
    """
    安装唯一的 stderr 处理器，重复调用只调整级别

    Args:
        verbose: 是否输出 DEBUG 级别日志

    Returns:
        项目 logger
    """
    level = logging.DEBUG if verbose else logging.INFO
    if not any(getattr(h, "_seqclass", False) for h in logger.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT, DATE_FORMAT))
        handler._seqclass = True
        logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = False
    return logger
