"""
异常定义

每个异常携带稳定的命令行退出码，供 main 统一映射
"""

from typing import Optional

from .constants import (
    EXIT_DATA_FORMAT,
    EXIT_SCHEMA_MISMATCH,
    EXIT_USAGE,
    MODEL_FORMAT_VERSION,
)


class SeqClassError(ValueError):
    """所有引擎异常的基类"""

    exit_code = EXIT_USAGE


class UsageError(SeqClassError):
    """命令行参数错误"""


class ConfigError(SeqClassError):
    """配置项类型或范围错误"""


class ParameterError(SeqClassError):
    """运算参数非法（如 dropout 比例、差分步长）"""


class ShapeError(SeqClassError):
    """矩阵形状不匹配"""


class ConsistencyError(SeqClassError):
    """前向缓存与模型/批次不一致"""


class EmptyInputError(SeqClassError):
    """输入为空"""

    exit_code = EXIT_DATA_FORMAT


class LabelError(SeqClassError):
    """类别标签越界"""

    exit_code = EXIT_DATA_FORMAT


class ParseError(SeqClassError):
    """数据文件解析失败"""

    exit_code = EXIT_DATA_FORMAT

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class FormatError(SeqClassError):
    """模型文件格式错误"""

    exit_code = EXIT_DATA_FORMAT

    def __init__(self, message: str, section: Optional[str] = None):
        self.section = section
        if section:
            message = f"[{section}] {message}"
        super().__init__(message)


class SchemaMismatchError(SeqClassError):
    """模型与数据的结构不一致（词表、长度、类别数）"""

    exit_code = EXIT_SCHEMA_MISMATCH

    def __init__(self, message: str, version: str = MODEL_FORMAT_VERSION):
        self.version = version
        super().__init__(f"schema mismatch (model format {version}): {message}")


class NumericError(SeqClassError):
    """运算结果出现 NaN / Inf"""


class EmbeddingIndexError(SeqClassError, IndexError):
    """序列下标超出嵌入矩阵行数"""

    def __init__(self, position: int, value: int, rows: int):
        self.position = position
        self.value = value
        super().__init__(f"index {value} at position {position} is outside embedding rows 0..{rows - 1}")
