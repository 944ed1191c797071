"""
文件处理工具模块
"""

from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import yaml

from ..core.encoding import LabeledRecord
from ..errors import ConfigError, LabelError, ParseError
from .logging_utils import logger

PathLike = Union[str, Path]


class FileUtils:
    """数据与结果文件读写工具类"""

    COMMENT_PREFIX = "#"
    FIELD_SEPARATOR = "\t"

    @staticmethod
    def read_lines(path: PathLike) -> List[str]:
        """读取 UTF-8 文本行"""
        try:
            with open(path, "r", encoding="utf-8", newline="") as f:
                content = f.read()
        except UnicodeDecodeError as e:
            raise ParseError(f"{path} is not valid UTF-8: {e}") from e
        # 只按 \n 分行，推文中的其他分隔字符属于正文
        lines = [line[:-1] if line.endswith("\r") else line for line in content.split("\n")]
        if lines and lines[-1] == "":
            lines.pop()
        return lines

    @staticmethod
    def load_tsv(
        path: PathLike,
        num_classes: Optional[int] = None,
        allow_unlabeled: bool = False,
    ) -> List[LabeledRecord]:
        """
        读取 id<TAB>label<TAB>text 格式的数据文件

        Args:
            path: 文件路径（UTF-8）
            num_classes: 给定时校验标签范围
            allow_unlabeled: 预测数据允许 id<TAB>text 两列格式

        Returns:
            LabeledRecord 列表，空行与 # 开头的行被跳过

        Raises:
            ParseError: 行格式错误，带行号
            LabelError: 标签超出类别范围
        """
        records: List[LabeledRecord] = []
        for line_number, line in enumerate(FileUtils.read_lines(path), start=1):
            if not line.strip() or line.startswith(FileUtils.COMMENT_PREFIX):
                continue
            parts = line.split(FileUtils.FIELD_SEPARATOR, 2)
            label: Optional[int] = None
            if len(parts) == 3 and FileUtils._is_int(parts[1]):
                record_id, label_text, text = parts
                label = int(label_text)
            elif allow_unlabeled and len(parts) >= 2:
                record_id, text = parts[0], FileUtils.FIELD_SEPARATOR.join(parts[1:])
            elif len(parts) == 3:
                raise ParseError(f"label {parts[1]!r} is not an integer", line_number)
            else:
                raise ParseError("expected id<TAB>label<TAB>text", line_number)

            if not record_id:
                raise ParseError("empty record id", line_number)
            if label is not None and (label < 0 or (num_classes is not None and label >= num_classes)):
                upper = f"0..{num_classes - 1}" if num_classes is not None else "non-negative"
                raise LabelError(f"line {line_number}: unknown label {label} (expected {upper})")
            records.append(LabeledRecord(record_id, label, text))

        logger.debug(f"读取 {path}: {len(records)} 条记录")
        return records

    @staticmethod
    def _is_int(text: str) -> bool:
        try:
            int(text)
            return True
        except ValueError:
            return False

    @staticmethod
    def load_yaml_config(path: Optional[PathLike]) -> Dict[str, Any]:
        """读取 YAML 配置文件，返回字典"""
        if not path:
            return {}
        with open(path, "r", encoding="utf-8") as f:
            try:
                data = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise ConfigError(f"解析配置文件 {path} 失败: {e}") from e
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigError(f"配置文件 {path} 顶层必须是映射")
        return data

    @staticmethod
    def format_float(value: float) -> str:
        """17 位有效数字，保证 64 位浮点数精确往返"""
        return format(float(value), ".17g")

    @staticmethod
    def write_lines(path: PathLike, lines: Iterable[str]):
        """写入文本文件，统一使用 \\n 换行"""
        path = Path(path)
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for line in lines:
                f.write(line)
                f.write("\n")

    @staticmethod
    def history_lines(history) -> List[str]:
        """每轮一行: epoch, train_loss, valid_loss, valid_acc"""
        fmt = FileUtils.format_float
        return [
            FileUtils.FIELD_SEPARATOR.join(
                (str(r.epoch), fmt(r.train_loss), fmt(r.valid_loss), fmt(r.valid_acc))
            )
            for r in history.records
        ]

    @staticmethod
    def prediction_lines(ids: Sequence[str], classes: np.ndarray, probabilities: np.ndarray) -> List[str]:
        """每条一行: id, 预测类别, 逗号分隔的概率"""
        lines = []
        for record_id, cls, probs in zip(ids, classes, probabilities):
            prob_text = ",".join(f"{float(p):.6f}" for p in np.atleast_1d(probs))
            lines.append(FileUtils.FIELD_SEPARATOR.join((record_id, str(int(cls)), prob_text)))
        return lines
