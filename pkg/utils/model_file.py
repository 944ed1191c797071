"""
模型文件读写

文本格式：首行版本标识，随后 key: value 头部、VOCAB 段与各 PARAM 段。
数值以 17 位有效数字写出，load(save(m)) 与 m 逐位一致。
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from ..constants import MODEL_FORMAT_HEADER, MODEL_FORMAT_MAGIC, MODEL_FORMAT_VERSION
from ..core.encoding import Vocabulary
from ..core.model import ModelParams
from ..errors import FormatError, SeqClassError
from .file_utils import FileUtils
from .logging_utils import logger

HEADER_KEYS = (
    "task_kind",
    "num_classes",
    "vocab_size",
    "max_len",
    "embedding_dim",
    "hidden_dim",
    "cell_kind",
    "dropout_rate",
)
INT_KEYS = {"num_classes", "vocab_size", "max_len", "embedding_dim", "hidden_dim"}


@dataclass(frozen=True)
class ModelFile:
    """模型文件内容：头部、词表与参数"""

    header: Dict[str, Union[str, int, float]]
    vocab: Vocabulary
    model: ModelParams

    @property
    def max_len(self) -> int:
        return int(self.header["max_len"])

    @property
    def version(self) -> str:
        return MODEL_FORMAT_VERSION


def model_header(model: ModelParams, vocab: Vocabulary, max_len: int) -> Dict[str, Union[str, int, float]]:
    return {
        "task_kind": model.head_kind,
        "num_classes": model.num_classes,
        "vocab_size": vocab.size,
        "max_len": int(max_len),
        "embedding_dim": model.embedding_dim,
        "hidden_dim": model.hidden_dim,
        "cell_kind": model.cell_kind,
        "dropout_rate": float(model.dropout_rate),
    }


def dump_model(model: ModelParams, vocab: Vocabulary, max_len: int) -> List[str]:
    """序列化为文本行"""
    if vocab.size != model.vocab_size:
        raise FormatError(f"vocabulary size {vocab.size} != embedding rows {model.vocab_size}", "VOCAB")
    fmt = FileUtils.format_float
    lines = [MODEL_FORMAT_HEADER]
    for key, value in model_header(model, vocab, max_len).items():
        lines.append(f"{key}: {fmt(value) if isinstance(value, float) else value}")
    lines.append(f"VOCAB {vocab.size - 1}")
    lines.extend(f"{token}\t{index}" for token, index in vocab.items_by_index())
    for name, tensor in model.named_tensors().items():
        rows, cols = tensor.shape
        lines.append(f"PARAM {name} {rows} {cols}")
        lines.extend(" ".join(fmt(v) for v in row) for row in tensor)
    return lines


def save_model(model: ModelParams, vocab: Vocabulary, path: Union[str, Path], max_len: int):
    """写出模型文件"""
    FileUtils.write_lines(path, dump_model(model, vocab, max_len))
    logger.info(f"模型已保存: {path}")


def _parse_header(lines: List[str]) -> Tuple[Dict[str, Union[str, int, float]], int]:
    if not lines:
        raise FormatError("file is empty", "header")
    first = lines[0].strip()
    if first != MODEL_FORMAT_HEADER:
        if first.startswith(MODEL_FORMAT_MAGIC):
            raise FormatError(f"unsupported version {first[len(MODEL_FORMAT_MAGIC):].strip()!r}, expected {MODEL_FORMAT_VERSION}", "header")
        raise FormatError(f"not a model file (expected {MODEL_FORMAT_HEADER!r})", "header")

    header: Dict[str, Union[str, int, float]] = {}
    pos = 1
    while pos < len(lines) and not lines[pos].startswith("VOCAB"):
        key, sep, value = lines[pos].partition(":")
        if not sep:
            raise FormatError(f"malformed header line {pos + 1}: {lines[pos]!r}", "header")
        key, value = key.strip(), value.strip()
        try:
            header[key] = int(value) if key in INT_KEYS else float(value) if key == "dropout_rate" else value
        except ValueError as e:
            raise FormatError(f"bad value for {key}: {value!r}", "header") from e
        pos += 1
    missing = [k for k in HEADER_KEYS if k not in header]
    if missing:
        raise FormatError(f"missing header keys: {', '.join(missing)}", "header")
    return header, pos


def _parse_vocab(lines: List[str], pos: int) -> Tuple[Vocabulary, int]:
    if pos >= len(lines):
        raise FormatError("missing section", "VOCAB")
    parts = lines[pos].split()
    if len(parts) != 2 or parts[0] != "VOCAB":
        raise FormatError(f"malformed line {pos + 1}: {lines[pos]!r}", "VOCAB")
    try:
        n = int(parts[1])
    except ValueError as e:
        raise FormatError(f"bad token count {parts[1]!r}", "VOCAB") from e
    entries = lines[pos + 1:pos + 1 + n]
    if len(entries) != n:
        raise FormatError(f"expected {n} entries, found {len(entries)}", "VOCAB")
    mapping: Dict[str, int] = {}
    for offset, entry in enumerate(entries):
        token, sep, index = entry.rpartition("\t")
        if not sep:
            raise FormatError(f"malformed entry on line {pos + 2 + offset}", "VOCAB")
        if token in mapping:
            raise FormatError(f"duplicate token {token!r}", "VOCAB")
        try:
            mapping[token] = int(index)
        except ValueError as e:
            raise FormatError(f"bad index on line {pos + 2 + offset}", "VOCAB") from e
    try:
        vocab = Vocabulary(mapping)
    except SeqClassError as e:
        raise FormatError(str(e), "VOCAB") from e
    return vocab, pos + 1 + n


def _parse_params(lines: List[str], pos: int) -> Dict[str, np.ndarray]:
    tensors: Dict[str, np.ndarray] = {}
    while pos < len(lines):
        parts = lines[pos].split()
        if not parts:
            pos += 1
            continue
        if parts[0] != "PARAM" or len(parts) != 4:
            raise FormatError(f"expected 'PARAM name rows cols' on line {pos + 1}", "PARAM")
        _, name, rows_text, cols_text = parts
        section = f"PARAM {name}"
        if name in tensors:
            raise FormatError("duplicate tensor name", section)
        try:
            rows, cols = int(rows_text), int(cols_text)
        except ValueError as e:
            raise FormatError("bad shape", section) from e
        pos += 1
        values: List[str] = []
        while pos < len(lines) and not lines[pos].startswith("PARAM"):
            values.extend(lines[pos].split())
            pos += 1
        if len(values) != rows * cols:
            raise FormatError(f"declared {rows}×{cols} but found {len(values)} values", section)
        try:
            tensors[name] = np.array([float(v) for v in values], dtype=np.float64).reshape(rows, cols)
        except ValueError as e:
            raise FormatError(f"bad number: {e}", section) from e
    return tensors


def load_model(path: Union[str, Path]) -> ModelFile:
    """
    读取模型文件

    Raises:
        FormatError: 版本不符、段缺失、形状与数值个数不一致、张量重名
    """
    lines = FileUtils.read_lines(path)
    header, pos = _parse_header(lines)
    vocab, pos = _parse_vocab(lines, pos)
    tensors = _parse_params(lines, pos)

    cell_kind = str(header["cell_kind"])
    if cell_kind not in ("rnn", "lstm"):
        raise FormatError(f"unknown cell_kind {cell_kind!r}", "header")
    for name in ModelParams.tensor_names(cell_kind):
        if name not in tensors:
            raise FormatError("missing section", f"PARAM {name}")
    try:
        model = ModelParams.from_tensors(cell_kind, tensors, float(header["dropout_rate"]))
    except SeqClassError as e:
        raise FormatError(str(e), "PARAM") from e

    if model_header(model, vocab, int(header["max_len"])) != header:
        raise FormatError("header does not match parameter shapes", "header")
    logger.debug(f"模型已读取: {path} ({cell_kind}, 词表 {vocab.size}, 长度 {header['max_len']})")
    return ModelFile(header, vocab, model)
