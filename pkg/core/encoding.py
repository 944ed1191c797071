"""
推文编码模块

分词 → 词典 → 定长整数序列。下标 0 同时表示未知词与填充。
"""

from collections import Counter
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..constants import PAD_INDEX, TASK_SCHEMAS
from ..errors import EmptyInputError, ParameterError
from ..utils.logging_utils import logger


@dataclass(frozen=True)
class LabeledRecord:
    """一条推文记录，预测数据可以没有标签"""

    id: str
    label: Optional[int]
    text: str


@dataclass(frozen=True)
class Vocabulary:
    """小写词到正整数下标的映射，0 保留"""

    token_to_index: Mapping[str, int]
    _index_to_token: Tuple[Optional[str], ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        mapping = dict(self.token_to_index)
        indices = sorted(mapping.values())
        if indices != list(range(1, len(mapping) + 1)):
            raise ParameterError("vocabulary indices must be exactly 1..n")
        for token in mapping:
            if token != token.lower() or not token:
                raise ParameterError(f"vocabulary token must be non-empty lowercase: {token!r}")
        inverse: List[Optional[str]] = [None] * (len(mapping) + 1)
        for token, index in mapping.items():
            inverse[index] = token
        object.__setattr__(self, "token_to_index", MappingProxyType(mapping))
        object.__setattr__(self, "_index_to_token", tuple(inverse))

    @property
    def size(self) -> int:
        """词数 + 1（保留下标 0）"""
        return len(self.token_to_index) + 1

    def index_of(self, token: str) -> int:
        return self.token_to_index.get(token, PAD_INDEX)

    def token_of(self, index: int) -> Optional[str]:
        if 0 < index < self.size:
            return self._index_to_token[index]
        return None

    def items_by_index(self) -> List[Tuple[str, int]]:
        """按下标升序的 (词, 下标) 列表"""
        return [(self._index_to_token[i], i) for i in range(1, self.size)]


@dataclass(frozen=True)
class EncodedDataset:
    """编码后的数据集，labels 中 -1 表示无标签"""

    ids: Tuple[str, ...]
    sequences: np.ndarray  # N × max_len, int64
    labels: np.ndarray  # N, int64

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def max_len(self) -> int:
        return int(self.sequences.shape[1])

    @property
    def has_labels(self) -> bool:
        return len(self) > 0 and bool(np.all(self.labels >= 0))

    def subset(self, indices: Sequence[int]) -> "EncodedDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return EncodedDataset(
            ids=tuple(self.ids[i] for i in idx),
            sequences=self.sequences[idx],
            labels=self.labels[idx],
        )


def tokenize(text: str) -> List[str]:
    """
    小写后按 Unicode 空白切分，标点保留在词上

    Args:
        text: 原始推文

    Returns:
        词列表，空输入返回空列表
    """
    if not text:
        return []
    return text.lower().split()


def build_vocabulary(corpus: Iterable[LabeledRecord], top_words: Optional[int] = None) -> Vocabulary:
    """
    按词频降序分配下标，频次相同时按语料中首次出现的顺序

    Args:
        corpus: 训练记录
        top_words: 只保留最高频的前 N 个词

    Returns:
        Vocabulary实例

    Raises:
        EmptyInputError: 语料为空
    """
    counts: Counter = Counter()
    first_seen: Dict[str, int] = {}
    n_records = 0
    for record in corpus:
        n_records += 1
        for token in tokenize(record.text):
            counts[token] += 1
            if token not in first_seen:
                first_seen[token] = len(first_seen)

    if n_records == 0:
        raise EmptyInputError("cannot build a vocabulary from an empty corpus")
    if top_words is not None and top_words < 1:
        raise ParameterError(f"top_words must be positive, got {top_words}")

    ranked = sorted(counts, key=lambda t: (-counts[t], first_seen[t]))
    if top_words is not None:
        ranked = ranked[:top_words]

    vocab = Vocabulary({token: rank for rank, token in enumerate(ranked, start=1)})
    logger.debug(f"词表构建完成: {n_records} 条记录, {len(counts)} 个不同词, 保留 {vocab.size - 1} 个")
    return vocab


def encode_sequence(tokens: Sequence[str], vocab: Vocabulary, max_len: int) -> np.ndarray:
    """
    映射为定长下标序列：超长保留前 max_len 个词，不足时左侧补 0

    Args:
        tokens: 词列表
        vocab: 词表
        max_len: 目标长度

    Returns:
        长度为 max_len 的 int64 向量
    """
    if max_len < 1:
        raise ParameterError(f"max_len must be positive, got {max_len}")
    indices = [vocab.index_of(token) for token in tokens[:max_len]]
    out = np.full(max_len, PAD_INDEX, dtype=np.int64)
    if indices:
        out[max_len - len(indices):] = indices
    return out


def decode_sequence(sequence: Sequence[int], vocab: Vocabulary) -> List[Optional[str]]:
    """去掉左侧填充后反查词表，未知词为 None"""
    values = [int(v) for v in sequence]
    start = 0
    while start < len(values) and values[start] == PAD_INDEX:
        start += 1
    return [vocab.token_of(v) for v in values[start:]]


def encode_dataset(
    records: Sequence[LabeledRecord],
    vocab: Vocabulary,
    max_len: int,
    discard_long: bool = False,
) -> EncodedDataset:
    """
    编码整个数据集

    Args:
        records: 记录列表
        vocab: 词表（只由训练集构建）
        max_len: 序列长度
        discard_long: 丢弃超长记录（仅训练时使用），否则截断

    Returns:
        EncodedDataset，标签与保留的行对齐
    """
    if max_len < 1:
        raise ParameterError(f"max_len must be positive, got {max_len}")

    ids: List[str] = []
    rows: List[np.ndarray] = []
    labels: List[int] = []
    discarded = 0
    for record in records:
        tokens = tokenize(record.text)
        if discard_long and len(tokens) > max_len:
            discarded += 1
            continue
        ids.append(record.id)
        rows.append(encode_sequence(tokens, vocab, max_len))
        labels.append(-1 if record.label is None else int(record.label))

    if discarded:
        logger.info(f"丢弃 {discarded} 条超过 {max_len} 个词的推文")

    sequences = np.vstack(rows) if rows else np.zeros((0, max_len), dtype=np.int64)
    return EncodedDataset(
        ids=tuple(ids),
        sequences=sequences.astype(np.int64, copy=False),
        labels=np.asarray(labels, dtype=np.int64),
    )


def unknown_rate(records: Iterable[LabeledRecord], vocab: Vocabulary) -> float:
    """词表外词在全部词中所占比例"""
    total = unknown = 0
    for record in records:
        for token in tokenize(record.text):
            total += 1
            unknown += vocab.index_of(token) == PAD_INDEX
    return unknown / total if total else 0.0


def check_split_shape(sequences: np.ndarray, task: str, split: str) -> Tuple[bool, str]:
    """
    核对编码矩阵形状与共享任务公布的数据规模

    Args:
        sequences: 编码矩阵
        task: adr / intake
        split: train / valid / test

    Returns:
        Tuple[bool, str]: (是否一致, 说明信息)
    """
    schema = TASK_SCHEMAS.get(task)
    if schema is None:
        return False, f"未知任务: {task}"
    expected_rows = schema["splits"].get(split)
    if expected_rows is None:
        return False, f"任务 {task} 没有 {split} 划分"
    expected = (expected_rows, schema["max_len"])
    actual = tuple(int(d) for d in sequences.shape)
    if actual != expected:
        return False, f"{task}/{split} 形状 {actual[0]}*{actual[1]} 与公布的 {expected[0]}*{expected[1]} 不一致"
    return True, f"{task}/{split} 形状 {actual[0]}*{actual[1]} 一致"
