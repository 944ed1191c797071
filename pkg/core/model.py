"""
前向计算模块

词嵌入 → 循环层（tanh RNN 或窥孔 LSTM）→ 最后一步隐状态上的 dropout → 输出层。
所有张量都是二维矩阵，偏置与窥孔权重存为 1×H，按行广播到批量。
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ..errors import ConsistencyError, EmbeddingIndexError, ParameterError, ShapeError
from .numerics import (
    DTYPE,
    Matrix,
    Rng,
    hadamard,
    matmul,
    shape_str,
    sigmoid,
    softmax,
    tanh_act,
    zeros,
)

LSTM_GATES = ("ig", "fg", "og")


@dataclass(frozen=True)
class EmbeddingParams:
    weights: Matrix  # vocab_size × embedding_dim


@dataclass(frozen=True)
class RnnParams:
    w: Matrix  # embedding_dim × hidden_dim
    p: Matrix  # hidden_dim × hidden_dim
    b: Matrix  # 1 × hidden_dim


@dataclass(frozen=True)
class LstmParams:
    w_ig: Matrix
    p_ig: Matrix
    q_ig: Matrix  # 1 × hidden_dim，对角窥孔权重
    b_ig: Matrix
    w_fg: Matrix
    p_fg: Matrix
    q_fg: Matrix
    b_fg: Matrix
    w_og: Matrix
    p_og: Matrix
    q_og: Matrix
    b_og: Matrix
    w_m: Matrix
    p_m: Matrix
    b_m: Matrix


@dataclass(frozen=True)
class HeadParams:
    w_out: Matrix  # hidden_dim × k_out
    b_out: Matrix  # 1 × k_out

    @property
    def activation(self) -> str:
        return "sigmoid" if self.w_out.shape[1] == 1 else "softmax"


CellParams = Union[RnnParams, LstmParams]


@dataclass(frozen=True)
class ModelParams:
    """完整模型参数"""

    embedding: EmbeddingParams
    cell: CellParams
    head: HeadParams
    dropout_rate: float = 0.0

    def __post_init__(self):
        self.validate()

    @property
    def cell_kind(self) -> str:
        return "lstm" if isinstance(self.cell, LstmParams) else "rnn"

    @property
    def vocab_size(self) -> int:
        return int(self.embedding.weights.shape[0])

    @property
    def embedding_dim(self) -> int:
        return int(self.embedding.weights.shape[1])

    @property
    def hidden_dim(self) -> int:
        return int(self.head.w_out.shape[0])

    @property
    def num_classes(self) -> int:
        k_out = int(self.head.w_out.shape[1])
        return 2 if k_out == 1 else k_out

    @property
    def head_kind(self) -> str:
        return "binary" if self.head.activation == "sigmoid" else "multiclass"

    def named_tensors(self) -> Dict[str, Matrix]:
        """按固定顺序列出全部参数张量"""
        tensors = {"embedding.weights": self.embedding.weights}
        for f in fields(self.cell):
            tensors[f"{self.cell_kind}.{f.name}"] = getattr(self.cell, f.name)
        tensors["head.w_out"] = self.head.w_out
        tensors["head.b_out"] = self.head.b_out
        return tensors

    @classmethod
    def from_tensors(cls, cell_kind: str, tensors: Dict[str, Matrix], dropout_rate: float = 0.0) -> "ModelParams":
        """由 named_tensors 形式的字典重建模型"""
        cell_type = {"rnn": RnnParams, "lstm": LstmParams}.get(cell_kind)
        if cell_type is None:
            raise ParameterError(f"unknown cell kind: {cell_kind}")
        expected = {"embedding.weights", "head.w_out", "head.b_out"}
        expected.update(f"{cell_kind}.{f.name}" for f in fields(cell_type))
        if set(tensors) != expected:
            missing = sorted(expected - set(tensors))
            extra = sorted(set(tensors) - expected)
            raise ShapeError(f"tensor set mismatch, missing={missing} unexpected={extra}")
        cell = cell_type(**{f.name: tensors[f"{cell_kind}.{f.name}"] for f in fields(cell_type)})
        return cls(
            EmbeddingParams(tensors["embedding.weights"]),
            cell,
            HeadParams(tensors["head.w_out"], tensors["head.b_out"]),
            dropout_rate,
        )

    @staticmethod
    def tensor_names(cell_kind: str) -> List[str]:
        """某种循环单元的全部张量名，顺序与 named_tensors 一致"""
        cell_type = {"rnn": RnnParams, "lstm": LstmParams}[cell_kind]
        return ["embedding.weights", *(f"{cell_kind}.{f.name}" for f in fields(cell_type)), "head.w_out", "head.b_out"]

    def expected_shapes(self) -> Dict[str, Tuple[int, int]]:
        return {name: tuple(t.shape) for name, t in self.named_tensors().items()}

    def with_tensors(self, tensors: Dict[str, Matrix]) -> "ModelParams":
        """用同名张量替换参数，返回新模型"""
        current = self.named_tensors()
        for name, value in tensors.items():
            if name not in current:
                raise ShapeError(f"unknown tensor {name}")
            if value.shape != current[name].shape:
                raise ShapeError(f"{name}: expected {shape_str(current[name])}, got {shape_str(value)}")
        merged = {**current, **tensors}
        prefix = f"{self.cell_kind}."
        cell = type(self.cell)(**{n[len(prefix):]: v for n, v in merged.items() if n.startswith(prefix)})
        return replace(
            self,
            embedding=EmbeddingParams(merged["embedding.weights"]),
            cell=cell,
            head=HeadParams(merged["head.w_out"], merged["head.b_out"]),
        )

    def validate(self):
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ParameterError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        e = self.embedding_dim
        h = self.hidden_dim
        if e < 1 or self.vocab_size < 1:
            raise ShapeError(f"embedding must be non-empty, got {shape_str(self.embedding.weights)}")
        for name, tensor in self.named_tensors().items():
            if tensor.ndim != 2:
                raise ShapeError(f"{name} must be a matrix")
            if name.startswith("embedding") or name.startswith("head"):
                continue
            field_name = name.split(".", 1)[1]
            if field_name.startswith("w"):
                expected = (e, h)
            elif field_name.startswith("p"):
                expected = (h, h)
            else:
                expected = (1, h)
            if tensor.shape != expected:
                raise ShapeError(f"{name}: expected {expected[0]}×{expected[1]}, got {shape_str(tensor)}")
        if self.head.b_out.shape != (1, self.head.w_out.shape[1]):
            raise ShapeError(f"head.b_out must be 1×{self.head.w_out.shape[1]}")


@dataclass
class StepCache:
    """单个时间步保存的激活值"""

    h_prev: Matrix
    m_prev: Optional[Matrix]
    h: Matrix
    m: Optional[Matrix] = None
    gates: Optional[Dict[str, Matrix]] = None


@dataclass
class ForwardCache:
    """BPTT 所需的全部中间结果（批量形式）"""

    sequences: np.ndarray  # B × L
    xs: np.ndarray  # B × L × E
    steps: List[StepCache]
    dropout_mask: Optional[Matrix]
    features: Matrix  # dropout 后的最后一步隐状态
    probabilities: Matrix  # B × k_out
    cell_kind: str
    shapes: Dict[str, Tuple[int, int]]

    @property
    def batch_size(self) -> int:
        return int(self.sequences.shape[0])


def glorot_uniform(rng: Rng, fan_in: int, fan_out: int, shape: Tuple[int, int]) -> Matrix:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(shape, -limit, limit)


def init_model(
    vocab_size: int,
    embedding_dim: int,
    hidden_dim: int,
    num_classes: int,
    cell_kind: str,
    rng: Rng,
    dropout_rate: float = 0.0,
    random_bias: bool = False,
) -> ModelParams:
    """
    随机初始化模型

    权重取 ±sqrt(6/(fan_in+fan_out)) 的均匀分布，偏置默认为 0；
    random_bias 用于梯度检验，让偏置也取随机值。
    """
    if cell_kind not in ("rnn", "lstm"):
        raise ParameterError(f"unknown cell kind: {cell_kind}")
    e, h = embedding_dim, hidden_dim
    k_out = 1 if num_classes == 2 else num_classes

    def bias(n: int) -> Matrix:
        return rng.uniform((1, n), -0.5, 0.5) if random_bias else zeros(1, n)

    embedding = EmbeddingParams(glorot_uniform(rng, vocab_size, e, (vocab_size, e)))

    if cell_kind == "rnn":
        cell: CellParams = RnnParams(
            w=glorot_uniform(rng, e, h, (e, h)),
            p=glorot_uniform(rng, h, h, (h, h)),
            b=bias(h),
        )
    else:
        parts = {}
        for g in LSTM_GATES:
            parts[f"w_{g}"] = glorot_uniform(rng, e, h, (e, h))
            parts[f"p_{g}"] = glorot_uniform(rng, h, h, (h, h))
            parts[f"q_{g}"] = glorot_uniform(rng, h, h, (1, h))
            parts[f"b_{g}"] = bias(h)
        parts["w_m"] = glorot_uniform(rng, e, h, (e, h))
        parts["p_m"] = glorot_uniform(rng, h, h, (h, h))
        parts["b_m"] = bias(h)
        cell = LstmParams(**parts)

    head = HeadParams(glorot_uniform(rng, h, k_out, (h, k_out)), bias(k_out))
    return ModelParams(embedding, cell, head, dropout_rate)


def embed(seq: np.ndarray, e: EmbeddingParams) -> Matrix:
    """
    词嵌入：one-hot 乘嵌入矩阵等价于按下标取行

    Args:
        seq: 长度 L 的下标向量，或 B×L 下标矩阵

    Returns:
        L×E 矩阵（批量时为 B×L×E）

    Raises:
        EmbeddingIndexError: 下标越界，报告位置和值
    """
    seq = np.asarray(seq, dtype=np.int64)
    rows = e.weights.shape[0]
    bad = np.argwhere((seq < 0) | (seq >= rows))
    if bad.size:
        position = tuple(int(i) for i in bad[0])
        pos = position[-1] if len(position) == 1 else position
        raise EmbeddingIndexError(pos, int(seq[tuple(bad[0])]), rows)
    return e.weights[seq]


def rnn_step(x_t: Matrix, h_prev: Matrix, p: RnnParams) -> Matrix:
    """h_t = tanh(x_t·w + h_prev·p + b)，t=0 时调用方传入零向量"""
    return tanh_act(matmul(x_t, p.w) + matmul(h_prev, p.p) + p.b)


def _peephole(m_prev: Matrix, q: Matrix) -> Matrix:
    return hadamard(m_prev, np.broadcast_to(q, m_prev.shape))


def _lstm_forward(
    x_t: Matrix, h_prev: Matrix, m_prev: Matrix, p: LstmParams
) -> Tuple[Matrix, Matrix, Dict[str, Matrix]]:
    gates = {}
    for g in LSTM_GATES:
        gates[g] = sigmoid(
            matmul(x_t, getattr(p, f"w_{g}"))
            + matmul(h_prev, getattr(p, f"p_{g}"))
            + _peephole(m_prev, getattr(p, f"q_{g}"))
            + getattr(p, f"b_{g}")
        )
    # 输出门的窥孔作用于 m_{t-1}，而不是 m_t
    gates["m1"] = tanh_act(matmul(x_t, p.w_m) + matmul(h_prev, p.p_m) + p.b_m)
    m_t = hadamard(gates["fg"], m_prev) + hadamard(gates["ig"], gates["m1"])
    gates["tanh_m"] = tanh_act(m_t)
    h_t = hadamard(gates["og"], gates["tanh_m"])
    return h_t, m_t, gates


def lstm_step(x_t: Matrix, h_prev: Matrix, m_prev: Matrix, p: LstmParams) -> Tuple[Matrix, Matrix]:
    """窥孔 LSTM 单步，返回 (h_t, m_t)"""
    if h_prev.shape != m_prev.shape:
        raise ShapeError(f"h_prev {shape_str(h_prev)} and m_prev {shape_str(m_prev)} differ")
    h_t, m_t, _ = _lstm_forward(x_t, h_prev, m_prev, p)
    return h_t, m_t


def dropout_mask(shape: Tuple[int, int], rate: float, rng: Rng) -> Matrix:
    """反向 dropout 掩码：以概率 rate 置 0，保留项放大 1/(1-rate)"""
    if not (0.0 <= rate < 1.0):
        raise ParameterError(f"dropout rate must be in [0, 1), got {rate}")
    keep = rng.uniform(shape) >= rate
    return keep.astype(DTYPE) / (1.0 - rate)


def dropout(x: Matrix, rate: float, rng: Rng, training: bool) -> Matrix:
    """
    训练时按 rate 随机丢弃并放大保留项，推理时原样返回

    Raises:
        ParameterError: rate 不在 [0, 1)
    """
    if not (0.0 <= rate < 1.0):
        raise ParameterError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    return hadamard(x, dropout_mask(x.shape, rate, rng))


def forward_batch(
    sequences: np.ndarray, model: ModelParams, rng: Rng, training: bool
) -> Tuple[Matrix, ForwardCache]:
    """
    批量前向计算

    Args:
        sequences: B×L 下标矩阵
        model: 模型参数
        rng: dropout 掩码使用的发生器
        training: 训练模式才启用 dropout

    Returns:
        (B×k_out 概率矩阵, ForwardCache)
    """
    seqs = np.asarray(sequences, dtype=np.int64)
    if seqs.ndim == 1:
        seqs = seqs.reshape(1, -1)
    xs = embed(seqs, model.embedding)
    batch, length = seqs.shape
    h = zeros(batch, model.hidden_dim)
    m = zeros(batch, model.hidden_dim) if model.cell_kind == "lstm" else None

    steps: List[StepCache] = []
    for t in range(length):
        x_t = xs[:, t, :]
        if model.cell_kind == "lstm":
            h_t, m_t, gates = _lstm_forward(x_t, h, m, model.cell)
            assert all(np.all((gates[g] > 0) & (gates[g] < 1)) for g in LSTM_GATES)
            steps.append(StepCache(h_prev=h, m_prev=m, h=h_t, m=m_t, gates=gates))
            m = m_t
        else:
            h_t = rnn_step(x_t, h, model.cell)
            steps.append(StepCache(h_prev=h, m_prev=None, h=h_t))
        assert np.all(np.abs(h_t) < 1)
        h = h_t

    mask = None
    features = h
    if training and model.dropout_rate > 0:
        mask = dropout_mask(h.shape, model.dropout_rate, rng)
        features = hadamard(h, mask)

    logits = matmul(features, model.head.w_out) + model.head.b_out
    probs = sigmoid(logits) if model.head.activation == "sigmoid" else softmax(logits)

    cache = ForwardCache(
        sequences=seqs,
        xs=xs,
        steps=steps,
        dropout_mask=mask,
        features=features,
        probabilities=probs,
        cell_kind=model.cell_kind,
        shapes=model.expected_shapes(),
    )
    return probs, cache


def forward(seq: np.ndarray, model: ModelParams, rng: Rng, training: bool) -> Tuple[np.ndarray, ForwardCache]:
    """单条序列的前向计算，返回概率向量（二分类为长度 1）"""
    seq = np.asarray(seq, dtype=np.int64)
    if seq.ndim != 1:
        raise ShapeError(f"forward expects a single sequence, got {seq.ndim}-d input")
    probs, cache = forward_batch(seq.reshape(1, -1), model, rng, training)
    return probs[0], cache


def check_cache(cache: ForwardCache, model: ModelParams):
    """确认缓存由同一结构的模型产生"""
    if cache.cell_kind != model.cell_kind or cache.shapes != model.expected_shapes():
        raise ConsistencyError("forward cache was produced by a model with a different structure")


def predict_classes(probabilities: Matrix, threshold: float = 0.5) -> np.ndarray:
    """概率 → 类别下标；单列按阈值判正，多列取最大值"""
    probs = np.asarray(probabilities, dtype=DTYPE)
    if probs.ndim == 1:
        probs = probs.reshape(-1, 1)
    if probs.shape[1] == 1:
        return (probs[:, 0] >= threshold).astype(np.int64)
    return np.argmax(probs, axis=1).astype(np.int64)


def predict_proba(
    model: ModelParams,
    sequences: np.ndarray,
    batch_size: int = 256,
    workers: int = 1,
) -> Matrix:
    """
    推理模式批量预测，分块并行，结果按输入顺序拼回

    Args:
        model: 模型参数
        sequences: N×L 下标矩阵
        batch_size: 每块行数
        workers: 线程数

    Returns:
        N×k_out 概率矩阵
    """
    seqs = np.asarray(sequences, dtype=np.int64)
    k_out = model.head.w_out.shape[1]
    if seqs.shape[0] == 0:
        return np.zeros((0, k_out), dtype=DTYPE)
    chunks = [seqs[i:i + batch_size] for i in range(0, seqs.shape[0], max(1, batch_size))]

    def run(chunk: np.ndarray) -> Matrix:
        probs, _ = forward_batch(chunk, model, Rng(0), training=False)
        return probs

    if workers <= 1 or len(chunks) == 1:
        results = [run(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, chunks))
    return np.vstack(results)
