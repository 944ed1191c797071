"""
训练模块

交叉熵损失、手工推导的 BPTT 梯度、中心差分梯度检验、SGD 更新与训练循环。
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..config import TrainConfig
from ..errors import ConsistencyError, EmptyInputError, LabelError, ParameterError, ShapeError
from ..utils.logging_utils import logger
from .encoding import EncodedDataset, LabeledRecord
from .model import (
    LSTM_GATES,
    ForwardCache,
    ModelParams,
    check_cache,
    forward_batch,
    init_model,
    predict_classes,
)
from .numerics import DTYPE, Matrix, Rng, matmul, shape_str

PROB_CLAMP = 1e-12

# Rng 子流编号
INIT_STREAM = 1
SHUFFLE_STREAM = 2
DROPOUT_STREAM = 3
SPLIT_STREAM = 4


def _clamp(p):
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def bce_loss(p: float, y: int) -> float:
    """二元交叉熵，概率先截断到 [1e-12, 1-1e-12]"""
    p = float(_clamp(p))
    return -(y * math.log(p) + (1 - y) * math.log(1.0 - p))


def cce_loss(p: Sequence[float], y: int) -> float:
    """
    多类交叉熵 -ln p[y]

    Raises:
        LabelError: y 超出类别范围
    """
    p = np.asarray(p, dtype=DTYPE).reshape(-1)
    if not (0 <= y < p.shape[0]):
        raise LabelError(f"label {y} outside 0..{p.shape[0] - 1}")
    return -math.log(float(_clamp(p[y])))


@dataclass
class Gradients:
    """与模型参数同名同形的梯度张量"""

    tensors: Dict[str, Matrix]

    @classmethod
    def zeros_like(cls, model: ModelParams) -> "Gradients":
        return cls({name: np.zeros_like(t) for name, t in model.named_tensors().items()})

    def __getitem__(self, name: str) -> Matrix:
        return self.tensors[name]

    def norm(self) -> float:
        return math.sqrt(sum(float(np.sum(g * g)) for g in self.tensors.values()))

    def scaled(self, factor: float) -> "Gradients":
        return Gradients({name: g * factor for name, g in self.tensors.items()})


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_loss: float
    valid_acc: float


@dataclass
class TrainHistory:
    """每轮训练记录"""

    records: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    def __len__(self) -> int:
        return len(self.records)

    def best_record(self) -> Optional[EpochRecord]:
        for record in self.records:
            if record.epoch == self.best_epoch:
                return record
        return None


def _check_labels(labels: np.ndarray, num_classes: int):
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        bad = int(labels[(labels < 0) | (labels >= num_classes)][0])
        raise LabelError(f"label {bad} outside 0..{num_classes - 1}")


def _sample_weights(labels: np.ndarray, class_weights: Optional[Sequence[float]]) -> np.ndarray:
    if class_weights is None:
        return np.ones(labels.shape[0], dtype=DTYPE)
    return np.asarray(class_weights, dtype=DTYPE)[labels]


def _losses_and_dlogits(
    probs: Matrix, labels: np.ndarray, activation: str
) -> Tuple[np.ndarray, Matrix]:
    """逐样本损失与 d(loss)/d(logits)，交叉熵下输出层梯度为 p - y"""
    if activation == "sigmoid":
        p = probs[:, 0]
        y = labels.astype(DTYPE)
        pc = _clamp(p)
        losses = -(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))
        dlogits = (p - y).reshape(-1, 1)
    else:
        rows = np.arange(labels.shape[0])
        losses = -np.log(_clamp(probs[rows, labels]))
        dlogits = probs.copy()
        dlogits[rows, labels] -= 1.0
    return losses, dlogits


def batch_loss(
    model: ModelParams,
    sequences: np.ndarray,
    labels: np.ndarray,
    class_weights: Optional[Sequence[float]] = None,
) -> float:
    """推理模式下的平均损失"""
    labels = np.asarray(labels, dtype=np.int64)
    _check_labels(labels, model.num_classes)
    probs, _ = forward_batch(sequences, model, Rng(0), training=False)
    losses, _ = _losses_and_dlogits(probs, labels, model.head.activation)
    weights = _sample_weights(labels, class_weights)
    return float(np.sum(losses * weights) / labels.shape[0])


def _backward_cache(
    cache: ForwardCache,
    labels: np.ndarray,
    weights: np.ndarray,
    model: ModelParams,
    grads: Dict[str, Matrix],
    scale: float,
) -> float:
    """累加一个缓存的梯度，返回加权损失之和"""
    losses, dlogits = _losses_and_dlogits(cache.probabilities, labels, model.head.activation)
    dz = dlogits * (weights * scale).reshape(-1, 1)

    grads["head.w_out"] += matmul(cache.features.T, dz)
    grads["head.b_out"] += dz.sum(axis=0, keepdims=True)
    dh = matmul(dz, model.head.w_out.T)
    if cache.dropout_mask is not None:
        dh = dh * cache.dropout_mask

    kind = model.cell_kind
    cell = model.cell
    dxs = np.zeros_like(cache.xs)
    dm = np.zeros_like(dh)

    for t in range(len(cache.steps) - 1, -1, -1):
        step = cache.steps[t]
        x_t = cache.xs[:, t, :]
        if kind == "rnn":
            da = dh * (1.0 - step.h * step.h)
            grads["rnn.w"] += matmul(x_t.T, da)
            grads["rnn.p"] += matmul(step.h_prev.T, da)
            grads["rnn.b"] += da.sum(axis=0, keepdims=True)
            dxs[:, t, :] = matmul(da, cell.w.T)
            dh = matmul(da, cell.p.T)
            continue

        g = step.gates
        dm_total = dm + dh * g["og"] * (1.0 - g["tanh_m"] * g["tanh_m"])
        pre = {
            "og": dh * g["tanh_m"] * g["og"] * (1.0 - g["og"]),
            "fg": dm_total * step.m_prev * g["fg"] * (1.0 - g["fg"]),
            "ig": dm_total * g["m1"] * g["ig"] * (1.0 - g["ig"]),
            "m": dm_total * g["ig"] * (1.0 - g["m1"] * g["m1"]),
        }
        dx = np.zeros_like(x_t)
        dh_prev = np.zeros_like(dh)
        dm_prev = dm_total * g["fg"]
        for key, da in pre.items():
            w = getattr(cell, f"w_{key}")
            p = getattr(cell, f"p_{key}")
            grads[f"lstm.w_{key}"] += matmul(x_t.T, da)
            grads[f"lstm.p_{key}"] += matmul(step.h_prev.T, da)
            grads[f"lstm.b_{key}"] += da.sum(axis=0, keepdims=True)
            dx += matmul(da, w.T)
            dh_prev += matmul(da, p.T)
            if key in LSTM_GATES:
                q = getattr(cell, f"q_{key}")
                grads[f"lstm.q_{key}"] += (da * step.m_prev).sum(axis=0, keepdims=True)
                dm_prev += da * q
        dxs[:, t, :] = dx
        dh = dh_prev
        dm = dm_prev

    # 同一个词在批内多次出现时梯度累加
    np.add.at(grads["embedding.weights"], cache.sequences, dxs)
    return float(np.sum(losses * weights))


def backward_bptt(
    batch: Tuple[np.ndarray, np.ndarray],
    model: ModelParams,
    caches: Sequence[ForwardCache],
    class_weights: Optional[Sequence[float]] = None,
) -> Tuple[Gradients, float]:
    """
    沿全部时间步展开的反向传播

    Args:
        batch: (B×L 下标矩阵, 长度 B 的标签)，行顺序与 caches 依次拼接后一致
        model: 产生 caches 的模型
        caches: forward / forward_batch 的缓存列表
        class_weights: 可选的每类损失权重

    Returns:
        (平均损失的梯度, 平均损失)

    Raises:
        ConsistencyError: 缓存与模型或批次不一致
    """
    sequences, labels = batch
    sequences = np.asarray(sequences, dtype=np.int64)
    if sequences.ndim == 1:
        sequences = sequences.reshape(1, -1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    total = sum(c.batch_size for c in caches)
    if total == 0:
        raise EmptyInputError("backward_bptt needs at least one cached sample")
    if total != labels.shape[0] or total != sequences.shape[0]:
        raise ConsistencyError(f"caches hold {total} samples but batch has {labels.shape[0]} labels")
    _check_labels(labels, model.num_classes)

    grads = Gradients.zeros_like(model)
    weights = _sample_weights(labels, class_weights)
    loss_sum = 0.0
    offset = 0
    for cache in caches:
        check_cache(cache, model)
        rows = slice(offset, offset + cache.batch_size)
        if not np.array_equal(cache.sequences, sequences[rows]):
            raise ConsistencyError(f"cache rows {rows.start}..{rows.stop - 1} do not match the batch sequences")
        loss_sum += _backward_cache(cache, labels[rows], weights[rows], model, grads.tensors, 1.0 / total)
        offset += cache.batch_size

    for name, g in grads.tensors.items():
        if not np.all(np.isfinite(g)):
            raise ConsistencyError(f"gradient {name} is not finite")
    return grads, loss_sum / total


def clip_gradients(grads: Gradients, max_norm: float) -> Tuple[Gradients, float]:
    """按整体 L2 范数裁剪"""
    norm = grads.norm()
    if max_norm > 0 and norm > max_norm:
        return grads.scaled(max_norm / norm), norm
    return grads, norm


def sgd_update(model: ModelParams, grads: Gradients, lr: float) -> ModelParams:
    """
    每个参数减去 lr × 梯度，返回新模型

    Raises:
        ShapeError: 梯度与参数形状不一致
    """
    current = model.named_tensors()
    if set(grads.tensors) != set(current):
        raise ShapeError("gradient tensors do not match model tensors")
    updated = {}
    for name, value in current.items():
        g = grads.tensors[name]
        if g.shape != value.shape:
            raise ShapeError(f"{name}: gradient {shape_str(g)} vs parameter {shape_str(value)}")
        updated[name] = value - lr * g
    return model.with_tensors(updated)


def grad_check(model: ModelParams, sample: Tuple[np.ndarray, int], eps: float = 1e-5) -> float:
    """
    中心差分梯度检验

    逐个扰动参数 ±eps，比较 (L(+)-L(-))/(2·eps) 与解析梯度，
    相对误差为 |a-n| / max(|a|, |n|, 1e-8)。检验在推理模式下进行，不启用 dropout。

    Returns:
        最大相对误差

    Raises:
        ParameterError: eps 不为正
    """
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    sequence, label = sample
    seqs = np.asarray(sequence, dtype=np.int64).reshape(1, -1)
    labels = np.asarray([label], dtype=np.int64)

    _, cache = forward_batch(seqs, model, Rng(0), training=False)
    analytic, _ = backward_bptt((seqs, labels), model, [cache])

    tensors = {name: t.copy() for name, t in model.named_tensors().items()}
    shifted = model.with_tensors(tensors)
    worst = 0.0
    for name, tensor in tensors.items():
        grad = analytic[name]
        for idx in np.ndindex(*tensor.shape):
            original = tensor[idx]
            tensor[idx] = original + eps
            plus = batch_loss(shifted, seqs, labels)
            tensor[idx] = original - eps
            minus = batch_loss(shifted, seqs, labels)
            tensor[idx] = original
            numeric = (plus - minus) / (2.0 * eps)
            a = float(grad[idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if err > worst:
                worst = err
                logger.debug(f"梯度检验 {name}{list(idx)}: 解析={a:.10g} 数值={numeric:.10g} 相对误差={err:.3g}")
    return worst


def initial_model(config: TrainConfig, vocab_size: int) -> ModelParams:
    """按配置与种子初始化模型，训练循环的起点"""
    return init_model(
        vocab_size=vocab_size,
        embedding_dim=config.embedding_dim,
        hidden_dim=config.effective_hidden_dim,
        num_classes=config.num_classes,
        cell_kind=config.cell_kind,
        rng=Rng(config.seed).derive(INIT_STREAM),
        dropout_rate=config.dropout_rate,
    )


def evaluate_loss(
    model: ModelParams,
    dataset: EncodedDataset,
    threshold: float = 0.5,
    batch_size: int = 256,
) -> Tuple[float, float]:
    """推理模式下的 (平均损失, 准确率)"""
    if len(dataset) == 0:
        return 0.0, 0.0
    _check_labels(dataset.labels, model.num_classes)
    loss_sum = 0.0
    correct = 0
    for start in range(0, len(dataset), batch_size):
        seqs = dataset.sequences[start:start + batch_size]
        labels = dataset.labels[start:start + batch_size]
        probs, _ = forward_batch(seqs, model, Rng(0), training=False)
        losses, _ = _losses_and_dlogits(probs, labels, model.head.activation)
        loss_sum += float(np.sum(losses))
        correct += int(np.sum(predict_classes(probs, threshold) == labels))
    return loss_sum / len(dataset), correct / len(dataset)


def _split_indices(n: int, fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    order = Rng(seed).derive(SPLIT_STREAM).permutation(n)
    n_valid = min(n - 1, max(1, int(round(n * fraction))))
    return np.sort(order[n_valid:]), np.sort(order[:n_valid])


def split_records(
    records: Sequence[LabeledRecord], fraction: float, seed: int
) -> Tuple[List[LabeledRecord], List[LabeledRecord]]:
    """
    在编码之前按比例切出验证记录，词表只能由返回的训练部分构建

    fraction 为 0 或记录不足两条时验证部分为空，由调用方决定是否用训练集本身验证。
    """
    records = list(records)
    if fraction <= 0 or len(records) < 2:
        return records, []
    train_idx, valid_idx = _split_indices(len(records), fraction, seed)
    return [records[i] for i in train_idx], [records[i] for i in valid_idx]


def train(
    train_set: EncodedDataset,
    valid_set: Optional[EncodedDataset],
    config: TrainConfig,
    vocab_size: Optional[int] = None,
) -> Tuple[ModelParams, TrainHistory]:
    """
    小批量 SGD 训练循环

    每轮用种子发生器打乱 → 前向/反向/更新，记录损失，
    返回验证损失最低那一轮的参数。

    Args:
        train_set: 编码后的训练集
        valid_set: 编码后的验证集，为空时用训练集
        config: 训练配置
        vocab_size: 词表大小，默认取数据中最大下标 + 1

    Returns:
        (最佳模型, 训练历史)

    Raises:
        EmptyInputError: 训练集为空
        LabelError: 训练集含无标签记录或类别越界
    """
    config.validate()
    if len(train_set) == 0:
        raise EmptyInputError("training set is empty")
    if not train_set.has_labels:
        raise LabelError("training set contains unlabeled records")
    if valid_set is None or len(valid_set) == 0:
        valid_set = train_set
    if valid_set.max_len != train_set.max_len:
        raise ShapeError(f"train max_len {train_set.max_len} differs from valid max_len {valid_set.max_len}")
    _check_labels(train_set.labels, config.num_classes)
    _check_labels(valid_set.labels, config.num_classes)

    if vocab_size is None:
        vocab_size = int(max(train_set.sequences.max(), valid_set.sequences.max())) + 1
    model = initial_model(config, vocab_size)
    base = Rng(config.seed)
    shuffle_rng = base.derive(SHUFFLE_STREAM)
    dropout_rng = base.derive(DROPOUT_STREAM)

    if config.learning_rate == 0:
        logger.warning("学习率为 0，参数不会更新")

    history = TrainHistory()
    best_model = model
    best_loss = math.inf
    n = len(train_set)
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            seqs = train_set.sequences[idx]
            labels = train_set.labels[idx]
            _, cache = forward_batch(seqs, model, dropout_rng, training=True)
            grads, loss = backward_bptt((seqs, labels), model, [cache], config.class_weights)
            if config.clipping_enabled:
                grads, norm = clip_gradients(grads, config.clip_norm)
                if norm > config.clip_norm:
                    logger.debug(f"第 {epoch} 轮梯度范数 {norm:.4g} 已裁剪到 {config.clip_norm}")
            model = sgd_update(model, grads, config.learning_rate)
            loss_sum += loss * len(idx)

        train_loss = loss_sum / n
        valid_loss, valid_acc = evaluate_loss(model, valid_set, config.threshold)
        history.records.append(EpochRecord(epoch, train_loss, valid_loss, valid_acc))
        if not math.isfinite(train_loss) or not math.isfinite(valid_loss):
            raise ConsistencyError(f"loss became non-finite at epoch {epoch}")
        if valid_loss < best_loss:
            best_loss = valid_loss
            best_model = model
            history.best_epoch = epoch
        logger.info(
            f"第 {epoch}/{config.epochs} 轮: 训练损失={train_loss:.4f}, "
            f"验证损失={valid_loss:.4f}, 验证准确率={valid_acc:.4f}"
        )

    logger.info(f"训练完成，选用第 {history.best_epoch} 轮参数 (验证损失 {best_loss:.4f})")
    return best_model, history


@dataclass
class SweepResult:
    embedding_dim: int
    trial: int
    seed: int
    best_epoch: int
    best_valid_loss: float
    valid_acc: float


def sweep(
    train_set: EncodedDataset,
    valid_set: Optional[EncodedDataset],
    config: TrainConfig,
    embedding_sizes: Iterable[int] = (128, 256, 512),
    trials: int = 2,
    vocab_size: Optional[int] = None,
) -> List[SweepResult]:
    """
    词嵌入维度扫描：每个维度跑 trials 次，种子依次为 seed..seed+trials-1（按 64 位回绕）

    隐状态维度未固定时跟随嵌入维度。
    """
    if trials < 1:
        raise ParameterError(f"trials must be at least 1, got {trials}")
    results: List[SweepResult] = []
    for size in embedding_sizes:
        for trial in range(trials):
            seed = (config.seed + trial) & TrainConfig.MAX_SEED
            run_config = TrainConfig.load_from_dict({**config.to_dict(), "embedding_dim": size, "seed": seed})
            logger.info(f"扫描: 嵌入维度={size}, 第 {trial + 1}/{trials} 次, 种子={run_config.seed}")
            _, history = train(train_set, valid_set, run_config, vocab_size)
            best = history.best_record()
            results.append(
                SweepResult(size, trial + 1, run_config.seed, history.best_epoch, best.valid_loss, best.valid_acc)
            )
    return results


def best_embedding_size(results: Sequence[SweepResult]) -> int:
    """平均最佳验证损失最低的嵌入维度"""
    by_size: Dict[int, List[float]] = {}
    for r in results:
        by_size.setdefault(r.embedding_dim, []).append(r.best_valid_loss)
    return min(by_size, key=lambda s: (sum(by_size[s]) / len(by_size[s]), s))
