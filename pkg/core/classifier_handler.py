"""
分类流程主逻辑

串联数据读取、编码、训练、评测与预测，供命令行调用。
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..constants import TASK_SCHEMAS
from ..errors import ParameterError, SchemaMismatchError
from ..utils.file_utils import FileUtils
from ..utils.logging_utils import logger
from ..utils.model_file import ModelFile, load_model, save_model
from .encoding import (
    EncodedDataset,
    LabeledRecord,
    Vocabulary,
    build_vocabulary,
    check_split_shape,
    encode_dataset,
    unknown_rate,
)
from .metrics import EvalReport, build_report
from .model import ModelParams, forward_batch, init_model, predict_classes, predict_proba
from .numerics import Rng
from .training import (
    SweepResult,
    TrainHistory,
    backward_bptt,
    grad_check,
    split_records,
    sweep,
    train,
)


@dataclass
class TrainOutcome:
    model: ModelParams
    vocab: Vocabulary
    history: TrainHistory
    train_set: EncodedDataset
    valid_set: EncodedDataset


class ClassifierHandler:
    """分类流程处理器"""

    def __init__(self, config_service):
        self.config_service = config_service
        self.config = config_service.config

    def _check_task_shape(self, dataset: EncodedDataset, split: str):
        task = self.config_service.task
        if not task:
            return
        ok, message = check_split_shape(dataset.sequences, task, split)
        if ok:
            logger.info(message)
        else:
            logger.warning(message)

    def prepare_training_data(
        self, train_path: str, valid_path: Optional[str] = None
    ) -> Tuple[Vocabulary, EncodedDataset, EncodedDataset]:
        """读取训练/验证文件，只用训练部分构建词表，验证部分一律截断不丢弃"""
        config = self.config
        train_records = FileUtils.load_tsv(train_path, num_classes=config.num_classes)
        if valid_path:
            valid_records = FileUtils.load_tsv(valid_path, num_classes=config.num_classes)
        else:
            train_records, valid_records = split_records(train_records, config.valid_fraction, config.seed)

        vocab = build_vocabulary(train_records, config.top_words)
        train_set = encode_dataset(train_records, vocab, config.max_len, discard_long=config.discard_long)
        if config.top_words is not None:
            logger.debug(f"训练集未知词比例: {unknown_rate(train_records, vocab):.4f}")

        if valid_records:
            valid_set = encode_dataset(valid_records, vocab, config.max_len, discard_long=False)
            logger.debug(f"验证集未知词比例: {unknown_rate(valid_records, vocab):.4f}")
        else:
            valid_set = train_set

        self._check_task_shape(train_set, "train")
        if valid_path:
            self._check_task_shape(valid_set, "valid")
        logger.info(
            f"词表大小 {vocab.size}, 训练矩阵 {train_set.sequences.shape[0]}*{train_set.max_len}, "
            f"验证矩阵 {valid_set.sequences.shape[0]}*{valid_set.max_len}"
        )
        return vocab, train_set, valid_set

    def train(
        self,
        train_path: str,
        valid_path: Optional[str],
        out_path: str,
        history_path: Optional[str] = None,
    ) -> TrainOutcome:
        """训练并写出模型文件与训练历史"""
        vocab, train_set, valid_set = self.prepare_training_data(train_path, valid_path)
        model, history = train(train_set, valid_set, self.config, vocab_size=vocab.size)
        save_model(model, vocab, out_path, self.config.max_len)
        if history_path:
            FileUtils.write_lines(history_path, FileUtils.history_lines(history))
            logger.info(f"训练历史已保存: {history_path}")
        return TrainOutcome(model, vocab, history, train_set, valid_set)

    def sweep(
        self,
        train_path: str,
        valid_path: Optional[str],
        sizes: Sequence[int],
        trials: int,
    ) -> List[SweepResult]:
        vocab, train_set, valid_set = self.prepare_training_data(train_path, valid_path)
        return sweep(train_set, valid_set, self.config, sizes, trials, vocab_size=vocab.size)

    def _check_schema(self, model_file: ModelFile, records: Sequence[LabeledRecord]):
        header = model_file.header
        supplied = self.config_service.supplied_keys
        for key in ("num_classes", "max_len"):
            value = getattr(self.config, key)
            if key in supplied and value != int(header[key]):
                raise SchemaMismatchError(f"{key}={value} but model has {header[key]}", model_file.version)
        k = int(header["num_classes"])
        for record in records:
            if record.label is not None and not (0 <= record.label < k):
                raise SchemaMismatchError(
                    f"record {record.id} has label {record.label} but model has {k} classes", model_file.version
                )

    def _load_for_inference(
        self, model_path: str, data_path: str, allow_unlabeled: bool
    ) -> Tuple[ModelFile, List[LabeledRecord], EncodedDataset]:
        model_file = load_model(model_path)
        records = FileUtils.load_tsv(data_path, allow_unlabeled=allow_unlabeled)
        self._check_schema(model_file, records)
        # 评测与预测不能丢弃记录，超长一律截断
        dataset = encode_dataset(records, model_file.vocab, model_file.max_len, discard_long=False)
        return model_file, records, dataset

    def _predict(self, model: ModelParams, dataset: EncodedDataset) -> Tuple[np.ndarray, np.ndarray]:
        probs = predict_proba(model, dataset.sequences, batch_size=256, workers=self.config.workers)
        return probs, predict_classes(probs, self.config.threshold)

    def evaluate(
        self,
        model_path: str,
        data_path: str,
        subset: Optional[Sequence[int]] = None,
        positive: int = 1,
    ) -> Tuple[EvalReport, ModelFile]:
        """在带标签的数据上评测"""
        model_file, records, dataset = self._load_for_inference(model_path, data_path, allow_unlabeled=False)
        k = model_file.model.num_classes
        if subset and any(not (0 <= c < k) for c in subset):
            raise SchemaMismatchError(f"subset {list(subset)} outside 0..{k - 1}", model_file.version)
        if not (0 <= positive < k):
            raise SchemaMismatchError(f"positive class {positive} outside 0..{k - 1}", model_file.version)
        _, preds = self._predict(model_file.model, dataset)
        report = build_report(preds, dataset.labels, k, subset, positive, self.config.threshold)
        logger.info(f"评测完成: {len(records)} 条记录, 准确率 {report.accuracy:.4f}")
        return report, model_file

    def predict(self, model_path: str, data_path: str) -> List[str]:
        """预测，返回 id<TAB>类别<TAB>概率 行"""
        model_file, records, dataset = self._load_for_inference(model_path, data_path, allow_unlabeled=True)
        probs, preds = self._predict(model_file.model, dataset)
        return FileUtils.prediction_lines(dataset.ids, preds, probs)

    @staticmethod
    def class_names(model_file: ModelFile) -> Optional[Tuple[str, ...]]:
        k = model_file.model.num_classes
        for schema in TASK_SCHEMAS.values():
            if schema["num_classes"] == k:
                return schema["class_names"]
        return None


GRADCHECK_CANDIDATES = 16


def smallest_gradient_entry(model: ModelParams, sequence: np.ndarray, label: int) -> float:
    """解析梯度中绝对值最小的非零元素，全为零时返回 0"""
    seqs = np.asarray(sequence, dtype=np.int64).reshape(1, -1)
    _, cache = forward_batch(seqs, model, Rng(0), training=False)
    grads, _ = backward_bptt((seqs, np.array([label], dtype=np.int64)), model, [cache])
    magnitudes = np.concatenate([np.abs(g).ravel() for g in grads.tensors.values()])
    nonzero = magnitudes[magnitudes > 0]
    return float(nonzero.min()) if nonzero.size else 0.0


def gradcheck_model(
    cell_kind: str,
    hidden_dim: int,
    length: int,
    seed: int,
    num_classes: int = 2,
    vocab_size: int = 10,
    embedding_dim: int = 3,
) -> Tuple[ModelParams, np.ndarray, int]:
    """
    构造梯度检验用的随机小模型与样本（偏置也随机，dropout 为 0）

    从种子流依次抽取 GRADCHECK_CANDIDATES 组候选，保留最小非零解析梯度最大的一组。
    梯度元素接近 0 时中心差分的舍入误差会主导相对误差。
    """
    if min(hidden_dim, length, vocab_size, embedding_dim) < 1:
        raise ParameterError("gradcheck dimensions must be positive")
    rng = Rng(seed)
    best: Optional[Tuple[float, ModelParams, np.ndarray, int]] = None
    for _ in range(GRADCHECK_CANDIDATES):
        model = init_model(vocab_size, embedding_dim, hidden_dim, num_classes, cell_kind, rng, random_bias=True)
        sequence = (rng.uniform(length) * vocab_size).astype(np.int64)
        label = int(rng.uniform(1)[0] * num_classes)
        smallest = smallest_gradient_entry(model, sequence, label)
        if best is None or smallest > best[0]:
            best = (smallest, model, sequence, label)
    logger.debug(f"梯度检验样本: 最小非零解析梯度 {best[0]:.3g}")
    return best[1], best[2], best[3]


def run_gradcheck(
    cell_kind: str,
    hidden_dim: int,
    length: int,
    seed: int,
    eps: float = 1e-5,
    num_classes: int = 2,
    vocab_size: int = 10,
    embedding_dim: int = 3,
) -> float:
    model, sequence, label = gradcheck_model(cell_kind, hidden_dim, length, seed, num_classes, vocab_size, embedding_dim)
    return grad_check(model, (sequence, label), eps)
