"""
评测指标模块

共享任务使用的两类指标：二分类正类（ADR）的 P/R/F，
以及限定类别子集上的微平均 P/R/F。计数与 P/R/F 交给 sklearn.metrics，
分母为 0 时一律取 0。
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

from ..errors import LabelError, ParameterError

REPORT_KEYS = (
    "adr_precision",
    "adr_recall",
    "adr_f1",
    "micro_precision",
    "micro_recall",
    "micro_f1",
    "accuracy",
)


@dataclass(frozen=True)
class ConfusionMatrix:
    """行为真实类别，列为预测类别"""

    k: int
    counts: np.ndarray  # k × k, int64

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def collapse(self, positive: int) -> "ConfusionMatrix":
        """正类对其余类别合并为 2×2，正类位于下标 1"""
        if not (0 <= positive < self.k):
            raise ParameterError(f"positive class {positive} outside 0..{self.k - 1}")
        tp = int(self.counts[positive, positive])
        fn = int(self.counts[positive].sum()) - tp
        fp = int(self.counts[:, positive].sum()) - tp
        tn = self.total - tp - fn - fp
        return ConfusionMatrix(2, np.array([[tn, fp], [fn, tp]], dtype=np.int64))

    def expand(self) -> Tuple[np.ndarray, np.ndarray]:
        """还原为 (真实标签, 预测标签) 向量，顺序按单元格展开"""
        cells = self.counts.reshape(-1)
        true_idx, pred_idx = np.divmod(np.arange(self.k * self.k), self.k)
        return np.repeat(true_idx, cells), np.repeat(pred_idx, cells)


@dataclass(frozen=True)
class EvalReport:
    per_class: Tuple[Tuple[float, float, float], ...]
    adr: Tuple[float, float, float]
    micro: Tuple[float, float, float]
    subset: Tuple[int, ...]
    positive: int
    accuracy: float
    confusion: ConfusionMatrix
    threshold: float = 0.5

    def as_dict(self) -> Dict[str, float]:
        values = (*self.adr, *self.micro, self.accuracy)
        return dict(zip(REPORT_KEYS, values))


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def f_score(precision: float, recall: float) -> float:
    """F = 2PR/(P+R)，P+R 为 0 时取 0"""
    return _ratio(2.0 * precision * recall, precision + recall)


def confusion(preds: Sequence[int], labels: Sequence[int], k: int) -> ConfusionMatrix:
    """
    统计混淆矩阵

    Raises:
        LabelError: 长度不同或类别越界
    """
    preds = np.asarray(preds, dtype=np.int64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if preds.shape != labels.shape:
        raise LabelError(f"{preds.shape[0]} predictions vs {labels.shape[0]} labels")
    for name, values in (("prediction", preds), ("label", labels)):
        if values.size and (values.min() < 0 or values.max() >= k):
            raise LabelError(f"{name} class outside 0..{k - 1}")
    if labels.size == 0:
        return ConfusionMatrix(k, np.zeros((k, k), dtype=np.int64))
    counts = confusion_matrix(labels, preds, labels=list(range(k)))
    return ConfusionMatrix(k, counts.astype(np.int64))


def binary_prf(cm: ConfusionMatrix, positive: int = 1) -> Tuple[float, float, float]:
    """二分类正类的 (P, R, F)"""
    if cm.k != 2:
        raise ParameterError(f"binary_prf needs a 2-class confusion matrix, got k={cm.k}")
    return micro_prf_subset(cm, [positive])


def micro_prf_subset(cm: ConfusionMatrix, subset: Iterable[int]) -> Tuple[float, float, float]:
    """
    限定类别子集的微平均 (P, R, F)：先汇总 TP/FP/FN 再计算

    Raises:
        ParameterError: 子集为空或类别越界
    """
    classes = sorted(set(int(c) for c in subset))
    if not classes:
        raise ParameterError("micro-averaging subset must not be empty")
    if classes[0] < 0 or classes[-1] >= cm.k:
        raise ParameterError(f"subset {classes} outside 0..{cm.k - 1}")
    if cm.total == 0:
        return 0.0, 0.0, 0.0
    y_true, y_pred = cm.expand()
    precision, recall, f1, _ = precision_recall_fscore_support(
        y_true, y_pred, labels=classes, average="micro", zero_division=0
    )
    return float(precision), float(recall), float(f1)


def accuracy(cm: ConfusionMatrix) -> float:
    return _ratio(float(np.trace(cm.counts)), cm.total)


def default_subset(k: int, positive: int = 1) -> Tuple[int, ...]:
    """二分类取正类，多分类取前两类（个人服药、可能服药）"""
    return (positive,) if k == 2 else (0, 1)


def build_report(
    preds: Sequence[int],
    labels: Sequence[int],
    k: int,
    subset: Optional[Iterable[int]] = None,
    positive: int = 1,
    threshold: float = 0.5,
) -> EvalReport:
    """由预测与标签计算完整报告，多分类时 adr_* 按正类对其余类别合并计算"""
    cm = confusion(preds, labels, k)
    subset = tuple(sorted(set(subset))) if subset else default_subset(k, positive)
    per_class = tuple(micro_prf_subset(cm, [c]) for c in range(k))
    adr = binary_prf(cm if k == 2 else cm.collapse(positive), positive if k == 2 else 1)
    return EvalReport(
        per_class=per_class,
        adr=adr,
        micro=micro_prf_subset(cm, subset),
        subset=subset,
        positive=positive,
        accuracy=accuracy(cm),
        confusion=cm,
        threshold=threshold,
    )


def format_report(report: EvalReport, class_names: Optional[Sequence[str]] = None) -> str:
    """对齐的文本报告，后接 key=value 块"""
    k = report.confusion.k
    names = list(class_names) if class_names and len(class_names) == k else [f"class{c}" for c in range(k)]
    width = max(8, *(len(n) for n in names))
    lines: List[str] = [
        f"# threshold={report.threshold:g} zero_denominator=0 positive={report.positive} "
        f"subset={','.join(str(c) for c in report.subset)} records={report.confusion.total}",
        f"{'class':<{width}}  {'precision':>9}  {'recall':>9}  {'f1':>9}  {'support':>7}",
    ]
    support = report.confusion.counts.sum(axis=1)
    for c, (p, r, f) in enumerate(report.per_class):
        lines.append(f"{names[c]:<{width}}  {p:>9.3f}  {r:>9.3f}  {f:>9.3f}  {int(support[c]):>7d}")
    lines.append("")
    lines.append("confusion (rows=true, cols=predicted)")
    for c in range(k):
        cells = "  ".join(f"{int(v):>6d}" for v in report.confusion.counts[c])
        lines.append(f"{names[c]:<{width}}  {cells}")
    lines.append("")
    for key, value in report.as_dict().items():
        lines.append(f"{key}={value:.3f}")
    return "\n".join(lines)
