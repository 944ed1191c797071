"""
稠密矩阵与激活函数内核

矩阵统一用二维 float64 的 numpy 数组表示，向量为 1×n 或批量 B×n。
所有公开运算都是输入的纯函数，结果保证有限。
"""

from typing import Iterable, Optional, Sequence, Union

import numpy as np

from ..errors import NumericError, ShapeError

Matrix = np.ndarray
ArrayLike = Union[np.ndarray, Sequence[float], Sequence[Sequence[float]], float]

DTYPE = np.float64

# 饱和时仍严格落在开区间内
_UPPER = float(np.nextafter(1.0, 0.0))
_LOWER = float(np.nextafter(0.0, 1.0))


def as_matrix(values: ArrayLike, rows: Optional[int] = None, cols: Optional[int] = None) -> Matrix:
    """
    转换为二维 float64 矩阵

    Args:
        values: 标量、向量或二维数组
        rows: 期望行数，给定时校验
        cols: 期望列数，给定时校验

    Returns:
        二维矩阵，一维输入视为 1×n
    """
    m = np.array(values, dtype=DTYPE)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(1, -1)
    elif m.ndim != 2:
        raise ShapeError(f"expected a matrix, got {m.ndim}-d array")
    if m.size == 0:
        raise ShapeError(f"matrix must have positive dimensions, got {m.shape}")
    if rows is not None and m.shape[0] != rows:
        raise ShapeError(f"expected {rows} rows, got shape {shape_str(m)}")
    if cols is not None and m.shape[1] != cols:
        raise ShapeError(f"expected {cols} cols, got shape {shape_str(m)}")
    return _ensure_finite(m, "as_matrix")


def zeros(rows: int, cols: int) -> Matrix:
    return np.zeros((rows, cols), dtype=DTYPE)


def ones(rows: int, cols: int) -> Matrix:
    return np.ones((rows, cols), dtype=DTYPE)


def shape_str(m: np.ndarray) -> str:
    return "×".join(str(d) for d in m.shape)


def _ensure_finite(m: Matrix, op: str) -> Matrix:
    if not np.all(np.isfinite(m)):
        raise NumericError(f"{op} produced non-finite values")
    return m


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """
    矩阵乘法

    Raises:
        ShapeError: a 的列数与 b 的行数不同
    """
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {shape_str(a)} × {shape_str(b)}")
    return _ensure_finite(a @ b, "matmul")


def sigmoid(x: Matrix) -> Matrix:
    """逐元素 sigmoid，负输入走 e^x/(1+e^x) 分支避免溢出"""
    x = np.asarray(x, dtype=DTYPE)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return np.clip(out, _LOWER, _UPPER)


def tanh_act(x: Matrix) -> Matrix:
    """逐元素双曲正切"""
    out = np.tanh(np.asarray(x, dtype=DTYPE))
    return np.clip(out, -_UPPER, _UPPER)


def softmax(v: Matrix) -> Matrix:
    """
    逐行 softmax，先减去行最大值

    Raises:
        ShapeError: 列数小于 2
    """
    v = np.asarray(v, dtype=DTYPE)
    if v.ndim != 2 or v.shape[1] < 2:
        raise ShapeError(f"softmax needs a 1×k (k>=2) input, got {shape_str(v)}")
    shifted = v - v.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return _ensure_finite(e / e.sum(axis=1, keepdims=True), "softmax")


def hadamard(a: Matrix, b: Matrix) -> Matrix:
    """逐元素乘积，要求形状完全一致"""
    if a.shape != b.shape:
        raise ShapeError(f"hadamard shape mismatch: {shape_str(a)} vs {shape_str(b)}")
    return _ensure_finite(a * b, "hadamard")


class Rng:
    """
    splitmix64 确定性随机数发生器

    第 i 次抽取为 mix(seed + i·γ)，因此批量抽取可以向量化，
    且同一种子在任意平台上得到相同序列。
    """

    MASK64 = (1 << 64) - 1
    GAMMA = 0x9E3779B97F4A7C15
    MIX1 = 0xBF58476D1CE4E5B9
    MIX2 = 0x94D049BB133111EB

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & self.MASK64
        self._state = self.seed

    @classmethod
    def _mix(cls, z: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore"):
            z = (z ^ (z >> np.uint64(30))) * np.uint64(cls.MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(cls.MIX2)
            return z ^ (z >> np.uint64(31))

    def next_uint64(self, n: int) -> np.ndarray:
        """抽取 n 个 64 位无符号整数"""
        if n <= 0:
            return np.zeros(0, dtype=np.uint64)
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self._state) + steps * np.uint64(self.GAMMA)
        self._state = (self._state + n * self.GAMMA) & self.MASK64
        return self._mix(z)

    def uniform(self, shape: Union[int, Iterable[int]], low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """[low, high) 上的均匀分布，53 位精度"""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        u = (self.next_uint64(n) >> np.uint64(11)).astype(DTYPE) * (2.0 ** -53)
        return (low + (high - low) * u).reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        """0..n-1 的随机排列"""
        return np.argsort(self.uniform(n), kind="stable")

    def derive(self, stream: int) -> "Rng":
        """按流编号派生独立的子发生器"""
        base = np.array([(self.seed ^ (int(stream) * self.MIX2)) & self.MASK64], dtype=np.uint64)
        return Rng(int(self._mix(base)[0]))
