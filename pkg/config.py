"""
训练配置管理模块
"""

from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Optional, Tuple

from .errors import ConfigError
from .utils.logging_utils import logger


@dataclass
class TrainConfig:
    """训练超参数数据类"""

    # ============ 验证常量 ============
    # 网络尺寸范围
    MIN_EMBEDDING_DIM = 1
    MAX_EMBEDDING_DIM = 4096
    MIN_HIDDEN_DIM = 1
    MAX_HIDDEN_DIM = 4096

    # 优化参数范围（学习率 0 表示只跑流程不更新参数）
    MIN_LEARNING_RATE = 0.0
    MAX_LEARNING_RATE = 10.0
    MIN_DROPOUT_RATE = 0.0
    MAX_DROPOUT_RATE = 1.0  # 开区间上界
    MIN_CLIP_NORM = 0.0
    MAX_CLIP_NORM = 1e6

    # 训练循环范围
    MIN_EPOCHS = 1
    MAX_EPOCHS = 100000
    MIN_BATCH_SIZE = 1
    MAX_BATCH_SIZE = 1000000

    # 序列编码范围
    MIN_MAX_LEN = 1
    MAX_MAX_LEN = 10000
    MIN_TOP_WORDS = 1

    # 任务范围
    MIN_NUM_CLASSES = 2
    MAX_NUM_CLASSES = 1000
    MIN_SEED = 0
    MAX_SEED = 2**64 - 1

    # 推理并发范围
    MIN_WORKERS = 1
    MAX_WORKERS = 64

    CELL_KINDS = ("rnn", "lstm")

    # 网络结构
    embedding_dim: int = 512  # 词嵌入维度
    hidden_dim: Optional[int] = None  # 隐状态维度，None 表示与嵌入维度相同
    cell_kind: str = "lstm"  # 循环单元类型 rnn / lstm
    num_classes: int = 2  # 2 为 sigmoid 输出层，>=3 为 softmax 输出层

    # 优化参数
    learning_rate: float = 0.01
    dropout_rate: float = 0.1
    clip_norm: float = 5.0  # 每批梯度 L2 范数上限，0 表示不裁剪
    class_weights: Optional[Tuple[float, ...]] = None  # 每类损失权重，默认不加权

    # 训练循环
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    valid_fraction: float = 0.0  # 未提供验证集时从训练集切出的比例

    # 序列编码
    max_len: int = 35
    top_words: Optional[int] = None  # 词表只保留最高频的前 N 个词
    discard_long: bool = True  # 训练时丢弃超长推文

    # 评测与推理
    threshold: float = 0.5  # sigmoid 输出层的判正阈值
    workers: int = 1  # 推理线程数

    @property
    def effective_hidden_dim(self) -> int:
        """实际隐状态维度"""
        return self.hidden_dim if self.hidden_dim is not None else self.embedding_dim

    @property
    def head_kind(self) -> str:
        """输出层类型"""
        return "binary" if self.num_classes == 2 else "multiclass"

    @property
    def clipping_enabled(self) -> bool:
        """是否启用了梯度裁剪"""
        return self.clip_norm > 0

    def to_dict(self) -> Dict[str, Any]:
        """导出为普通字典"""
        return asdict(self)

    @classmethod
    def load_from_dict(cls, config_dict: Optional[Dict[str, Any]]) -> "TrainConfig":
        """
        从配置字典加载配置

        Args:
            config_dict: 配置字典，来自 YAML 文件与命令行参数的合并结果

        Returns:
            TrainConfig实例

        Raises:
            ConfigError: 配置项类型错误或超出范围
        """
        if not config_dict:
            # 返回默认配置
            return cls()

        known = {f.name for f in fields(cls)}
        for key in config_dict:
            if key not in known:
                logger.warning(f"未知配置项 [{key}] 已忽略")

        # 类型转换辅助函数
        def safe_get(key: str, default, type_):
            """获取并转换配置值，失败时抛出 ConfigError"""
            value = config_dict.get(key, default)
            if value is None:
                return default
            try:
                # bool 类型需要特殊处理
                if type_ == bool:
                    if isinstance(value, str):
                        return value.lower() in ("true", "1", "yes")
                    return bool(value)
                if type_ == tuple:
                    if isinstance(value, str):
                        value = [v for v in value.split(",") if v.strip()]
                    return tuple(float(v) for v in value)
                if type_ == int and isinstance(value, float) and not value.is_integer():
                    raise ValueError("not an integer")
                return type_(value)
            except (ValueError, TypeError) as e:
                raise ConfigError(
                    f"配置项 [{key}] 类型错误: {value!r} ({type_.__name__})"
                ) from e

        config = cls()
        config = cls(
            embedding_dim=safe_get("embedding_dim", config.embedding_dim, int),
            hidden_dim=safe_get("hidden_dim", config.hidden_dim, int),
            cell_kind=safe_get("cell_kind", config.cell_kind, str).lower(),
            num_classes=safe_get("num_classes", config.num_classes, int),
            learning_rate=safe_get("learning_rate", config.learning_rate, float),
            dropout_rate=safe_get("dropout_rate", config.dropout_rate, float),
            clip_norm=safe_get("clip_norm", config.clip_norm, float),
            class_weights=safe_get("class_weights", config.class_weights, tuple),
            epochs=safe_get("epochs", config.epochs, int),
            batch_size=safe_get("batch_size", config.batch_size, int),
            seed=safe_get("seed", config.seed, int),
            valid_fraction=safe_get("valid_fraction", config.valid_fraction, float),
            max_len=safe_get("max_len", config.max_len, int),
            top_words=safe_get("top_words", config.top_words, int),
            discard_long=safe_get("discard_long", config.discard_long, bool),
            threshold=safe_get("threshold", config.threshold, float),
            workers=safe_get("workers", config.workers, int),
        )
        config.validate()
        return config

    def validate(self):
        """
        验证配置值是否在有效范围内
        如果配置无效则抛出 ConfigError
        """
        if not (self.MIN_EMBEDDING_DIM <= self.embedding_dim <= self.MAX_EMBEDDING_DIM):
            raise ConfigError(f"embedding_dim must be between {self.MIN_EMBEDDING_DIM}-{self.MAX_EMBEDDING_DIM}")
        if not (self.MIN_HIDDEN_DIM <= self.effective_hidden_dim <= self.MAX_HIDDEN_DIM):
            raise ConfigError(f"hidden_dim must be between {self.MIN_HIDDEN_DIM}-{self.MAX_HIDDEN_DIM}")
        if self.cell_kind not in self.CELL_KINDS:
            raise ConfigError(f"cell_kind must be one of {', '.join(self.CELL_KINDS)}")
        if not (self.MIN_NUM_CLASSES <= self.num_classes <= self.MAX_NUM_CLASSES):
            raise ConfigError(f"num_classes must be between {self.MIN_NUM_CLASSES}-{self.MAX_NUM_CLASSES}")
        if not (self.MIN_LEARNING_RATE <= self.learning_rate <= self.MAX_LEARNING_RATE):
            raise ConfigError(f"learning_rate must be between {self.MIN_LEARNING_RATE}-{self.MAX_LEARNING_RATE}")
        if not (self.MIN_DROPOUT_RATE <= self.dropout_rate < self.MAX_DROPOUT_RATE):
            raise ConfigError(f"dropout_rate must be in [{self.MIN_DROPOUT_RATE}, {self.MAX_DROPOUT_RATE})")
        if not (self.MIN_CLIP_NORM <= self.clip_norm <= self.MAX_CLIP_NORM):
            raise ConfigError(f"clip_norm must be between {self.MIN_CLIP_NORM}-{self.MAX_CLIP_NORM}")
        if self.class_weights is not None:
            if len(self.class_weights) != self.num_classes:
                raise ConfigError(f"class_weights needs {self.num_classes} values, got {len(self.class_weights)}")
            if any(w < 0 for w in self.class_weights):
                raise ConfigError("class_weights must be non-negative")
        if not (self.MIN_EPOCHS <= self.epochs <= self.MAX_EPOCHS):
            raise ConfigError(f"epochs must be between {self.MIN_EPOCHS}-{self.MAX_EPOCHS}")
        if not (self.MIN_BATCH_SIZE <= self.batch_size <= self.MAX_BATCH_SIZE):
            raise ConfigError(f"batch_size must be between {self.MIN_BATCH_SIZE}-{self.MAX_BATCH_SIZE}")
        if not (self.MIN_SEED <= self.seed <= self.MAX_SEED):
            raise ConfigError(f"seed must be between {self.MIN_SEED}-{self.MAX_SEED}")
        if not (0.0 <= self.valid_fraction < 1.0):
            raise ConfigError("valid_fraction must be in [0, 1)")
        if not (self.MIN_MAX_LEN <= self.max_len <= self.MAX_MAX_LEN):
            raise ConfigError(f"max_len must be between {self.MIN_MAX_LEN}-{self.MAX_MAX_LEN}")
        if self.top_words is not None and self.top_words < self.MIN_TOP_WORDS:
            raise ConfigError(f"top_words must be at least {self.MIN_TOP_WORDS}")
        if not (0.0 < self.threshold < 1.0):
            raise ConfigError("threshold must be in (0, 1)")
        if not (self.MIN_WORKERS <= self.workers <= self.MAX_WORKERS):
            raise ConfigError(f"workers must be between {self.MIN_WORKERS}-{self.MAX_WORKERS}")
