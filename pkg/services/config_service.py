"""
配置服务
"""

import argparse
import json
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional, Set

from ..config import TrainConfig
from ..constants import PROJECT_AUTHOR, PROJECT_DESCRIPTION, PROJECT_NAME, PROJECT_VERSION, TASK_SCHEMAS
from ..errors import ConfigError
from ..utils.file_utils import FileUtils
from ..utils.logging_utils import logger

SCHEMA_PATH = Path(__file__).resolve().parent.parent / "_conf_schema.json"

_ARG_TYPES = {"int": int, "float": float, "string": str, "list": str}


@lru_cache(maxsize=1)
def load_schema() -> Dict[str, Dict[str, Any]]:
    """读取超参数描述文件"""
    with open(SCHEMA_PATH, "r", encoding="utf-8") as f:
        return json.load(f)


class ConfigService:
    """配置服务类：默认值 < 任务预设 < YAML 文件 < 命令行参数"""

    PROJECT_VERSION = PROJECT_VERSION

    def __init__(
        self,
        config_path: Optional[str] = None,
        overrides: Optional[Dict[str, Any]] = None,
        task: Optional[str] = None,
    ):
        self.config_path = config_path
        self.overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
        self.task = task
        self._config: Optional[TrainConfig] = None  # 延迟加载
        self._supplied: Set[str] = set()

    @staticmethod
    def add_hyperparameter_flags(parser: argparse.ArgumentParser, only: Optional[set] = None):
        """按 _conf_schema.json 为子命令添加超参数选项，默认值留空以便分层合并"""
        for key, entry in load_schema().items():
            if only is not None and key not in only:
                continue
            help_text = f"{entry['description']}：{entry['hint']} (默认 {entry['default']})"
            if entry["type"] == "bool":
                parser.add_argument(entry["flag"], dest=key, action=argparse.BooleanOptionalAction, default=None, help=help_text)
                continue
            kwargs = {"dest": key, "type": _ARG_TYPES[entry["type"]], "default": None, "help": help_text}
            if "options" in entry:
                kwargs["choices"] = entry["options"]
            parser.add_argument(entry["flag"], **kwargs)

    @staticmethod
    def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
        """从解析结果中取出超参数选项"""
        return {key: getattr(args, key) for key in load_schema() if getattr(args, key, None) is not None}

    def _load_config(self) -> TrainConfig:
        merged: Dict[str, Any] = {}
        if self.task:
            schema = TASK_SCHEMAS.get(self.task)
            if schema is None:
                raise ConfigError(f"unknown task {self.task!r}, expected one of {', '.join(TASK_SCHEMAS)}")
            merged.update(num_classes=schema["num_classes"], max_len=schema["max_len"])
        merged.update(FileUtils.load_yaml_config(self.config_path))
        merged.update(self.overrides)
        config = TrainConfig.load_from_dict(merged)
        self._supplied = set(merged)
        logger.debug(f"配置已加载: {self.get_config_summary(config)}")
        return config

    def get_config_summary(self, config: Optional[TrainConfig] = None) -> str:
        """获取配置摘要"""
        config = config or self.config_obj

        return (
            f"单元={config.cell_kind}, "
            f"类别数={config.num_classes}, "
            f"嵌入={config.embedding_dim}, "
            f"隐状态={config.effective_hidden_dim}, "
            f"学习率={config.learning_rate:g}, "
            f"dropout={config.dropout_rate:g}, "
            f"轮数={config.epochs}, "
            f"批大小={config.batch_size}, "
            f"长度={config.max_len}, "
            f"种子={config.seed}, "
            f"梯度裁剪={'禁用' if not config.clipping_enabled else config.clip_norm}"
        )

    def get_help_text(self) -> str:
        """获取帮助文本"""
        config = self.config
        lines = [
            f"{PROJECT_NAME} v{self.PROJECT_VERSION} {PROJECT_DESCRIPTION} (作者 {PROJECT_AUTHOR})",
            "",
            "可用命令:",
            "• train     - 由训练集构建词表并训练，写出模型与训练历史",
            "• eval      - 评测模型，输出 ADR 与微平均 P/R/F",
            "• predict   - 输出每条推文的预测类别与概率",
            "• gradcheck - 随机小模型的中心差分梯度检验",
            "• sweep     - 词嵌入维度扫描（默认 128/256/512，各跑两次）",
            "",
            "数据格式: id<TAB>label<TAB>text，# 开头的行为注释",
            "",
            f"当前配置: {self.get_config_summary(config)}",
            "",
            "超参数:",
        ]
        for key, entry in load_schema().items():
            lines.append(f"• {entry['flag']:<16} {entry['description']} (默认 {entry['default']})")
        return "\n".join(lines)

    @property
    def config_obj(self) -> TrainConfig:
        """获取配置对象"""
        if self._config is None:
            self._config = self._load_config()
        return self._config

    @property
    def config(self) -> TrainConfig:
        """配置对象别名"""
        return self.config_obj

    @property
    def supplied_keys(self) -> Set[str]:
        """由任务预设、YAML 文件或命令行显式给出的配置项"""
        self.config_obj
        return set(self._supplied)
