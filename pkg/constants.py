"""项目常量定义"""

import yaml
from pathlib import Path

PROJECT_NAME = "seqclass"
PROJECT_AUTHOR = "FenChen0211"
PROJECT_DESCRIPTION = "健康推文循环网络分类器"

# 模型文件格式
MODEL_FORMAT_MAGIC = "SEQCLASS-MODEL"
MODEL_FORMAT_VERSION = "v1"
MODEL_FORMAT_HEADER = f"{MODEL_FORMAT_MAGIC} {MODEL_FORMAT_VERSION}"

# 词表保留下标：未知词与填充共用
PAD_INDEX = 0

# 命令行退出码（脚本调用的稳定约定）
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_DATA_FORMAT = 3
EXIT_SCHEMA_MISMATCH = 4
EXIT_GRADCHECK_FAILED = 5

# 梯度检验验收阈值
GRADCHECK_TOLERANCE = 1e-4

# 共享任务数据规模（训练/验证/测试条数）
TASK_SCHEMAS = {
    "adr": {
        "num_classes": 2,
        "max_len": 35,
        "splits": {"train": 6725, "valid": 3535, "test": 9961},
        "class_names": ("no-adr", "adr"),
    },
    "intake": {
        "num_classes": 3,
        "max_len": 34,
        "splits": {"train": 1065, "valid": 712, "test": 7513},
        "class_names": ("personal-intake", "possible-intake", "non-intake"),
    },
}


def _load_version() -> str:
    """
    从 metadata.yaml 读取版本号
    版本号只能来源于 metadata.yaml 文件，不允许硬编码
    """
    import logging

    logger = logging.getLogger(PROJECT_NAME)

    try:
        metadata_path = Path(__file__).parent / "metadata.yaml"
        if not metadata_path.exists():
            logger.error(f"[{PROJECT_NAME}] 元数据文件不存在: {metadata_path}")
            return "unknown"

        with open(metadata_path, "r", encoding="utf-8") as f:
            metadata = yaml.safe_load(f)

        version = metadata.get("version")
        if not version:
            logger.error(f"[{PROJECT_NAME}] metadata.yaml 中未找到 version 字段")
            return "unknown"

        if version.startswith("v"):
            version = version[1:]

        return version

    except (yaml.YAMLError, PermissionError) as e:
        logger.error(f"[{PROJECT_NAME}] 解析 metadata.yaml 失败: {e}")
        return "unknown"


PROJECT_VERSION = _load_version()
