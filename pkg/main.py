"""
命令行主入口模块

子命令: train / eval / predict / gradcheck / sweep / help
"""

import argparse
from typing import List, Optional

from .constants import (
    EXIT_GRADCHECK_FAILED,
    EXIT_IO,
    EXIT_OK,
    GRADCHECK_TOLERANCE,
    PROJECT_DESCRIPTION,
    PROJECT_NAME,
    PROJECT_VERSION,
    TASK_SCHEMAS,
)
from .core.classifier_handler import ClassifierHandler, run_gradcheck
from .core.metrics import format_report
from .core.training import best_embedding_size
from .errors import SeqClassError, UsageError
from .services.config_service import ConfigService
from .utils.file_utils import FileUtils
from .utils.logging_utils import logger, setup_logging


class CliParser(argparse.ArgumentParser):
    """参数错误抛出 UsageError，由 main 统一映射退出码"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {text}")
    return value


def _int_list(text: str) -> List[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("list is empty")
    return values


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("-v", "--verbose", action="store_true", help="输出调试日志")
    parser.add_argument("--config", help="YAML 配置文件，命令行参数优先")


def _add_training_inputs(parser: argparse.ArgumentParser):
    parser.add_argument("--train", required=True, help="训练集 TSV")
    parser.add_argument("--valid", help="验证集 TSV，缺省时按 --valid-fraction 从训练集切分")
    parser.add_argument("--task", choices=sorted(TASK_SCHEMAS), help="共享任务预设（类别数与长度），并核对矩阵形状")


def build_parser() -> CliParser:
    parser = CliParser(prog=PROJECT_NAME, description=f"{PROJECT_DESCRIPTION}（RNN / 窥孔 LSTM）")
    parser.add_argument("--version", action="version", version=f"{PROJECT_NAME} {PROJECT_VERSION}")
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    train_parser = commands.add_parser("train", help="训练并写出模型文件")
    _add_common(train_parser)
    _add_training_inputs(train_parser)
    train_parser.add_argument("--out", required=True, help="模型文件输出路径")
    train_parser.add_argument("--history", help="训练历史输出路径（每轮一行）")
    ConfigService.add_hyperparameter_flags(train_parser)
    train_parser.set_defaults(handler=cmd_train)

    eval_parser = commands.add_parser("eval", help="在带标签数据上评测")
    _add_common(eval_parser)
    eval_parser.add_argument("--model", required=True, help="模型文件")
    eval_parser.add_argument("--data", required=True, help="带标签的 TSV")
    eval_parser.add_argument("--subset", type=_int_list, help="微平均使用的类别，如 0,1")
    eval_parser.add_argument("--positive", type=int, default=1, help="ADR 指标的正类 (默认 1)")
    ConfigService.add_hyperparameter_flags(eval_parser, only={"num_classes", "max_len", "threshold", "workers"})
    eval_parser.set_defaults(handler=cmd_eval)

    predict_parser = commands.add_parser("predict", help="输出预测类别与概率")
    _add_common(predict_parser)
    predict_parser.add_argument("--model", required=True, help="模型文件")
    predict_parser.add_argument("--data", required=True, help="TSV，标签列可省略")
    predict_parser.add_argument("--out", help="输出路径，缺省写到标准输出")
    ConfigService.add_hyperparameter_flags(predict_parser, only={"num_classes", "max_len", "threshold", "workers"})
    predict_parser.set_defaults(handler=cmd_predict)

    grad_parser = commands.add_parser("gradcheck", help="随机小模型的梯度检验")
    grad_parser.add_argument("-v", "--verbose", action="store_true", help="输出调试日志")
    grad_parser.add_argument("--cell", choices=("rnn", "lstm"), default="lstm")
    grad_parser.add_argument("--hidden", type=_positive_int, default=3)
    grad_parser.add_argument("--len", dest="length", type=_positive_int, default=4)
    grad_parser.add_argument("--seed", type=int, default=0)
    grad_parser.add_argument("--eps", type=_positive_float, default=1e-5)
    grad_parser.add_argument("--classes", type=int, choices=range(2, 11), default=2, metavar="K")
    grad_parser.set_defaults(handler=cmd_gradcheck)

    sweep_parser = commands.add_parser("sweep", help="词嵌入维度扫描")
    _add_common(sweep_parser)
    _add_training_inputs(sweep_parser)
    sweep_parser.add_argument("--sizes", type=_int_list, default=[128, 256, 512], help="嵌入维度列表 (默认 128,256,512)")
    sweep_parser.add_argument("--trials", type=_positive_int, default=2, help="每个维度的运行次数 (默认 2)")
    ConfigService.add_hyperparameter_flags(sweep_parser)
    sweep_parser.set_defaults(handler=cmd_sweep)

    help_parser = commands.add_parser("help", help="显示帮助与当前配置")
    _add_common(help_parser)
    help_parser.set_defaults(handler=cmd_help)
    return parser


def _config_service(args: argparse.Namespace) -> ConfigService:
    return ConfigService(
        getattr(args, "config", None),
        ConfigService.overrides_from_args(args),
        getattr(args, "task", None),
    )


def cmd_train(args: argparse.Namespace) -> int:
    config_service = _config_service(args)
    logger.info(f"当前配置: {config_service.get_config_summary()}")
    handler = ClassifierHandler(config_service)
    outcome = handler.train(args.train, args.valid, args.out, args.history)
    best = outcome.history.best_record()
    logger.info(f"最佳轮次 {outcome.history.best_epoch}: 验证损失 {best.valid_loss:.4f}, 验证准确率 {best.valid_acc:.4f}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    handler = ClassifierHandler(_config_service(args))
    report, model_file = handler.evaluate(args.model, args.data, args.subset, args.positive)
    print(format_report(report, handler.class_names(model_file)))
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    handler = ClassifierHandler(_config_service(args))
    lines = handler.predict(args.model, args.data)
    if args.out:
        FileUtils.write_lines(args.out, lines)
        logger.info(f"预测结果已保存: {args.out} ({len(lines)} 条)")
    else:
        for line in lines:
            print(line)
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    error = run_gradcheck(args.cell, args.hidden, args.length, args.seed, args.eps, args.classes)
    print(f"max_relative_error={error:.3e}")
    if error < GRADCHECK_TOLERANCE:
        return EXIT_OK
    logger.error(f"梯度检验未通过: {error:.3e} >= {GRADCHECK_TOLERANCE:g}")
    return EXIT_GRADCHECK_FAILED


def cmd_sweep(args: argparse.Namespace) -> int:
    handler = ClassifierHandler(_config_service(args))
    results = handler.sweep(args.train, args.valid, args.sizes, args.trials)
    print("embedding_dim\ttrial\tseed\tbest_epoch\tbest_valid_loss\tvalid_acc")
    for r in results:
        print(f"{r.embedding_dim}\t{r.trial}\t{r.seed}\t{r.best_epoch}\t{r.best_valid_loss:.6f}\t{r.valid_acc:.4f}")
    print(f"best_embedding_dim={best_embedding_size(results)}")
    return EXIT_OK


def cmd_help(args: argparse.Namespace) -> int:
    print(_config_service(args).get_help_text())
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """解析参数并执行子命令，返回退出码"""
    try:
        args = build_parser().parse_args(argv)
        setup_logging(getattr(args, "verbose", False))
        return args.handler(args)
    except SeqClassError as e:
        setup_logging()
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except OSError as e:
        setup_logging()
        logger.error(f"I/O 错误: {e}")
        return EXIT_IO
    except SystemExit as e:
        # --help / --version
        return e.code if isinstance(e.code, int) else EXIT_OK

