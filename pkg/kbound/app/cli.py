"""
命令行入口

子命令：
- simulate: 仿真一组数据 → dataset.csv
- identify: 最小二乘与核估计 → estimate.csv, hyperparameters.csv
- bound: 指定方法的误差带 → band_<method>.csv
- montecarlo: 覆盖率实验 → coverage.csv, half_widths.csv, runs.csv
- density: 超参数后验 → density.csv

退出码：0 成功；2 配置或用法错误；1 其他库错误或输出文件写入失败。
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Any, Dict, List, Optional

from kbound.app.montecarlo import emit_density_map, run_montecarlo, simulate_dataset, trial_seed
from kbound.app.output import (
    atomic_write_csv,
    band_table,
    coverage_table,
    dataset_table,
    estimate_table,
    half_width_table,
    hyperparameter_table,
    runs_table,
)
from kbound.core.config_loader import load_config
from kbound.core.contracts import BAND_METHODS, ExperimentConfig
from kbound.core.errors import ConfigError, KBoundError
from kbound.core.pipeline import BoundPipeline

logger = logging.getLogger(__name__)

# 命令行参数名 → 配置字段
_OVERRIDE_FIELDS = (
    "system", "noise_var", "n_samples", "n_g", "kernel", "delta", "delta_prime",
    "scaling", "runs", "seed", "jobs", "out_dir",
    "grid_c_min", "grid_c_max", "grid_c_count",
    "grid_lambda_min", "grid_lambda_max", "grid_lambda_count",
    "custom_num", "custom_den",
)

_METHOD_BY_FLAG = {m.lower(): m for m in BAND_METHODS}


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key: value config file (defaults: kbound/app/config.yaml)")
    common.add_argument("--system", choices=["G1", "G2", "custom"], help="test system")
    common.add_argument("--noise-var", dest="noise_var", type=float, help="noise variance sigma^2")
    common.add_argument("--n-samples", dest="n_samples", type=int, help="number of samples N")
    common.add_argument("--n-g", dest="n_g", type=int, help="FIR length n_g")
    common.add_argument("--kernel", choices=["DI", "TC", "SS"], help="kernel family")
    common.add_argument("--delta", type=float, help="noise confidence parameter delta")
    common.add_argument("--delta-prime", dest="delta_prime", type=float, help="hyperparameter confidence parameter delta'")
    common.add_argument("--scaling", choices=["practical", "theoretical"], help="robust band scaling constant")
    common.add_argument("--runs", type=int, help="number of Monte Carlo runs")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--jobs", type=int, help="parallel worker processes")
    common.add_argument("--out-dir", dest="out_dir", help="output directory")
    common.add_argument("--grid-c-min", dest="grid_c_min", type=float, help="smallest c on the log-spaced grid")
    common.add_argument("--grid-c-max", dest="grid_c_max", type=float, help="largest c on the log-spaced grid")
    common.add_argument("--grid-c-count", dest="grid_c_count", type=int, help="number of c grid points")
    common.add_argument("--grid-lambda-min", dest="grid_lambda_min", type=float, help="smallest lambda on the linear grid")
    common.add_argument("--grid-lambda-max", dest="grid_lambda_max", type=float, help="largest lambda on the linear grid")
    common.add_argument("--grid-lambda-count", dest="grid_lambda_count", type=int, help="number of lambda grid points")
    common.add_argument("--custom-num", dest="custom_num", type=float, nargs="+", metavar="B", help="numerator coefficients in q^-1 (system custom)")
    common.add_argument("--custom-den", dest="custom_den", type=float, nargs="+", metavar="A", help="monic denominator coefficients in q^-1 (system custom)")
    common.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    common.add_argument("--no-progress", dest="no_progress", action="store_true", help="hide the Monte Carlo progress bar")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="kbound",
        description="Kernel-based FIR identification with robust probabilistic error bounds.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate one dataset (dataset.csv)")
    sub.add_parser("identify", parents=[common], help="LS and kernel estimates (estimate.csv, hyperparameters.csv)")
    bound = sub.add_parser("bound", parents=[common], help="error band of one method (band_<method>.csv)")
    bound.add_argument("--method", choices=sorted(_METHOD_BY_FLAG), default="robust", help="band method")
    sub.add_parser("montecarlo", parents=[common], help="coverage experiment (coverage.csv, half_widths.csv, runs.csv)")
    sub.add_parser("density", parents=[common], help="hyperparameter posterior (density.csv)")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {name: getattr(args, name, None) for name in _OVERRIDE_FIELDS}


def _out(config: ExperimentConfig, name: str) -> str:
    return os.path.join(config.out_dir, name)


def _cmd_simulate(config: ExperimentConfig, args: argparse.Namespace) -> None:
    data, _ = simulate_dataset(config, trial_seed(config.seed, 0))
    atomic_write_csv(dataset_table(data), _out(config, "dataset.csv"))


def _identify(config: ExperimentConfig):
    data, _ = simulate_dataset(config, trial_seed(config.seed, 0))
    return BoundPipeline.from_config(config).run_once(data)


def _cmd_identify(config: ExperimentConfig, args: argparse.Namespace) -> None:
    result = _identify(config)
    atomic_write_csv(estimate_table(result), _out(config, "estimate.csv"))
    atomic_write_csv(hyperparameter_table(result), _out(config, "hyperparameters.csv"))


def _cmd_bound(config: ExperimentConfig, args: argparse.Namespace) -> None:
    result = _identify(config)
    method = _METHOD_BY_FLAG[args.method]
    atomic_write_csv(band_table(result, method), _out(config, f"band_{args.method}.csv"))


def _cmd_montecarlo(config: ExperimentConfig, args: argparse.Namespace) -> None:
    report = run_montecarlo(config, progress=not args.no_progress)
    atomic_write_csv(coverage_table(report), _out(config, "coverage.csv"))
    atomic_write_csv(half_width_table(report), _out(config, "half_widths.csv"))
    atomic_write_csv(runs_table(report), _out(config, "runs.csv"))
    for method, stats in report.summary().items():
        print(
            f"{method:8s} mean coverage {stats['mean_coverage']:.3f}  "
            f"min coverage {stats['min_coverage']:.3f}  mean half-width {stats['mean_half_width']:.4g}"
        )


def _cmd_density(config: ExperimentConfig, args: argparse.Namespace) -> None:
    emit_density_map(config, path=_out(config, "density.csv"))


_COMMANDS = {
    "simulate": _cmd_simulate,
    "identify": _cmd_identify,
    "bound": _cmd_bound,
    "montecarlo": _cmd_montecarlo,
    "density": _cmd_density,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    命令行主函数

    Args:
        argv: 参数列表，None 时读取 sys.argv

    Returns:
        int: 退出码
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help 返回 0，用法错误返回 2
        return int(exc.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        config = load_config(args.config, _overrides(args))
        _COMMANDS[args.command](config, args)
    except ConfigError as exc:
        print(f"kbound: {exc}", file=sys.stderr)
        return 2
    except (KBoundError, OSError) as exc:
        print(f"kbound: {exc}", file=sys.stderr)
        return 1
    return 0


def cli_main(argv: Optional[List[str]] = None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
