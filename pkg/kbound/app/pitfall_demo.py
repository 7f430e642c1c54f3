"""
原始核误差带失效演示

对 G1/G2 × σ² ∈ {0.1, 0.5} 四种情形，用 TC 核运行蒙特卡洛实验，
打印 vanilla 带与 robust 带的逐系数包含频率统计。只有 G1 低噪声情形下
vanilla 带接近 1 − δ，其余情形明显偏低。
"""

from __future__ import annotations

import argparse
import logging
from typing import Dict, List, Optional

import numpy as np

from kbound.app.montecarlo import run_montecarlo
from kbound.core.config_loader import get_default_config
from kbound.core.contracts import CoverageReport

logger = logging.getLogger(__name__)

PITFALL_CASES = (("G1", 0.1), ("G1", 0.5), ("G2", 0.1), ("G2", 0.5))


def run_pitfall_cases(runs: int = 100, jobs: int = 1, kernel: str = "TC", progress: bool = True) -> Dict[str, CoverageReport]:
    """
    四种情形的覆盖率报告

    Args:
        runs: 每种情形的蒙特卡洛次数
        jobs: 并行进程数
        kernel: 核族
        progress: 是否显示进度条

    Returns:
        Dict[str, CoverageReport]: 键形如 "G2/0.5"
    """
    base = get_default_config()
    reports = {}
    for system, noise_var in PITFALL_CASES:
        config = base.model_copy(update={"system": system, "noise_var": noise_var, "runs": runs, "jobs": jobs, "kernel": kernel})
        reports[f"{system}/{noise_var}"] = run_montecarlo(config, progress=progress)
    return reports


def format_report(name: str, report: CoverageReport, threshold: float = 0.8) -> List[str]:
    lines = [f"[{name}] runs={report.runs}"]
    for method in ("vanilla", "robust"):
        freq = report.frequencies[method]
        lines.append(
            f"  {method:8s} median={np.median(freq):.3f} min={freq.min():.3f} "
            f"below {threshold:.2f}: {np.mean(freq < threshold):.0%} of coefficients"
        )
    return lines


def main(argv: Optional[List[str]] = None) -> None:
    parser = argparse.ArgumentParser(description="vanilla kernel band coverage on the four test cases")
    parser.add_argument("--runs", type=int, default=100)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--kernel", choices=["DI", "TC", "SS"], default="TC")
    args = parser.parse_args(argv)

    for name, report in run_pitfall_cases(args.runs, args.jobs, args.kernel).items():
        print("\n".join(format_report(name, report)))


if __name__ == "__main__":
    main()
