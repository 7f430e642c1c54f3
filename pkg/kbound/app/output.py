"""
输出表格模块

把各类结果整理成 pandas 表并以 CSV 写出：一行表头，浮点数保留 17 位
有效数字，先写入目标目录下的临时文件再原子替换，失败时不留下半成品。
"""

from __future__ import annotations

import logging
import os
import tempfile

import numpy as np
import pandas as pd

from kbound.core.contracts import BAND_METHODS, BandMethod, CoverageReport, Dataset, HyperGrid, IdentificationResult

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def column_name(method: BandMethod) -> str:
    return method.lower()


def atomic_write_csv(frame: pd.DataFrame, path: str) -> str:
    """
    原子写出 CSV

    Args:
        frame: 待写出的表
        path: 目标文件路径

    Returns:
        str: 目标文件路径
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    logger.info(f"已写出 {path} ({len(frame)} 行)")
    return path


def dataset_table(data: Dataset) -> pd.DataFrame:
    return pd.DataFrame({"t": np.arange(1, data.n_samples + 1), "u": data.u, "y": data.y})


def estimate_table(result: IdentificationResult) -> pd.DataFrame:
    return pd.DataFrame({
        "lag": np.arange(result.posterior.g_hat.size),
        "g_hat": result.posterior.g_hat,
        "g_ls": result.ls_model.g_hat,
        "sigma_diag": result.posterior.variances,
    })


def hyperparameter_table(result: IdentificationResult) -> pd.DataFrame:
    i, j = result.grid.index_of(result.eta_hat)
    return pd.DataFrame({
        "c_hat": [result.eta_hat.c],
        "lambda_hat": [result.eta_hat.lam],
        "log_marginal": [float(result.grid.log_marginal[i, j])],
    })


def band_table(result: IdentificationResult, method: BandMethod) -> pd.DataFrame:
    """单个方法的误差带；LS 带以 ĝ_LS 为中心，其余以 ĝ(η̂) 为中心"""
    band = result.bands[method]
    center = result.ls_model.g_hat if method == "LS" else result.posterior.g_hat
    return pd.DataFrame({"lag": np.arange(center.size), "g_hat": center, "half_width": band.half_widths})


def coverage_table(report: CoverageReport) -> pd.DataFrame:
    frame = pd.DataFrame({"lag": np.arange(report.n_g)})
    for method in BAND_METHODS:
        frame[column_name(method)] = report.frequencies[method]
    return frame


def half_width_table(report: CoverageReport) -> pd.DataFrame:
    runs, n_g = report.half_widths["LS"].shape
    frame = pd.DataFrame({"run": np.repeat(np.arange(runs), n_g), "lag": np.tile(np.arange(n_g), runs)})
    for method in BAND_METHODS:
        frame[column_name(method)] = report.half_widths[method].ravel()
    return frame


def runs_table(report: CoverageReport) -> pd.DataFrame:
    rects = [cs.rectangle for cs in report.credible_sets]
    return pd.DataFrame({
        "run": np.arange(report.runs),
        "seed": np.array(report.seeds, dtype=np.uint64),
        "c_hat": [eta.c for eta in report.eta_hats],
        "lambda_hat": [eta.lam for eta in report.eta_hats],
        "c1": [r.eta1.c for r in rects],
        "lambda1": [r.eta1.lam for r in rects],
        "c2": [r.eta2.c for r in rects],
        "lambda2": [r.eta2.lam for r in rects],
        "mass": [cs.mass for cs in report.credible_sets],
    })


def density_table(grid: HyperGrid) -> pd.DataFrame:
    """(c, λ, density) 长表，c 为外层循环"""
    nc, nl = grid.shape
    return pd.DataFrame({
        "c": np.repeat(grid.c_values, nl),
        "lambda": np.tile(grid.lam_values, nc),
        "density": grid.mass.ravel(),
    })
