"""
超参数后验模块

在 (log c, λ) 网格上离散化超参数后验 p(η|u,y) ∝ p(y|u,η)p(η)，
按中点规则积分并用 log-sum-exp 归一化。
"""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

from kbound.core.contracts import Dataset, GridSpec, HyperGrid
from kbound.core.errors import ConfidenceLevelError, NumericalDegeneracyError
from kbound.ident.estimation import log_marginal_table

logger = logging.getLogger(__name__)


def gaussian_quantile(delta: float) -> float:
    """
    标准高斯分布的 (1 − δ/2) 分位数 μ_δ

    Raises:
        ConfidenceLevelError: δ ∉ (0, 1)
    """
    if not 0.0 < delta < 1.0:
        raise ConfidenceLevelError(f"confidence parameter must lie in (0, 1), got {delta}")
    return float(norm.ppf(1.0 - delta / 2.0))


def _cell_widths(x: np.ndarray) -> np.ndarray:
    """一维中点单元宽度：内部点取相邻中点之间的距离，端点单元关于网格点对称"""
    if x.size == 1:
        return np.ones(1)
    edges = np.empty(x.size + 1)
    edges[1:-1] = 0.5 * (x[1:] + x[:-1])
    edges[0] = x[0] - (edges[1] - x[0])
    edges[-1] = x[-1] + (x[-1] - edges[-2])
    return np.diff(edges)


def cell_areas(c_values: np.ndarray, lam_values: np.ndarray) -> np.ndarray:
    """(log c, λ) 坐标下的单元面积，形状 [len(c), len(λ)]"""
    return np.outer(_cell_widths(np.log(np.asarray(c_values, dtype=float))), _cell_widths(np.asarray(lam_values, dtype=float)))


def build_hyperposterior(
    data: Dataset,
    family: str,
    spec: Optional[GridSpec] = None,
    prior: Optional[np.ndarray] = None,
) -> HyperGrid:
    """
    构造离散超参数后验

    单元权重 ∝ exp(log p(y|u,η) + log p(η))·面积，归一化后和为 1。

    Args:
        data: 数据集
        family: 核族
        spec: 网格规格，默认 40×40
        prior: 表格化的超先验 p(η) ≥ 0（形状与网格一致），None 表示平坦先验

    Returns:
        HyperGrid: 含对数边缘似然与归一化质量的网格

    Raises:
        NumericalDegeneracyError: 所有单元权重为零或非有限
    """
    spec = spec or GridSpec()
    c_values, lam_values = spec.c_values(), spec.lam_values()
    shape = (c_values.size, lam_values.size)

    if prior is None:
        log_prior = np.zeros(shape)
    else:
        prior = np.broadcast_to(np.asarray(prior, dtype=float), shape)
        if np.any(prior < 0) or not np.all(np.isfinite(prior)):
            raise ValueError("hyperprior must be finite and non-negative on the grid")
        with np.errstate(divide="ignore"):
            log_prior = np.log(prior)

    table = log_marginal_table(data, family, c_values, lam_values)
    area = cell_areas(c_values, lam_values)
    log_weight = table + log_prior + np.log(area)
    log_weight = np.where(np.isnan(log_weight), -np.inf, log_weight)

    log_z = logsumexp(log_weight)
    if not np.isfinite(log_z):
        raise NumericalDegeneracyError("hyperposterior weights vanish on the whole grid")
    mass = np.exp(log_weight - log_z)
    mass /= mass.sum()

    logger.info(f"超参数后验构造完成: family={family}, grid={shape}, 最大单元质量={mass.max():.3g}")
    return HyperGrid(
        c_values=c_values,
        lam_values=lam_values,
        log_marginal=table,
        log_prior=log_prior,
        cell_area=area,
        mass=mass,
        family=family,
        data=data,
    )
