from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from kbound.bounds.bands import ls_band, robust_band, vanilla_band
from kbound.bounds.credible import credible_rectangle
from kbound.bounds.hypergrid import build_hyperposterior
from kbound.core.contracts import Dataset, ExperimentConfig, GridSpec, IdentificationResult
from kbound.ident.estimation import estimate_hyperparameters, least_squares, posterior_variance_table, posterior_at
from kbound.ident.kernels import ORDERED_FAMILIES, check_family

logger = logging.getLogger(__name__)


class BoundPipeline:
    """
    辨识与误差界流水线

    按固定顺序串联各个步骤，一次调用得到全部产物：

    - 最小二乘估计
    - 超参数后验与最大边缘似然估计 η̂
    - η̂ 处的核正则化估计
    - 可信矩形
    - LS / vanilla / robust 三种误差带
    """

    def __init__(
        self,
        family: str = "TC",
        delta: float = 0.1,
        delta_prime: float = 0.1,
        scaling: str = "practical",
        grid_spec: Optional[GridSpec] = None,
        prior: Optional[np.ndarray] = None,
    ) -> None:
        """
        初始化流水线

        Args:
            family: 核族
            delta: 噪声置信参数 δ
            delta_prime: 超参数置信参数 δ′
            scaling: robust 带的缩放模式
            grid_spec: 超参数网格规格
            prior: 表格化的超先验，None 表示平坦先验
        """
        self.family = check_family(family)
        self.delta = delta
        self.delta_prime = delta_prime
        self.scaling = scaling
        self.grid_spec = grid_spec or GridSpec()
        self.prior = prior

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> "BoundPipeline":
        return cls(
            family=config.kernel,
            delta=config.delta,
            delta_prime=config.delta_prime,
            scaling=config.scaling,
            grid_spec=config.grid_spec(),
        )

    def run_once(self, data: Dataset) -> IdentificationResult:
        """
        对一个数据集执行完整的辨识与误差界计算

        Args:
            data: 数据集

        Returns:
            IdentificationResult: 估计、超参数后验、可信集合与三种误差带
        """
        # 第一步：最小二乘
        ls_model = least_squares(data)

        # 第二步：超参数后验与 η̂
        grid = build_hyperposterior(data, self.family, self.grid_spec, self.prior)
        eta_hat = estimate_hyperparameters(data, self.family, grid)
        posterior = posterior_at(data, self.family, eta_hat)

        # 第三步：可信矩形（SS 的方差表与 minimax 共用）
        variance_table = None
        if self.family not in ORDERED_FAMILIES:
            variance_table = posterior_variance_table(data, self.family, grid.c_values, grid.lam_values)
        credible = credible_rectangle(grid, eta_hat, self.delta_prime, self.family, variance_table=variance_table)

        # 第四步：三种误差带
        robust = robust_band(
            data,
            self.family,
            self.delta,
            self.delta_prime,
            self.scaling,
            grid=grid,
            eta_hat=eta_hat,
            credible_set=credible if self.family in ORDERED_FAMILIES else None,
            variance_table=variance_table,
        )
        bands = {
            "LS": ls_band(ls_model, self.delta),
            "vanilla": vanilla_band(posterior, self.delta),
            "robust": robust,
        }
        logger.debug(f"流水线完成: η̂=({eta_hat.c:.4g}, {eta_hat.lam:.4g})")
        return IdentificationResult(
            ls_model=ls_model,
            posterior=posterior,
            eta_hat=eta_hat,
            grid=grid,
            credible_set=credible,
            bands=bands,
        )
