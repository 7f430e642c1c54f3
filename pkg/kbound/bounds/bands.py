"""
误差带模块

三种逐系数误差带 |ĝ_l − g_l| ≤ b_l：

- LS: b_l = μ_δ·sqrt(Σ_LS,ll)
- vanilla: b_l = μ_δ·sqrt(Σ_ll(η̂))，只在先验精确时成立
- robust: b_l = μ̄·σ_l，σ_l 为可信矩形上的最坏情况后验标准差

robust 带的缩放常数 μ̄ 有两种模式：practical 取 μ_δ；theoretical 取
μ_δ + (2/σ)‖y‖_S。
"""

from __future__ import annotations

import logging
from typing import Optional, Union

import numpy as np
import scipy.linalg as la

from kbound.bounds.credible import credible_rectangle
from kbound.bounds.hypergrid import build_hyperposterior, gaussian_quantile
from kbound.bounds.worst_case import elementwise_sigma, minimax_sigmas, uniform_sigma, VarianceOracle
from kbound.core.contracts import (
    CredibleSet,
    Dataset,
    ErrorBand,
    GridSpec,
    HyperGrid,
    HyperRectangle,
    Hyperparameters,
    LeastSquaresModel,
    PosteriorModel,
)
from kbound.core.errors import ConfidenceLevelError
from kbound.ident.estimation import estimate_hyperparameters, least_squares, posterior_at
from kbound.ident.kernels import ORDERED_FAMILIES, as_hyperparameters, build_kernel, ordering_factor
from kbound.ident.linalg import psd_factor, symmetrize

logger = logging.getLogger(__name__)

# Cauchy–Schwarz 自检的相对容差
CHECK_RTOL = 1e-7


def _band_from_variances(variances: np.ndarray, scale: float) -> np.ndarray:
    return scale * np.sqrt(np.clip(variances, 0.0, None))


def ls_band(model: LeastSquaresModel, delta: float) -> ErrorBand:
    """最小二乘误差带 b_l = μ_δ·sqrt(Σ_LS,ll)"""
    mu = gaussian_quantile(delta)
    return ErrorBand(half_widths=_band_from_variances(np.diag(model.sigma), mu), method="LS", delta=delta)


def vanilla_band(model: PosteriorModel, delta: float) -> ErrorBand:
    """原始核误差带 b_l = μ_δ·sqrt(Σ_ll(η̂))"""
    mu = gaussian_quantile(delta)
    return ErrorBand(half_widths=_band_from_variances(np.diag(model.sigma), mu), method="vanilla", delta=delta)


def y_s_norm(data: Dataset, family: Optional[str] = None, rect: Optional[HyperRectangle] = None) -> float:
    """
    ‖y‖_S = sqrt(yᵀSy)

    DI/TC 核且给定矩形时使用收紧的 S = Φ(ΦᵀΦ + σ²(λ1/λ2)^γK⁻¹(η2))⁻¹Φᵀ，
    否则使用投影 S = Φ(ΦᵀΦ)⁻¹Φᵀ。
    """
    b = data.phi_y
    if family in ORDERED_FAMILIES and rect is not None and data.noise_var > 0:
        factor = ordering_factor(family, rect.eta1.lam, rect.eta2.lam)
        K = factor * build_kernel(family, rect.eta2, data.n_g)
        L = psd_factor(K)
        A = data.noise_var * np.eye(data.n_g) + L.T @ data.gram @ L
        w = L.T @ b
        value = w @ la.solve(symmetrize(A), w, assume_a="pos")
    else:
        value = b @ least_squares(data).g_hat
    return float(np.sqrt(max(value, 0.0)))


def theoretical_scale(data: Dataset, family: str, delta: float, rect: Optional[HyperRectangle] = None) -> float:
    """μ̄ = μ_δ + (2/σ)‖y‖_S"""
    return gaussian_quantile(delta) + 2.0 / np.sqrt(data.noise_var) * y_s_norm(data, family, rect)


def robust_band(
    data: Dataset,
    family: str,
    delta: float,
    delta_prime: float,
    scaling: str = "practical",
    grid_spec: Optional[GridSpec] = None,
    *,
    grid: Optional[HyperGrid] = None,
    eta_hat: Optional[Hyperparameters] = None,
    credible_set: Optional[CredibleSet] = None,
    variance_table: Optional[np.ndarray] = None,
) -> ErrorBand:
    """
    鲁棒核误差带 b_l = μ̄·σ_l

    σ_l 的来源：给定可信集合时，DI/TC 用一致上界，SS 用逐元素上界；
    未给定时，DI/TC 先选可信矩形再取一致上界，SS 对每个 l 求 minimax 上界。

    Args:
        data: 数据集
        family: 核族
        delta: 噪声置信参数 δ
        delta_prime: 超参数置信参数 δ′
        scaling: "practical"（μ̄ = μ_δ）或 "theoretical"
        grid_spec: 超参数网格规格（未提供 grid 时使用）
        grid: 已构造的超参数后验
        eta_hat: 已估计的超参数
        credible_set: 已选定的可信集合
        variance_table: SS 核预先算好的网格后验方差表

    Returns:
        ErrorBand: method="robust"
    """
    if not 0.0 < delta_prime < 1.0:
        raise ConfidenceLevelError(f"delta' must lie in (0, 1), got {delta_prime}")
    if scaling not in ("practical", "theoretical"):
        raise ValueError(f"unknown scaling mode '{scaling}'")
    mu = gaussian_quantile(delta)

    if credible_set is None:
        grid = grid if grid is not None else build_hyperposterior(data, family, grid_spec)
        eta_hat = eta_hat if eta_hat is not None else estimate_hyperparameters(data, family, grid)

    if family in ORDERED_FAMILIES:
        if credible_set is None:
            credible_set = credible_rectangle(grid, eta_hat, delta_prime, family)
        rect = credible_set.rectangle
        variances = uniform_sigma(data, family, rect)
    elif credible_set is not None:
        rect = credible_set.rectangle
        oracle = VarianceOracle(data, family)
        variances = np.array([elementwise_sigma(data, family, rect, lag, oracle=oracle) for lag in range(data.n_g)])
    else:
        rect = None
        variances = minimax_sigmas(data, family, grid, eta_hat, delta_prime, variance_table=variance_table)

    mu_bar = mu if scaling == "practical" else theoretical_scale(data, family, delta, rect)
    logger.debug(f"鲁棒误差带: family={family}, scaling={scaling}, μ̄={mu_bar:.4g}")
    return ErrorBand(
        half_widths=_band_from_variances(variances, mu_bar),
        method="robust",
        delta=delta,
        delta_prime=delta_prime,
        scaling=scaling,
        mu_bar=float(mu_bar),
    )


def cauchy_schwarz_check(data: Dataset, family: str, eta: Union[Hyperparameters, tuple], rtol: float = CHECK_RTOL) -> bool:
    """
    误差界证明中 Cauchy–Schwarz 链条的运行时自检

    检查逐系数不等式 ĝ_l² ≤ Σ_ll·‖g★‖² 与 ‖g★‖² ≤ ‖y‖²_S/σ²，其中
    ‖g★‖² = ĝᵀΣ⁻¹ĝ 由恒等式 ĝᵀΦᵀy/σ² = (Φᵀy)ᵀΣ(Φᵀy)/σ⁴ 计算并交叉核对。
    """
    eta = as_hyperparameters(eta)
    model = posterior_at(data, family, eta)
    s = data.noise_var
    b = data.phi_y

    norm_sq = float(b @ model.sigma @ b) / s ** 2
    via_estimate = float(model.g_hat @ b) / s
    scale = max(abs(norm_sq), abs(via_estimate), np.finfo(float).tiny)
    if abs(norm_sq - via_estimate) > rtol * scale:
        logger.warning(f"后验范数恒等式不成立: {norm_sq!r} vs {via_estimate!r}")
        return False

    lhs = model.g_hat ** 2
    rhs = model.variances * norm_sq
    if np.any(lhs > rhs * (1.0 + rtol) + np.finfo(float).tiny):
        return False

    projection = y_s_norm(data) ** 2 / s
    return bool(norm_sq <= projection * (1.0 + rtol) + np.finfo(float).tiny)
