"""
估计模块

最小二乘估计、核正则化估计（后验均值与后验协方差）、对数边缘似然以及
基于网格的最大边缘似然超参数估计。

所有 N×N 运算都通过核矩阵的对称因子 L（K = LLᵀ）约化到 n_g×n_g：

    A = σ²I + LᵀΦᵀΦL
    ĝ = L A⁻¹ LᵀΦᵀy,          Σ = σ² L A⁻¹ Lᵀ
    log det Ψ = (N − n_g) log σ² + log det A
    yᵀΨ⁻¹y = (yᵀy − (LᵀΦᵀy)ᵀA⁻¹(LᵀΦᵀy)) / σ²

网格评估使用 ``KernelSlice``：固定 λ 时所有核关于 c 线性，对
H = L1ᵀΦᵀΦL1 做一次特征分解即可对任意多个 c 给出上述量。
"""

from __future__ import annotations

import logging
from typing import Optional, Union

import numpy as np
import scipy.linalg as la

from kbound.core.contracts import (
    Dataset,
    EstimatorForm,
    GridSpec,
    HyperGrid,
    Hyperparameters,
    LeastSquaresModel,
    LogMarginal,
    PosteriorModel,
)
from kbound.core.errors import DegenerateNoiseError, SingularRegressorError
from kbound.ident.kernels import EtaLike, as_hyperparameters, build_kernel, check_family, unit_kernel
from kbound.ident.linalg import jitchol, jittered_inverse, logdet, psd_factor, symmetrize

logger = logging.getLogger(__name__)

# ΦᵀΦ 条件数上限，超过即视为秩亏
MAX_GRAM_CONDITION = 1e12

LOG_2PI = float(np.log(2.0 * np.pi))

ESTIMATOR_FORMS = ("factor", "dual", "representer", "primal")


def _require_noise(data: Dataset) -> float:
    if data.noise_var <= 0.0:
        raise DegenerateNoiseError(f"kernel estimation needs a positive noise variance, got {data.noise_var}")
    return data.noise_var


def least_squares(data: Dataset) -> LeastSquaresModel:
    """
    最小二乘估计 ĝ_LS = (ΦᵀΦ)⁻¹Φᵀy，Σ_LS = σ²(ΦᵀΦ)⁻¹

    Raises:
        SingularRegressorError: cond(ΦᵀΦ) ≥ 1e12
    """
    gram = data.gram
    cond = np.linalg.cond(gram) if gram.size else np.inf
    if not np.isfinite(cond) or cond >= MAX_GRAM_CONDITION:
        raise SingularRegressorError(f"regressor is rank deficient (cond(PhiᵀPhi)={cond:.3e})")
    factor = la.cho_factor(gram, lower=True)
    g_hat = la.cho_solve(factor, data.phi_y)
    sigma = data.noise_var * la.cho_solve(factor, np.eye(data.n_g))
    return LeastSquaresModel(g_hat=g_hat, sigma=symmetrize(sigma))


def estimate_noise_variance(data: Dataset) -> float:
    """残差方差估计 σ̂² = ‖y − Φĝ_LS‖² / (N − n_g)"""
    dof = data.n_samples - data.n_g
    if dof <= 0:
        raise DegenerateNoiseError(f"noise variance estimate needs N > n_g (N={data.n_samples}, n_g={data.n_g})")
    residual = data.y - data.phi @ least_squares(data).g_hat
    return float(residual @ residual / dof)


def regularized_estimate(
    data: Dataset,
    K: np.ndarray,
    form: EstimatorForm = "factor",
    eta: Optional[Hyperparameters] = None,
    family: Optional[str] = None,
) -> PosteriorModel:
    """
    核正则化估计

    ĝ = (ΦᵀΦ + σ²K⁻¹)⁻¹Φᵀy，Σ = σ²(ΦᵀΦ + σ²K⁻¹)⁻¹。四种计算形式代数等价：

    - factor: 约化的 n_g 维因子形式（默认，不求 K⁻¹）
    - dual: N 维形式 ĝ = KΦᵀ(ΦKΦᵀ+σ²I)⁻¹y，Σ = K − KΦᵀ(ΦKΦᵀ+σ²I)⁻¹ΦK
    - representer: ĝ = K(ΦᵀΦK+σ²I)⁻¹Φᵀy，Σ = σ²K(ΦᵀΦK+σ²I)⁻¹
    - primal: 直接使用带抖动的 K⁻¹

    Args:
        data: 数据集（σ² > 0）
        K: 半正定核矩阵
        form: 计算形式
        eta: 记录在结果中的超参数
        family: 记录在结果中的核族

    Returns:
        PosteriorModel: 后验均值与协方差
    """
    s = _require_noise(data)
    K = np.asarray(K, dtype=float)
    n = data.n_g
    b = data.phi_y

    if form == "factor":
        L = psd_factor(K)
        A = s * np.eye(n) + L.T @ data.gram @ L
        fac = la.cho_factor(symmetrize(A), lower=True)
        g_hat = L @ la.cho_solve(fac, L.T @ b)
        sigma = s * L @ la.cho_solve(fac, L.T)
    elif form == "dual":
        KPt = K @ data.phi.T
        psi = data.phi @ KPt + s * np.eye(data.n_samples)
        fac = la.cho_factor(symmetrize(psi), lower=True)
        g_hat = KPt @ la.cho_solve(fac, data.y)
        sigma = K - KPt @ la.cho_solve(fac, KPt.T)
    elif form == "representer":
        M = data.gram @ K + s * np.eye(n)
        g_hat = K @ la.solve(M, b)
        sigma = s * K @ la.solve(M, np.eye(n))
    elif form == "primal":
        H = data.gram + s * jittered_inverse(K)
        fac = la.cho_factor(symmetrize(H), lower=True)
        g_hat = la.cho_solve(fac, b)
        sigma = s * la.cho_solve(fac, np.eye(n))
    else:
        raise ValueError(f"unknown estimator form '{form}', expected one of {ESTIMATOR_FORMS}")

    return PosteriorModel(g_hat=g_hat, sigma=symmetrize(sigma), eta=eta, family=family)


def posterior_at(data: Dataset, family: str, eta: EtaLike, form: EstimatorForm = "factor") -> PosteriorModel:
    """在给定核族与超参数下的后验"""
    eta = as_hyperparameters(eta)
    K = build_kernel(family, eta, data.n_g)
    return regularized_estimate(data, K, form=form, eta=eta, family=family)


def representer_values(data: Dataset, K: np.ndarray, k_rows: np.ndarray) -> np.ndarray:
    """
    表示定理形式 g★(x) = k_x(ΦᵀΦK + σ²I)⁻¹Φᵀy 在给定滞后处的取值

    Args:
        data: 数据集
        K: 核矩阵
        k_rows: [m×n_g]，每行是 k(x, l) 在 l = 0..n_g−1 处的取值

    Returns:
        np.ndarray: [m] 个函数值
    """
    s = _require_noise(data)
    K = np.asarray(K, dtype=float)
    M = data.gram @ K + s * np.eye(data.n_g)
    return np.atleast_2d(k_rows) @ la.solve(M, data.phi_y)


def rkhs_norm_sq(model: PosteriorModel, K: np.ndarray) -> float:
    """‖g★‖²_H = ĝᵀK⁻¹ĝ（抖动 Cholesky 求解）"""
    if not np.any(model.g_hat):
        return 0.0
    L, _ = jitchol(np.asarray(K, dtype=float), lower=True)
    v = la.solve_triangular(L, model.g_hat, lower=True)
    return float(v @ v)


def posterior_norm_sq(model: PosteriorModel, data: Dataset) -> float:
    """后验核范数 ĝᵀΣ⁻¹ĝ，按恒等式 (Φᵀy)ᵀΣ(Φᵀy)/σ⁴ 计算"""
    s = _require_noise(data)
    b = data.phi_y
    return float(b @ model.sigma @ b / s ** 2)


def log_marginal(data: Dataset, family: str, eta: EtaLike) -> LogMarginal:
    """
    对数边缘似然 log p(y|u,η)

    −½ log det Ψ − ½ yᵀΨ⁻¹y − (N/2) log 2π，Ψ = σ²I + ΦK(η)Φᵀ，按约化的
    n_g 维形式计算。
    """
    s = _require_noise(data)
    eta = as_hyperparameters(eta)
    L = psd_factor(build_kernel(family, eta, data.n_g))
    A = s * np.eye(data.n_g) + L.T @ data.gram @ L
    chol = la.cholesky(symmetrize(A), lower=True)
    w = L.T @ data.phi_y
    v = la.solve_triangular(chol, w, lower=True)
    quad = (data.y_energy - v @ v) / s
    log_det = (data.n_samples - data.n_g) * np.log(s) + logdet(chol)
    value = -0.5 * log_det - 0.5 * quad - 0.5 * data.n_samples * LOG_2PI
    return LogMarginal(value=float(value), eta=eta)


class KernelSlice:
    """
    固定 λ 的核切片

    K(c, λ) = c·K1，K1 = L1L1ᵀ。对 H = L1ᵀΦᵀΦL1 = QΛQᵀ 做一次特征分解后，
    令 W = L1Q、z = WᵀΦᵀy，则对任意 c：

        Σ(c) = σ²c·W diag(1/(σ² + cΛ)) Wᵀ
        ĝ(c) = c·W diag(1/(σ² + cΛ)) z

    对数边缘似然与后验方差可以对一组 c 向量化计算。
    """

    def __init__(self, data: Dataset, family: str, lam: float) -> None:
        """
        初始化核切片

        Args:
            data: 数据集（σ² > 0）
            family: 核族
            lam: 衰减率 λ
        """
        check_family(family)
        self.data = data
        self.family = family
        self.lam = float(lam)
        self._s = _require_noise(data)

        L1 = psd_factor(unit_kernel(family, self.lam, data.n_g))
        evals, Q = la.eigh(symmetrize(L1.T @ data.gram @ L1))
        self._evals = np.clip(evals, 0.0, None)  # 特征值 Λ
        self._W = L1 @ Q  # 变换后的因子
        self._z = self._W.T @ data.phi_y  # 投影后的 Φᵀy
        self._W2 = self._W ** 2  # 逐元素平方，用于后验方差

    def _inverse_spectrum(self, c: np.ndarray) -> np.ndarray:
        return 1.0 / (self._s + np.multiply.outer(c, self._evals))

    def log_marginal(self, c_values: Union[float, np.ndarray]) -> np.ndarray:
        """每个 c 的对数边缘似然（含完整高斯归一化常数）"""
        c = np.atleast_1d(np.asarray(c_values, dtype=float))
        s, n, N = self._s, self.data.n_g, self.data.n_samples
        inv = self._inverse_spectrum(c)
        log_det = (N - n) * np.log(s) - np.log(inv).sum(axis=1)
        quad = (self.data.y_energy - c * (inv @ self._z ** 2)) / s
        return -0.5 * log_det - 0.5 * quad - 0.5 * N * LOG_2PI

    def variances(self, c_values: Union[float, np.ndarray]) -> np.ndarray:
        """后验方差 diag Σ(c)，形状 [len(c), n_g]"""
        c = np.atleast_1d(np.asarray(c_values, dtype=float))
        inv = self._inverse_spectrum(c)
        return np.clip(self._s * c[:, None] * (inv @ self._W2.T), 0.0, None)

    def estimate(self, c: float) -> np.ndarray:
        """后验均值 ĝ(c)"""
        inv = self._inverse_spectrum(np.array([float(c)]))[0]
        return c * self._W @ (inv * self._z)

    def posterior(self, c: float) -> PosteriorModel:
        inv = self._inverse_spectrum(np.array([float(c)]))[0]
        sigma = self._s * c * (self._W * inv) @ self._W.T
        return PosteriorModel(
            g_hat=self.estimate(c),
            sigma=symmetrize(sigma),
            eta=Hyperparameters(c=float(c), lam=self.lam),
            family=self.family,
        )


def log_marginal_table(data: Dataset, family: str, c_values: np.ndarray, lam_values: np.ndarray) -> np.ndarray:
    """网格上的对数边缘似然表，形状 [len(c), len(λ)]"""
    c_values = np.asarray(c_values, dtype=float)
    table = np.empty((c_values.size, len(lam_values)))
    for j, lam in enumerate(lam_values):
        table[:, j] = KernelSlice(data, family, lam).log_marginal(c_values)
    logger.debug(f"边缘似然表完成: family={family}, shape={table.shape}")
    return table


def posterior_variance_table(data: Dataset, family: str, c_values: np.ndarray, lam_values: np.ndarray) -> np.ndarray:
    """网格上的后验方差 Σ_ll(η)，形状 [len(c), len(λ), n_g]"""
    c_values = np.asarray(c_values, dtype=float)
    table = np.empty((c_values.size, len(lam_values), data.n_g))
    for j, lam in enumerate(lam_values):
        table[:, j, :] = KernelSlice(data, family, lam).variances(c_values)
    return table


def grid_argmax(table: np.ndarray) -> tuple:
    """
    二维表的最大值下标

    NaN 视为 −∞；并列时取较小的 c 下标，再取较小的 λ 下标（按行优先的
    第一个最大值）。
    """
    clean = np.where(np.isnan(table), -np.inf, table)
    flat = int(np.argmax(clean))
    return np.unravel_index(flat, clean.shape)


def estimate_hyperparameters(data: Dataset, family: str, grid: Union[GridSpec, HyperGrid]) -> Hyperparameters:
    """
    网格上的最大边缘似然估计 η̂

    Args:
        data: 数据集
        family: 核族
        grid: 网格规格，或已经算好边缘似然的超参数网格

    Returns:
        Hyperparameters: 使 log p(y|u,η) 最大的网格点
    """
    if isinstance(grid, HyperGrid):
        c_values, lam_values, table = grid.c_values, grid.lam_values, grid.log_marginal
    else:
        c_values, lam_values = grid.c_values(), grid.lam_values()
        table = log_marginal_table(data, family, c_values, lam_values)
    if table.size == 0:
        raise ValueError("hyperparameter grid is empty")
    i, j = grid_argmax(table)
    eta = Hyperparameters(c=float(c_values[i]), lam=float(lam_values[j]))
    logger.debug(f"η̂ = ({eta.c:.4g}, {eta.lam:.4g}), log p = {table[i, j]:.6g}")
    return eta
