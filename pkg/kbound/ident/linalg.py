"""
线性代数工具模块

为核方法提供对称分解、带抖动的 Cholesky 分解、对数行列式与半正定判定。
核矩阵在 λ 较小时严重病态，所有判定都使用相对容差。
"""

from __future__ import annotations

import logging
from typing import Tuple

import numpy as np
import scipy.linalg as la

logger = logging.getLogger(__name__)

# 半正定判定的相对容差：λ_min ≥ −PSD_RTOL·λ_max
PSD_RTOL = 1e-10

# 抖动 Cholesky 的初始相对抖动（乘以 trace/n）
JITTER_SCALE = 1e-12


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def psd_factor(K: np.ndarray) -> np.ndarray:
    """
    半正定矩阵的对称因子 L，使 K ≈ L Lᵀ

    通过特征分解得到，舍入产生的微小负特征值截断为 0，因此对奇异
    或极度病态的核矩阵同样可用。

    Args:
        K: [n×n] 对称半正定矩阵

    Returns:
        np.ndarray: [n×n] 因子
    """
    w, V = la.eigh(symmetrize(K))
    return V * np.sqrt(np.clip(w, 0.0, None))


def jitchol(A: np.ndarray, lower: bool = True) -> Tuple[np.ndarray, float]:
    """
    带对角抖动的 Cholesky 分解

    先直接分解；失败时加入 JITTER_SCALE·trace(A)/n 的对角抖动，
    每次失败抖动放大 10 倍，直到相对抖动达到 1e-3。

    Args:
        A: [n×n] 对称半正定矩阵
        lower: 是否返回下三角因子

    Returns:
        (L, jitter): 分解因子与实际使用的抖动量
    """
    A = symmetrize(np.asarray(A, dtype=float))
    try:
        return la.cholesky(A, lower=lower), 0.0
    except la.LinAlgError:
        pass

    n = A.shape[0]
    scale = np.trace(A) / n if n else 0.0
    if scale <= 0.0:
        scale = 1.0
    jit = JITTER_SCALE
    di = np.diag_indices(n)
    while jit < 1e-3:
        Ajit = A.copy()
        Ajit[di] += scale * jit
        try:
            L = la.cholesky(Ajit, lower=lower)
            if jit > JITTER_SCALE:
                logger.warning(f"Cholesky 需要放大抖动: {jit:.1e}·trace/n")
            return L, scale * jit
        except la.LinAlgError:
            jit *= 10.0

    raise la.LinAlgError("Added maximum jitter and matrix still not PSD!")


def jittered_inverse(K: np.ndarray) -> np.ndarray:
    """通过抖动 Cholesky 求 K⁻¹（仅用于无法避免求逆的场合）"""
    L, _ = jitchol(K, lower=True)
    return la.cho_solve((L, True), np.eye(K.shape[0]))


def logdet(L: np.ndarray) -> float:
    """由 Cholesky 因子计算对数行列式"""
    return float(2.0 * np.log(np.diag(L)).sum())


def min_eig_ratio(A: np.ndarray) -> float:
    """λ_min / max(|λ_max|, tiny)，用于相对半正定判定"""
    w = la.eigvalsh(symmetrize(A))
    top = max(abs(w[-1]), np.finfo(float).tiny)
    return float(w[0] / top)


def is_psd(A: np.ndarray, rtol: float = PSD_RTOL) -> bool:
    """
    相对容差下的半正定判定：λ_min ≥ −rtol·λ_max

    零矩阵视为半正定。
    """
    A = np.asarray(A, dtype=float)
    if A.size == 0 or not np.any(A):
        return True
    return min_eig_ratio(A) >= -rtol
