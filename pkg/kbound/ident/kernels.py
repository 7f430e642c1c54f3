"""
核矩阵模块

构造 DI / TC / SS 三种核矩阵，并提供超参数排序所需的工具：
γ 指数、max 下标矩阵的行列式闭式解、核矩阵的半正定比较。

核的下标 i, j 取 0..n_g−1，与 FIR 滞后一致。
"""

from __future__ import annotations

import logging
import math
from typing import Tuple, Union

import numpy as np
from pydantic import ValidationError

from kbound.core.contracts import KERNEL_FAMILIES, Hyperparameters
from kbound.core.errors import HyperparameterDomainError, SingularGammaError, UnsupportedKernelError
from kbound.ident.linalg import is_psd, psd_factor

logger = logging.getLogger(__name__)

# 核矩阵第一个元素对应的滞后
KERNEL_FIRST_LAG = 0

# 具备解析排序（γ 指数）的核族
ORDERED_FAMILIES: Tuple[str, ...] = ("DI", "TC")

EtaLike = Union[Hyperparameters, Tuple[float, float]]


def as_hyperparameters(eta: EtaLike) -> Hyperparameters:
    """把 (c, λ) 元组转换为 Hyperparameters，越界时抛出 HyperparameterDomainError"""
    if isinstance(eta, Hyperparameters):
        return eta
    try:
        c, lam = eta
        return Hyperparameters(c=float(c), lam=float(lam))
    except (ValidationError, TypeError, ValueError) as exc:
        raise HyperparameterDomainError(f"hyperparameters {eta!r} outside c >= 0, 0 <= lambda <= 1") from exc


def check_family(family: str) -> str:
    if family not in KERNEL_FAMILIES:
        raise UnsupportedKernelError(f"unknown kernel family '{family}', expected one of {KERNEL_FAMILIES}")
    return family


def unit_kernel(family: str, lam: float, n_g: int) -> np.ndarray:
    """c = 1 时的核矩阵；所有核族都关于 c 线性"""
    check_family(family)
    if not 0.0 <= lam <= 1.0:
        raise HyperparameterDomainError(f"lambda={lam} outside [0, 1]")
    if n_g < 1:
        raise ValueError(f"n_g must be positive, got {n_g}")
    idx = np.arange(n_g)
    if family == "DI":
        return np.diag(lam ** idx.astype(float))
    hi = np.maximum.outer(idx, idx).astype(float)
    if family == "TC":
        return lam ** hi
    lo = np.minimum.outer(idx, idx).astype(float)
    return lam ** (2.0 * hi) * (lam ** lo / 2.0 - lam ** hi / 6.0)


def build_kernel(family: str, eta: EtaLike, n_g: int) -> np.ndarray:
    """
    构造 n_g×n_g 核矩阵 K(η)

    - DI: K_ii = cλⁱ，非对角为 0
    - TC: K_ij = cλ^{max(i,j)}
    - SS: K_ij = cλ^{2max(i,j)}(λ^{min(i,j)}/2 − λ^{max(i,j)}/6)

    Args:
        family: 核族标签
        eta: 超参数 (c, λ)
        n_g: 矩阵维数

    Returns:
        np.ndarray: 对称半正定核矩阵
    """
    eta = as_hyperparameters(eta)
    return eta.c * unit_kernel(family, eta.lam, n_g)


def gamma_exponent(family: str, lam2: float, first_lag: int = 1) -> float:
    """
    核排序的 γ 指数

    DI 核 γ = 0；TC 核 γ = −1/ln λ2 − first_lag，其中 first_lag 为核矩阵
    第一个对角元对应的滞后。本库的核从滞后 0 开始，内部调用一律传入
    ``first_lag=KERNEL_FIRST_LAG``。

    Raises:
        SingularGammaError: TC 核且 λ2 ∉ (0, 1)
        UnsupportedKernelError: SS 核（没有解析的排序结果）
    """
    check_family(family)
    if family == "DI":
        return 0.0
    if family == "SS":
        raise UnsupportedKernelError("no closed-form ordering exponent for SS kernels; use the element-wise bound")
    if not 0.0 < lam2 < 1.0:
        raise SingularGammaError(f"gamma undefined for lambda2={lam2}")
    return -1.0 / math.log(lam2) - first_lag


def ordering_factor(family: str, lam1: float, lam2: float) -> float:
    """
    (λ2/λ1)^γ，满足 c2 ≥ (λ2/λ1)^γ·c1 时 K(c2, λ2) ≽ K(c1, λ1)

    γ 按本库核的起始滞后计算。
    """
    gamma = gamma_exponent(family, lam2, first_lag=KERNEL_FIRST_LAG)
    if gamma == 0.0:
        return 1.0
    if lam1 <= 0.0:
        raise SingularGammaError(f"ordering factor undefined for lambda1={lam1}")
    with np.errstate(over="ignore"):
        return float(np.power(lam2 / lam1, gamma))


def maxindex_matrix(m: Union[np.ndarray, list]) -> np.ndarray:
    """M_ij = m_{max(i,j)}"""
    m = np.asarray(m, dtype=float)
    idx = np.arange(m.size)
    return m[np.maximum.outer(idx, idx)]


def maxindex_det(m: Union[np.ndarray, list]) -> float:
    """
    max 下标矩阵的行列式闭式解 det M = m_n·∏(m_i − m_{i+1})

    由此可知 M 半正定当且仅当 m 非增且 m_n ≥ 0。
    """
    m = np.asarray(m, dtype=float)
    if m.size < 1:
        raise ValueError("m must have at least one entry")
    return float(m[-1] * np.prod(m[:-1] - m[1:]))


def decay_gap(lam1: float, lam2: float, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """f(x) = λ2ˣ − λ1ˣ，在 x ≥ −1/ln λ2 上非增"""
    x = np.asarray(x, dtype=float)
    return lam2 ** x - lam1 ** x


def kernel_dominates(family: str, eta_a: EtaLike, eta_b: EtaLike, n_g: int) -> bool:
    """K(η_a) − K(η_b) 是否半正定（相对容差特征值检查）"""
    diff = build_kernel(family, eta_a, n_g) - build_kernel(family, eta_b, n_g)
    return is_psd(diff)


def sample_impulse_response(family: str, eta: EtaLike, n_g: int, seed=None) -> np.ndarray:
    """从先验 g ~ N(0, K(η)) 抽取一条脉冲响应"""
    L = psd_factor(build_kernel(family, eta, n_g))
    return L @ np.random.default_rng(seed).standard_normal(n_g)
