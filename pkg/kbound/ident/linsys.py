"""
线性系统模块

定义离散时间 LTI 测试系统，生成带高斯噪声的输入输出数据，并构造 FIR
回归问题。

约定：时间 t 从 1 开始计数，滞后 l 从 0 开始计数；系统在采集开始前静止
（t ≤ 0 时 u_t = 0）。仿真使用截断到 n_g 的脉冲响应，因此 FIR 模型按构造精确。

主要功能：
- 传递函数的脉冲响应与 H2 范数
- Toeplitz 回归矩阵构造
- 数据仿真（可复现的种子）
- 两个极点幅值为 0.9 的标准测试系统 G1 / G2
"""

from __future__ import annotations

import logging
from typing import Sequence, Union

import numpy as np
from scipy import linalg, signal

from kbound.core.contracts import Dataset, ImpulseResponse, TransferFunction
from kbound.core.errors import DegenerateNoiseError, StabilityError

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence, None]

# 计算归一化增益时使用的截断长度（0.9^2000 远小于机器精度）
_NORMALIZATION_LAGS = 2000

# 单位增益形式的测试系统分母（q⁻¹ 升幂）
_BENCHMARK_DENOMINATORS = {
    "G1": (1.0, -1.8, 0.81),  # 二重实极点 0.9
    "G2": (1.0, -1.0, 0.81),  # 复共轭极点，幅值 0.9
}


def impulse_response(tf: TransferFunction, n_g: int) -> ImpulseResponse:
    """
    传递函数的截断脉冲响应

    g_l 为 tf 幂级数展开中 q⁻ˡ 的系数，由分母诱导的线性递推计算
    （即对单位脉冲做 IIR 滤波）。

    Args:
        tf: 稳定、因果的传递函数
        n_g: 截断长度

    Returns:
        ImpulseResponse: g_0..g_{n_g−1}

    Raises:
        StabilityError: 分母存在单位圆上或圆外的根
    """
    if n_g < 1:
        raise ValueError(f"n_g must be positive, got {n_g}")
    if not tf.is_stable():
        raise StabilityError(f"unstable denominator, poles={np.abs(tf.poles()).tolist()}")
    impulse = np.zeros(n_g)
    impulse[0] = 1.0
    return ImpulseResponse(signal.lfilter(tf.num, tf.den, impulse))


def h2_norm(g: Union[ImpulseResponse, Sequence[float], np.ndarray]) -> float:
    """截断脉冲响应的 H2 范数 sqrt(Σ g_l²)"""
    coeffs = g.coefficients if isinstance(g, ImpulseResponse) else np.asarray(g, dtype=float)
    return float(np.linalg.norm(coeffs))


def build_regressor(u: Union[Sequence[float], np.ndarray], n_g: int) -> np.ndarray:
    """
    构造 N×n_g 的下三角 Toeplitz 回归矩阵 Φ_{t,l} = u_{t−l}

    Examples:
        >>> build_regressor([1.0, 2.0, 3.0], 3)
        array([[1., 0., 0.],
               [2., 1., 0.],
               [3., 2., 1.]])
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size < 1:
        raise ValueError("input sequence must be a non-empty 1-D array")
    if n_g < 1:
        raise ValueError(f"n_g must be positive, got {n_g}")
    first_row = np.zeros(n_g)
    first_row[0] = u[0]
    return linalg.toeplitz(u, first_row)


def gaussian_input(n: int, seed: SeedLike = None) -> np.ndarray:
    """长度为 n 的单位方差高斯白噪声输入"""
    return np.random.default_rng(seed).standard_normal(n)


def simulate_fir(
    g: Union[ImpulseResponse, np.ndarray],
    u: Union[Sequence[float], np.ndarray],
    noise_var: float,
    seed: SeedLike = None,
) -> Dataset:
    """
    由给定的 FIR 系数仿真数据：y = Φg + v，v ~ N(0, σ²I)

    Args:
        g: 真实脉冲响应（长度即 n_g）
        u: 输入序列
        noise_var: 噪声方差 σ² ≥ 0
        seed: 噪声随机种子

    Returns:
        Dataset: 含 Φ 与 σ² 的数据集
    """
    if noise_var < 0:
        raise DegenerateNoiseError(f"noise variance must be non-negative, got {noise_var}")
    coeffs = g.coefficients if isinstance(g, ImpulseResponse) else np.asarray(g, dtype=float)
    u = np.asarray(u, dtype=float)
    phi = build_regressor(u, coeffs.size)
    y = phi @ coeffs
    if noise_var > 0:
        y = y + np.sqrt(noise_var) * np.random.default_rng(seed).standard_normal(u.size)
    return Dataset(u=u, y=y, phi=phi, noise_var=noise_var)


def simulate(
    tf: TransferFunction,
    u: Union[Sequence[float], np.ndarray],
    noise_var: float,
    seed: SeedLike = None,
    *,
    n_g: int,
) -> Dataset:
    """
    仿真传递函数 tf 在输入 u 下的带噪输出

    输出为 u 与截断到 n_g 的脉冲响应的因果卷积，加上独立同分布的零均值
    高斯噪声。固定种子时结果确定。
    """
    g = impulse_response(tf, n_g)
    data = simulate_fir(g, u, noise_var, seed)
    logger.debug(f"仿真完成: N={data.n_samples}, n_g={n_g}, σ²={noise_var}")
    return data


def benchmark_system(tag: str) -> TransferFunction:
    """
    标准测试系统 G1 / G2

    两个系统各有两个幅值为 0.9 的极点，分子增益按无穷脉冲响应的 H2 范数
    归一化为 1：G1 为二重实极点，增益约 0.0616；G2 为复共轭极点，增益约 0.4888。

    Args:
        tag: "G1" 或 "G2"

    Returns:
        TransferFunction: 分子 [0, 0, b]，分母首一
    """
    try:
        den = np.array(_BENCHMARK_DENOMINATORS[tag])
    except KeyError:
        raise ValueError(f"unknown test system '{tag}', expected one of {sorted(_BENCHMARK_DENOMINATORS)}") from None
    unit = TransferFunction(num=np.array([0.0, 0.0, 1.0]), den=den)
    gain = 1.0 / h2_norm(impulse_response(unit, _NORMALIZATION_LAGS))
    return TransferFunction(num=np.array([0.0, 0.0, gain]), den=den)


def make_dataset(u: Union[Sequence[float], np.ndarray], y: Union[Sequence[float], np.ndarray], n_g: int, noise_var: float) -> Dataset:
    """由已测得的 (u, y) 组装数据集"""
    return Dataset(u=np.asarray(u, dtype=float), y=np.asarray(y, dtype=float), phi=build_regressor(u, n_g), noise_var=noise_var)
