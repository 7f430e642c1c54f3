"""
最坏情况后验方差模块

给定超参数矩形 [η1, η2]，求后验方差 Σ_ll(η) 在矩形上的上界：

- uniform_sigma: DI/TC 核的闭式上界，σ_l² = diag Σ 在核 (λ2/λ1)^γ·K(η2) 下的取值
- elementwise_sigma: 任意核族，子网格 + 坐标搜索求矩形内的最大值
- minimax_sigma(s): 对每个滞后 l 单独选择可行矩形，使上界最小
"""

from __future__ import annotations

import logging
from typing import Dict, Iterable, Optional

import numpy as np

from kbound.core.contracts import Dataset, HyperGrid, HyperRectangle, Hyperparameters
from kbound.core.errors import NumericalDegeneracyError, UnsupportedKernelError
from kbound.bounds.credible import RectangleSearch, range_max_table
from kbound.ident.estimation import KernelSlice, posterior_variance_table
from kbound.ident.kernels import ORDERED_FAMILIES, check_family, ordering_factor

logger = logging.getLogger(__name__)

# 子网格每个方向的点数
SUBGRID_POINTS = 15

# 坐标搜索的相对步长下限与最大迭代次数
SEARCH_RTOL = 1e-4
SEARCH_MAX_ITER = 60


class VarianceOracle:
    """
    后验方差查询器

    按 λ 缓存 KernelSlice，同一 λ 上任意多个 c 的查询只需一次特征分解。
    """

    def __init__(self, data: Dataset, family: str) -> None:
        check_family(family)
        self.data = data
        self.family = family
        self._slices: Dict[float, KernelSlice] = {}

    def slice(self, lam: float) -> KernelSlice:
        key = float(lam)
        cached = self._slices.get(key)
        if cached is None:
            cached = self._slices[key] = KernelSlice(self.data, self.family, key)
        return cached

    def variances(self, c_values, lam: float) -> np.ndarray:
        """[len(c), n_g]"""
        return self.slice(lam).variances(c_values)

    def variance(self, c: float, lam: float, lag: int) -> float:
        return float(self.slice(lam).variances(c)[0, lag])

    @property
    def cached_slices(self) -> int:
        return len(self._slices)


def uniform_sigma(data: Dataset, family: str, rect: HyperRectangle) -> np.ndarray:
    """
    DI/TC 核在矩形上的一致方差上界

    σ_l² = diag σ²(ΦᵀΦ + σ²(λ1/λ2)^γ K⁻¹(η2))⁻¹，即核取 (λ2/λ1)^γ·K(η2) 时
    的后验方差。

    Raises:
        UnsupportedKernelError: SS 核
        SingularGammaError: TC 核且 λ2 ∉ (0, 1)
    """
    if family not in ORDERED_FAMILIES:
        raise UnsupportedKernelError(f"no closed-form uniform bound for {family} kernels; use elementwise_sigma")
    factor = ordering_factor(family, rect.eta1.lam, rect.eta2.lam)
    if not np.isfinite(factor):
        raise NumericalDegeneracyError(f"ordering factor overflows on {rect}")
    return KernelSlice(data, family, rect.eta2.lam).variances(factor * rect.eta2.c)[0]


def _axis(lo: float, hi: float, log_scale: bool):
    """[0, 1] 到 [lo, hi] 的映射（c 方向在对数坐标中均匀）"""
    if log_scale and lo > 0.0:
        a, b = np.log(lo), np.log(hi)
        return lambda x: np.exp(a + np.asarray(x, dtype=float) * (b - a))
    return lambda x: lo + np.asarray(x, dtype=float) * (hi - lo)


def elementwise_sigma(
    data: Dataset,
    family: str,
    rect: HyperRectangle,
    lag: int,
    oracle: Optional[VarianceOracle] = None,
    points: int = SUBGRID_POINTS,
) -> float:
    """
    矩形内后验方差 Σ_ll(η) 的最大值

    先在 points×points 子网格（c 对数均匀、λ 线性均匀）上取最优点，
    再做坐标搜索：沿两个坐标各试探 ±step，无改进则步长减半，直到相对
    步长低于 1e-4 或达到 60 次迭代。

    Args:
        data: 数据集
        family: 核族
        rect: 超参数矩形
        lag: 滞后下标 l
        oracle: 复用的方差查询器
        points: 子网格每个方向的点数

    Returns:
        float: σ_l²
    """
    if not 0 <= lag < data.n_g:
        raise IndexError(f"lag {lag} outside 0..{data.n_g - 1}")
    oracle = oracle or VarianceOracle(data, family)
    c_of = _axis(rect.eta1.c, rect.eta2.c, log_scale=True)
    lam_of = _axis(rect.eta1.lam, rect.eta2.lam, log_scale=False)
    c_free = rect.eta2.c > rect.eta1.c
    lam_free = rect.eta2.lam > rect.eta1.lam

    xs = np.linspace(0.0, 1.0, points) if c_free else np.zeros(1)
    ys = np.linspace(0.0, 1.0, points) if lam_free else np.zeros(1)
    values = np.column_stack([oracle.variances(c_of(xs), lam_of(y))[:, lag] for y in ys])
    i, j = np.unravel_index(int(np.argmax(values)), values.shape)
    best = float(values[i, j])
    x, y = float(xs[i]), float(ys[j])

    if not (c_free or lam_free):
        return best

    def evaluate(px: float, py: float) -> float:
        return oracle.variance(float(c_of(px)), float(lam_of(py)), lag)

    step = 1.0 / (points - 1) if points > 1 else 0.5
    for _ in range(SEARCH_MAX_ITER):
        moved = False
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            if (dx and not c_free) or (dy and not lam_free):
                continue
            px = min(max(x + dx * step, 0.0), 1.0)
            py = min(max(y + dy * step, 0.0), 1.0)
            if (px, py) == (x, y):
                continue
            value = evaluate(px, py)
            if value > best:
                best, x, y = value, px, py
                moved = True
        if not moved:
            step *= 0.5
            if step < SEARCH_RTOL:
                break
    return best


def _minimax(
    data: Dataset,
    family: str,
    grid: HyperGrid,
    eta_hat: Hyperparameters,
    delta_prime: float,
    lags: Iterable[int],
    variance_table: Optional[np.ndarray] = None,
    oracle: Optional[VarianceOracle] = None,
) -> Dict[int, float]:
    search = RectangleSearch(grid, delta_prime, eta_hat)
    cand = search.candidates()
    if variance_table is None:
        variance_table = posterior_variance_table(data, family, grid.c_values, grid.lam_values)
    screened = range_max_table(variance_table, cand)
    oracle = oracle or VarianceOracle(data, family)

    result: Dict[int, float] = {}
    for lag in lags:
        corners = search.first_verified(search.order(screened[:, lag]))
        rect = search.to_credible_set(corners).rectangle
        result[lag] = elementwise_sigma(data, family, rect, lag, oracle=oracle)
    logger.debug(f"minimax 完成: {len(result)} 个滞后, 缓存切片 {oracle.cached_slices} 个")
    return result


def minimax_sigma(
    data: Dataset,
    family: str,
    grid: HyperGrid,
    eta_hat: Hyperparameters,
    delta_prime: float,
    lag: int,
) -> float:
    """
    单个滞后的 minimax 方差上界

    在所有包含 η̂、质量 ≥ 1 − δ′ 的网格矩形中，先按网格点上的最大后验方差
    筛选出最优矩形，再用 ``elementwise_sigma`` 在该矩形内精化最大值。
    """
    return _minimax(data, family, grid, eta_hat, delta_prime, [lag])[lag]


def minimax_sigmas(
    data: Dataset,
    family: str,
    grid: HyperGrid,
    eta_hat: Hyperparameters,
    delta_prime: float,
    variance_table: Optional[np.ndarray] = None,
) -> np.ndarray:
    """所有滞后的 minimax 方差上界，共享同一个候选集合与方差查询器"""
    values = _minimax(data, family, grid, eta_hat, delta_prime, range(data.n_g), variance_table=variance_table)
    return np.array([values[lag] for lag in range(data.n_g)])
