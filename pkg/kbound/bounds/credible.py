"""
可信矩形模块

在超参数网格上枚举与网格对齐、包含 η̂ 且后验质量 ≥ 1 − δ′ 的矩形，
并按目标函数选出最优者。

枚举策略：对每个 (i1, i2, j1)，质量随 j2 单调不减，只保留满足质量约束的
最小 j2（更大的 j2 只会增大目标与面积）。质量查询使用前缀和，O(1)。
并列时依次比较：目标值、面积、角点下标 (i1, j1, i2, j2)。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from kbound.core.contracts import CredibleSet, HyperGrid, HyperRectangle, Hyperparameters
from kbound.core.errors import ConfidenceLevelError, CoverageInfeasibleError
from kbound.ident.estimation import posterior_variance_table
from kbound.ident.kernels import ORDERED_FAMILIES, ordering_factor

logger = logging.getLogger(__name__)

# 前缀和质量与直接求和之间允许的舍入差
_MASS_SLACK = 1e-12


@dataclass(frozen=True)
class RectangleCandidates:
    """可行矩形集合（每个数组长度相同）"""
    i1: np.ndarray
    i2: np.ndarray
    j1: np.ndarray
    j2: np.ndarray
    mass: np.ndarray
    area: np.ndarray

    def __len__(self) -> int:
        return int(self.i1.size)


class RectangleSearch:
    """
    网格矩形搜索器

    负责可行矩形的枚举、按目标排序以及最终的质量复核。
    """

    def __init__(self, grid: HyperGrid, delta_prime: float, eta_hat: Optional[Hyperparameters] = None) -> None:
        """
        初始化矩形搜索器

        Args:
            grid: 归一化的超参数网格
            delta_prime: 超参数置信参数 δ′
            eta_hat: 必须包含的点；None 表示不加包含约束
        """
        if not 0.0 < delta_prime < 1.0:
            raise ConfidenceLevelError(f"delta' must lie in (0, 1), got {delta_prime}")
        self.grid = grid
        self.delta_prime = delta_prime
        self.target = 1.0 - delta_prime
        nc, nl = grid.shape
        if eta_hat is None:
            self.anchor = None
        else:
            self.anchor = grid.index_of(eta_hat)

        self._mass_prefix = np.zeros((nc + 1, nl + 1))
        self._mass_prefix[1:, 1:] = grid.mass.cumsum(axis=0).cumsum(axis=1)
        self._area_prefix = np.zeros((nc + 1, nl + 1))
        self._area_prefix[1:, 1:] = grid.cell_area.cumsum(axis=0).cumsum(axis=1)
        self._candidates: Optional[RectangleCandidates] = None

    @staticmethod
    def _box(prefix: np.ndarray, i1, i2, j1, j2):
        return prefix[i2 + 1, j2 + 1] - prefix[i1, j2 + 1] - prefix[i2 + 1, j1] + prefix[i1, j1]

    def mass(self, i1, i2, j1, j2):
        return self._box(self._mass_prefix, i1, i2, j1, j2)

    def area(self, i1, i2, j1, j2):
        return self._box(self._area_prefix, i1, i2, j1, j2)

    def candidates(self) -> RectangleCandidates:
        """
        枚举所有极小可行矩形

        Raises:
            CoverageInfeasibleError: 没有任何矩形达到 1 − δ′
        """
        if self._candidates is not None:
            return self._candidates

        nc, nl = self.grid.shape
        ic, jc = self.anchor if self.anchor is not None else (nc - 1, nl - 1)
        i1_range = range(0, ic + 1) if self.anchor is not None else range(nc)
        j1_stop = jc + 1 if self.anchor is not None else nl

        rows = []
        for i1 in i1_range:
            for i2 in range(max(i1, ic if self.anchor is not None else i1), nc):
                col = np.zeros(nl + 1)
                col[1:] = self.grid.mass[i1:i2 + 1].sum(axis=0).cumsum()
                j1 = np.arange(j1_stop)
                need = col[j1] + self.target - _MASS_SLACK
                j2 = np.searchsorted(col[1:], need, side="left")
                if self.anchor is not None:
                    j2 = np.maximum(j2, jc)
                ok = j2 < nl
                ok &= j2 >= j1
                if not np.any(ok):
                    continue
                j1, j2 = j1[ok], j2[ok]
                rows.append(np.column_stack([np.full(j1.size, i1), np.full(j1.size, i2), j1, j2]))

        if not rows:
            raise CoverageInfeasibleError(
                f"no grid rectangle reaches posterior mass {self.target:.3g}; enlarge the hyperparameter grid"
            )
        idx = np.concatenate(rows).astype(int)
        i1, i2, j1, j2 = idx.T
        self._candidates = RectangleCandidates(
            i1=i1, i2=i2, j1=j1, j2=j2,
            mass=self.mass(i1, i2, j1, j2),
            area=self.area(i1, i2, j1, j2),
        )
        logger.debug(f"可行矩形数: {len(self._candidates)}")
        return self._candidates

    def order(self, objective: np.ndarray) -> np.ndarray:
        """按 (目标, 面积, i1, j1, i2, j2) 的字典序排序后的候选下标"""
        cand = self.candidates()
        return np.lexsort((cand.j2, cand.i2, cand.j1, cand.i1, cand.area, objective))

    def first_verified(self, ranking: np.ndarray) -> Tuple[int, int, int, int]:
        """排序中第一个通过直接求和质量复核的矩形"""
        cand = self.candidates()
        for k in ranking:
            corners = (int(cand.i1[k]), int(cand.i2[k]), int(cand.j1[k]), int(cand.j2[k]))
            if self.grid.rectangle_mass(*corners) >= self.target:
                return corners
        raise CoverageInfeasibleError(
            f"no grid rectangle reaches posterior mass {self.target:.3g}; enlarge the hyperparameter grid"
        )

    def select(self, objective: Callable[[RectangleCandidates], np.ndarray]) -> Tuple[int, int, int, int]:
        cand = self.candidates()
        return self.first_verified(self.order(np.asarray(objective(cand), dtype=float)))

    def to_credible_set(self, corners: Tuple[int, int, int, int]) -> CredibleSet:
        i1, i2, j1, j2 = corners
        rect = HyperRectangle(eta1=self.grid.eta_at(i1, j1), eta2=self.grid.eta_at(i2, j2))
        return CredibleSet(
            rectangle=rect,
            mass=self.grid.rectangle_mass(i1, i2, j1, j2),
            delta_prime=self.delta_prime,
            indices=corners,
        )


def ordered_objective(grid: HyperGrid, family: str, n_g: int) -> Callable[[RectangleCandidates], np.ndarray]:
    """DI/TC 目标：(λ2/λ1)^γ·tr(K(η2))"""
    lags = np.arange(n_g)

    def objective(cand: RectangleCandidates) -> np.ndarray:
        c2 = grid.c_values[cand.i2]
        lam1 = grid.lam_values[cand.j1]
        lam2 = grid.lam_values[cand.j2]
        trace = c2 * np.array([np.sum(l2 ** lags) for l2 in lam2])
        factor = np.array([ordering_factor(family, a, b) for a, b in zip(lam1, lam2)])
        return factor * trace

    return objective


def range_max_table(table: np.ndarray, cand: RectangleCandidates) -> np.ndarray:
    """
    每个候选矩形上的逐滞后最大值

    Args:
        table: [n_c, n_λ, n_g] 的网格取值
        cand: 候选矩形

    Returns:
        np.ndarray: [len(cand), n_g]
    """
    out = np.empty((len(cand), table.shape[2]))
    order = np.lexsort((cand.i2, cand.i1))
    running = None
    prev = (-1, -1)
    for k in order:
        i1, i2 = int(cand.i1[k]), int(cand.i2[k])
        if (i1, i2) != prev:
            if i1 != prev[0] or i2 != prev[1] + 1 or running is None:
                running = table[i1:i2 + 1].max(axis=0)
            else:
                running = np.maximum(running, table[i2])
            prev = (i1, i2)
        out[k] = running[cand.j1[k]:cand.j2[k] + 1].max(axis=0)
    return out


def credible_rectangle(
    grid: HyperGrid,
    eta_hat: Hyperparameters,
    delta_prime: float,
    family: str,
    variance_table: Optional[np.ndarray] = None,
) -> CredibleSet:
    """
    选取可信矩形

    在所有包含 η̂、质量 ≥ 1 − δ′ 的网格矩形中：DI/TC 最小化
    (λ2/λ1)^γ·tr(K(η2))；SS 最小化 Σ_l σ_l，σ_l² 取矩形内网格点后验方差的
    最大值。

    Args:
        grid: 超参数网格（SS 需要 grid.data 或 variance_table）
        eta_hat: 估计的超参数，必须在网格上
        delta_prime: δ′
        family: 核族
        variance_table: 预先算好的 [n_c, n_λ, n_g] 后验方差表

    Returns:
        CredibleSet: 选中的矩形及其质量
    """
    search = RectangleSearch(grid, delta_prime, eta_hat)
    if family in ORDERED_FAMILIES:
        n_g = grid.data.n_g if grid.data is not None else _n_g_from(variance_table)
        corners = search.select(ordered_objective(grid, family, n_g))
    else:
        if variance_table is None:
            if grid.data is None:
                raise ValueError("SS credible set needs the dataset or a variance table")
            variance_table = posterior_variance_table(grid.data, family, grid.c_values, grid.lam_values)
        corners = search.select(lambda cand: np.sqrt(range_max_table(variance_table, cand)).sum(axis=1))

    credible = search.to_credible_set(corners)
    if not credible.rectangle.contains(eta_hat):
        raise AssertionError(f"credible rectangle {corners} misses the estimate {eta_hat}")
    logger.info(
        f"可信矩形: c∈[{credible.rectangle.eta1.c:.3g}, {credible.rectangle.eta2.c:.3g}], "
        f"λ∈[{credible.rectangle.eta1.lam:.3g}, {credible.rectangle.eta2.lam:.3g}], 质量={credible.mass:.4f}"
    )
    return credible


def _n_g_from(variance_table: Optional[np.ndarray]) -> int:
    if variance_table is None:
        raise ValueError("credible set needs the dataset or a variance table")
    return int(variance_table.shape[2])


def localization_area_fraction(grid: HyperGrid, delta_prime: float = 0.1) -> float:
    """
    局部化统计量

    持有 1 − δ′ 质量的最小面积矩形占整个网格面积的比例。
    """
    search = RectangleSearch(grid, delta_prime)
    corners = search.select(lambda cand: cand.area)
    return float(grid.rectangle_area(*corners) / grid.cell_area.sum())
