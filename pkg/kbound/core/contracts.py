"""
数据契约定义模块

这个模块定义了整个 KBound 系统中使用的所有数据结构和类型定义。
标量型的配置与超参数通过 Pydantic 模型校验，数值数组容器使用不可变的
dataclass（数组在构造后被设为只读）。

主要包含：
- 核族、误差界方法、缩放模式等字面量类型
- 传递函数、脉冲响应、数据集等系统辨识对象
- 后验模型、超参数网格、可信矩形、误差带等误差界对象
- 蒙特卡洛实验的配置、单次试验记录与覆盖率报告
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from kbound.core.errors import DegenerateNoiseError, StabilityError


# 核族：对角核、调谐/相关核、稳定样条核
KernelFamily = Literal["DI", "TC", "SS"]

# 误差界方法：最小二乘界、原始核界、鲁棒核界
BandMethod = Literal["LS", "vanilla", "robust"]

# 鲁棒界的缩放模式：理论常数 μ̄ 或实用常数 μ_δ
ScalingMode = Literal["theoretical", "practical"]

# 测试系统标签
SystemTag = Literal["G1", "G2", "custom"]

# 正则化估计的计算形式
EstimatorForm = Literal["factor", "dual", "representer", "primal"]

KERNEL_FAMILIES: Tuple[str, ...] = ("DI", "TC", "SS")
BAND_METHODS: Tuple[str, ...] = ("LS", "vanilla", "robust")


def _frozen_array(values, ndim: int, name: str) -> np.ndarray:
    """转换为只读 float64 数组并检查维数"""
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class Hyperparameters(BaseModel):
    """
    核超参数 η=(c, λ)

    c 为尺度（c ≥ 0），λ 为衰减率（0 ≤ λ ≤ 1），两者共同构成定义域 ℍ。
    """
    model_config = ConfigDict(frozen=True)

    c: float = Field(ge=0.0)  # 尺度
    lam: float = Field(ge=0.0, le=1.0)  # 衰减率


class HyperRectangle(BaseModel):
    """
    超参数矩形集合 [η1, η2]

    包含所有满足 c1 ≤ c ≤ c2、λ1 ≤ λ ≤ λ2 的 η。
    """
    model_config = ConfigDict(frozen=True)

    eta1: Hyperparameters  # 左下角
    eta2: Hyperparameters  # 右上角

    @model_validator(mode="after")
    def _check_corners(self) -> "HyperRectangle":
        if self.eta1.c > self.eta2.c or self.eta1.lam > self.eta2.lam:
            raise ValueError(f"rectangle corners out of order: {self.eta1} / {self.eta2}")
        return self

    @property
    def is_degenerate(self) -> bool:
        return self.eta1 == self.eta2

    def contains(self, eta: Hyperparameters) -> bool:
        return (self.eta1.c <= eta.c <= self.eta2.c) and (self.eta1.lam <= eta.lam <= self.eta2.lam)


class GridSpec(BaseModel):
    """
    超参数网格规格

    c 方向对数等距，λ 方向线性等距。网格点必须落在 ℍ 的内部。
    """
    model_config = ConfigDict(frozen=True)

    c_min: float = Field(default=1e-3, gt=0.0)
    c_max: float = Field(default=1e3, gt=0.0)
    c_count: int = Field(default=40, ge=1)
    lam_min: float = Field(default=0.01, gt=0.0, lt=1.0)
    lam_max: float = Field(default=0.99, gt=0.0, lt=1.0)
    lam_count: int = Field(default=40, ge=1)

    @model_validator(mode="after")
    def _check_bounds(self) -> "GridSpec":
        if self.c_min > self.c_max or self.lam_min > self.lam_max:
            raise ValueError("grid bounds out of order")
        if (self.c_count > 1 and self.c_min == self.c_max) or (self.lam_count > 1 and self.lam_min == self.lam_max):
            raise ValueError("grid with several points needs a non-empty range")
        return self

    def c_values(self) -> np.ndarray:
        if self.c_count == 1:
            return np.array([self.c_min])
        return np.geomspace(self.c_min, self.c_max, self.c_count)

    def lam_values(self) -> np.ndarray:
        if self.lam_count == 1:
            return np.array([self.lam_min])
        return np.linspace(self.lam_min, self.lam_max, self.lam_count)


@dataclass(frozen=True)
class TransferFunction:
    """
    离散时间传递函数 G(q) = B(q⁻¹)/A(q⁻¹)

    分子、分母系数均按 q⁻¹ 的升幂排列，分母必须首一。
    """
    num: np.ndarray  # 分子系数
    den: np.ndarray  # 分母系数（首项为 1）

    def __post_init__(self) -> None:
        num = _frozen_array(self.num, 1, "num")
        den = _frozen_array(self.den, 1, "den")
        if den.size == 0 or den[0] != 1.0:
            raise StabilityError(f"denominator must be monic, got {den.tolist()}")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def poles(self) -> np.ndarray:
        """分母多项式的根（z 平面极点）"""
        if self.den.size <= 1:
            return np.array([], dtype=complex)
        return np.roots(self.den)

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))


@dataclass(frozen=True)
class ImpulseResponse:
    """截断脉冲响应 g_0..g_{n_g−1}"""
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", _frozen_array(self.coefficients, 1, "coefficients"))

    @property
    def n_g(self) -> int:
        return int(self.coefficients.size)


@dataclass(frozen=True)
class Dataset:
    """
    辨识数据集

    包含输入 u、输出 y、Toeplitz 回归矩阵 Φ (N×n_g) 以及已知噪声方差 σ²。
    ΦᵀΦ、Φᵀy、yᵀy 在首次访问时缓存，所有 n_g 维约化计算都复用它们。
    """
    u: np.ndarray  # 输入序列
    y: np.ndarray  # 输出序列
    phi: np.ndarray  # 回归矩阵
    noise_var: float  # 噪声方差 σ²

    def __post_init__(self) -> None:
        u = _frozen_array(self.u, 1, "u")
        y = _frozen_array(self.y, 1, "y")
        phi = _frozen_array(self.phi, 2, "phi")
        if phi.shape[0] != y.size or u.size != y.size:
            raise ValueError(f"inconsistent sizes: u={u.size}, y={y.size}, phi={phi.shape}")
        if phi.shape[0] < phi.shape[1]:
            raise ValueError(f"need at least as many samples as FIR coefficients, got N={phi.shape[0]}, n_g={phi.shape[1]}")
        if self.noise_var < 0:
            raise DegenerateNoiseError(f"noise variance must be non-negative, got {self.noise_var}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "noise_var", float(self.noise_var))

    @property
    def n_samples(self) -> int:
        return int(self.y.size)

    @property
    def n_g(self) -> int:
        return int(self.phi.shape[1])

    @cached_property
    def gram(self) -> np.ndarray:
        """ΦᵀΦ"""
        return self.phi.T @ self.phi

    @cached_property
    def phi_y(self) -> np.ndarray:
        """Φᵀy"""
        return self.phi.T @ self.y

    @cached_property
    def y_energy(self) -> float:
        """yᵀy"""
        return float(self.y @ self.y)


@dataclass(frozen=True)
class LeastSquaresModel:
    """最小二乘估计 ĝ_LS 及其协方差 Σ_LS = σ²(ΦᵀΦ)⁻¹"""
    g_hat: np.ndarray
    sigma: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "g_hat", _frozen_array(self.g_hat, 1, "g_hat"))
        object.__setattr__(self, "sigma", _frozen_array(self.sigma, 2, "sigma"))


@dataclass(frozen=True)
class PosteriorModel:
    """核正则化估计：后验均值 ĝ、后验协方差 Σ，以及所用的超参数与核族"""
    g_hat: np.ndarray
    sigma: np.ndarray
    eta: Optional[Hyperparameters] = None
    family: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "g_hat", _frozen_array(self.g_hat, 1, "g_hat"))
        object.__setattr__(self, "sigma", _frozen_array(self.sigma, 2, "sigma"))

    @property
    def variances(self) -> np.ndarray:
        return np.clip(np.diag(self.sigma), 0.0, None)


@dataclass(frozen=True)
class LogMarginal:
    """对数边缘似然 log p(y|u,η)，含完整高斯归一化常数（单位：nat）"""
    value: float
    eta: Hyperparameters

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class HyperGrid:
    """
    离散化的超参数后验

    按 (log c, λ) 坐标的中点规则积分：每个网格点代表一个单元格，
    ``cell_area`` 为正的积分权重，``mass`` 为归一化后的单元格后验质量（和为 1）。
    """
    c_values: np.ndarray  # c 网格（升序）
    lam_values: np.ndarray  # λ 网格（升序）
    log_marginal: np.ndarray  # 每个网格点的对数边缘似然
    log_prior: np.ndarray  # 每个网格点的对数超先验
    cell_area: np.ndarray  # 积分权重
    mass: np.ndarray  # 归一化后验质量
    family: str = "TC"
    data: Optional[Dataset] = field(default=None, repr=False, compare=False)

    @property
    def shape(self) -> Tuple[int, int]:
        return (int(self.c_values.size), int(self.lam_values.size))

    def eta_at(self, i: int, j: int) -> Hyperparameters:
        return Hyperparameters(c=float(self.c_values[i]), lam=float(self.lam_values[j]))

    def index_of(self, eta: Hyperparameters) -> Tuple[int, int]:
        """返回离 η 最近的网格下标（c 方向按对数距离）"""
        i = int(np.argmin(np.abs(np.log(self.c_values) - np.log(max(eta.c, 1e-300)))))
        j = int(np.argmin(np.abs(self.lam_values - eta.lam)))
        return i, j

    def rectangle_mass(self, i1: int, i2: int, j1: int, j2: int) -> float:
        return float(self.mass[i1:i2 + 1, j1:j2 + 1].sum())

    def rectangle_area(self, i1: int, i2: int, j1: int, j2: int) -> float:
        return float(self.cell_area[i1:i2 + 1, j1:j2 + 1].sum())


@dataclass(frozen=True)
class CredibleSet:
    """高概率超参数集合：网格对齐的矩形及其后验质量"""
    rectangle: HyperRectangle
    mass: float
    delta_prime: float
    indices: Tuple[int, int, int, int]  # (i1, i2, j1, j2)

    def __post_init__(self) -> None:
        if self.mass < 1.0 - self.delta_prime:
            raise ValueError(f"credible mass {self.mass} below 1-delta'={1.0 - self.delta_prime}")


@dataclass(frozen=True)
class ErrorBand:
    """
    逐系数误差带

    half_widths[l] = b_l，使得 |ĝ_l − g_l| ≤ b_l 以给定概率成立。
    """
    half_widths: np.ndarray
    method: str  # LS / vanilla / robust
    delta: float
    delta_prime: Optional[float] = None
    scaling: Optional[str] = None
    mu_bar: Optional[float] = None

    def __post_init__(self) -> None:
        hw = _frozen_array(self.half_widths, 1, "half_widths")
        if np.any(hw < 0) or not np.all(np.isfinite(hw)):
            raise ValueError("half widths must be finite and non-negative")
        object.__setattr__(self, "half_widths", hw)

    def contains(self, g_hat: np.ndarray, g_true: np.ndarray) -> np.ndarray:
        """逐系数判断真值是否落在 ĝ ± b 内"""
        return np.abs(np.asarray(g_hat) - np.asarray(g_true)) <= self.half_widths


@dataclass(frozen=True)
class IdentificationResult:
    """一次完整辨识的全部产物（流水线输出）"""
    ls_model: LeastSquaresModel
    posterior: PosteriorModel
    eta_hat: Hyperparameters
    grid: HyperGrid
    credible_set: CredibleSet
    bands: Dict[str, ErrorBand]


class ExperimentConfig(BaseModel):
    """
    蒙特卡洛实验配置

    字段与配置文件中的键一一对应；命令行参数会覆盖同名字段。
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    system: SystemTag = "G1"  # 测试系统
    noise_var: float = Field(default=0.1, gt=0.0)  # 噪声方差 σ²
    n_samples: int = Field(default=200, ge=1)  # 样本数 N
    n_g: int = Field(default=50, ge=1)  # FIR 长度
    kernel: KernelFamily = "TC"  # 核族
    delta: float = Field(default=0.1, gt=0.0, lt=1.0)  # 噪声置信参数 δ
    delta_prime: float = Field(default=0.1, gt=0.0, lt=1.0)  # 超参数置信参数 δ′
    scaling: ScalingMode = "practical"  # μ̄ 缩放模式
    runs: int = Field(default=100, ge=1)  # 蒙特卡洛次数
    seed: int = Field(default=0, ge=0, lt=2 ** 64)  # 主种子
    grid_c_min: float = Field(default=1e-3, gt=0.0)
    grid_c_max: float = Field(default=1e3, gt=0.0)
    grid_c_count: int = Field(default=40, ge=1)
    grid_lambda_min: float = Field(default=0.01, gt=0.0, lt=1.0)
    grid_lambda_max: float = Field(default=0.99, gt=0.0, lt=1.0)
    grid_lambda_count: int = Field(default=40, ge=1)
    out_dir: str = "results"  # 输出目录
    jobs: int = Field(default=1, ge=1)  # 并行进程数
    custom_num: Optional[List[float]] = None  # system=custom 时的分子
    custom_den: Optional[List[float]] = None  # system=custom 时的分母

    @model_validator(mode="after")
    def _check_consistency(self) -> "ExperimentConfig":
        if self.n_samples < self.n_g:
            raise ValueError(f"n_samples ({self.n_samples}) must be at least n_g ({self.n_g})")
        if self.system == "custom" and (not self.custom_num or not self.custom_den):
            raise ValueError("system 'custom' needs custom_num and custom_den")
        try:
            self.grid_spec()  # 触发网格规格校验
        except ValueError as exc:
            raise ValueError(f"invalid grid settings: {exc}") from None
        return self

    def grid_spec(self) -> GridSpec:
        return GridSpec(
            c_min=self.grid_c_min,
            c_max=self.grid_c_max,
            c_count=self.grid_c_count,
            lam_min=self.grid_lambda_min,
            lam_max=self.grid_lambda_max,
            lam_count=self.grid_lambda_count,
        )


@dataclass(frozen=True)
class TrialRecord:
    """单次蒙特卡洛试验记录"""
    index: int
    seed: int
    contained: Dict[str, np.ndarray]  # 方法 -> 逐系数包含指示
    half_widths: Dict[str, np.ndarray]  # 方法 -> 逐系数半宽
    eta_hat: Hyperparameters
    credible_set: CredibleSet


@dataclass(frozen=True)
class CoverageReport:
    """
    覆盖率报告

    frequencies[method] 为逐系数的经验包含频率（n_g 维），
    half_widths[method] 为每次试验的半宽（runs×n_g）。
    """
    frequencies: Dict[str, np.ndarray]
    half_widths: Dict[str, np.ndarray]
    eta_hats: List[Hyperparameters]
    credible_sets: List[CredibleSet]
    seeds: List[int]

    @classmethod
    def from_trials(cls, records: List[TrialRecord]) -> "CoverageReport":
        """按试验序号聚合；包含指示求和与执行顺序无关"""
        if not records:
            raise ValueError("cannot aggregate an empty list of trials")
        records = sorted(records, key=lambda r: r.index)
        frequencies = {
            m: np.mean(np.stack([r.contained[m] for r in records]).astype(float), axis=0)
            for m in BAND_METHODS
        }
        half_widths = {m: np.stack([r.half_widths[m] for r in records]) for m in BAND_METHODS}
        return cls(
            frequencies=frequencies,
            half_widths=half_widths,
            eta_hats=[r.eta_hat for r in records],
            credible_sets=[r.credible_set for r in records],
            seeds=[r.seed for r in records],
        )

    @property
    def runs(self) -> int:
        return len(self.seeds)

    @property
    def n_g(self) -> int:
        return int(self.frequencies["LS"].size)

    def mean_half_width(self, method: str) -> float:
        return float(np.mean(self.half_widths[method]))

    def summary(self) -> Dict[str, Dict[str, float]]:
        """每种方法的平均覆盖率与平均半宽"""
        return {
            m: {
                "mean_coverage": float(np.mean(self.frequencies[m])),
                "min_coverage": float(np.min(self.frequencies[m])),
                "mean_half_width": self.mean_half_width(m),
            }
            for m in BAND_METHODS
        }
