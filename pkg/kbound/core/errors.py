"""
异常类型定义模块

KBound 库抛出的所有异常都派生自 ``KBoundError``，同时继承最贴近的内置
异常类型，调用方既可以捕获库异常，也可以按内置类型捕获。
"""

from __future__ import annotations


class KBoundError(Exception):
    """KBound 库异常基类"""


class StabilityError(KBoundError, ValueError):
    """传递函数分母非首一或存在单位圆外（含圆上）的极点"""


class HyperparameterDomainError(KBoundError, ValueError):
    """超参数 η=(c, λ) 不在定义域 ℍ 内"""


class ConfidenceLevelError(KBoundError, ValueError):
    """置信参数 δ 或 δ′ 不在 (0, 1) 内"""


class SingularGammaError(KBoundError, ZeroDivisionError):
    """TC 核的 γ 指数在 λ2 ∈ {0, 1} 处奇异"""


class UnsupportedKernelError(KBoundError, NotImplementedError):
    """请求的解析排序机制不支持该核族（只覆盖 DI/TC）"""


class SingularRegressorError(KBoundError, ArithmeticError):
    """回归矩阵 Φ 秩亏，ΦᵀΦ 不可逆"""


class DegenerateNoiseError(KBoundError, ValueError):
    """噪声方差不合法（需要 σ² > 0 的地方给了 σ² = 0，或 σ² < 0）"""


class CoverageInfeasibleError(KBoundError, RuntimeError):
    """网格上没有任何矩形达到 1−δ′ 的后验质量"""


class NumericalDegeneracyError(KBoundError, ArithmeticError):
    """超参数后验归一化失败"""


class ConfigError(KBoundError, ValueError):
    """配置文件缺失或字段非法"""


class TrialFailedError(KBoundError, RuntimeError):
    """
    单次蒙特卡洛试验失败

    保留试验序号和种子，便于单独复现。参数通过 ``super().__init__`` 传入，
    保证异常可以在进程池之间被 pickle。
    """

    def __init__(self, index: int, seed: int, reason: str) -> None:
        super().__init__(index, seed, reason)
        self.index = index  # 试验序号
        self.seed = seed  # 试验种子
        self.reason = reason  # 原始异常描述

    def __str__(self) -> str:
        return f"trial {self.index} (seed={self.seed}) failed: {self.reason}"
