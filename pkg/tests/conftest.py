from __future__ import annotations

import os

import numpy as np
import pytest

from kbound.bounds.hypergrid import cell_areas
from kbound.core.contracts import Dataset, ExperimentConfig, GridSpec, HyperGrid
from kbound.ident.linsys import gaussian_input, benchmark_system, simulate, simulate_fir

REPLAY_DIR = os.path.join(os.path.dirname(__file__), "replay")


def random_dataset(rng: np.random.Generator, n_samples: int, n_g: int, noise_var: float = 0.1) -> Dataset:
    """小规模随机实例：随机输入、随机衰减脉冲响应"""
    u = rng.standard_normal(n_samples)
    g = rng.standard_normal(n_g) * 0.8 ** np.arange(n_g)
    return simulate_fir(g, u, noise_var, rng.integers(2 ** 32))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def small_data(rng) -> Dataset:
    return random_dataset(rng, n_samples=30, n_g=6, noise_var=0.2)


@pytest.fixture(scope="session")
def coarse_spec() -> GridSpec:
    return GridSpec(c_count=12, lam_count=12)


@pytest.fixture(scope="session")
def g1_data() -> Dataset:
    """G1, σ² = 0.1, N = 200, n_g = 50"""
    u = gaussian_input(200, 11)
    return simulate(benchmark_system("G1"), u, 0.1, 12, n_g=50)


@pytest.fixture(scope="session")
def g2_data() -> Dataset:
    u = gaussian_input(200, 21)
    return simulate(benchmark_system("G2"), u, 0.5, 22, n_g=50)


@pytest.fixture
def fast_config(tmp_path) -> ExperimentConfig:
    """缩小的实验配置，单次试验在一秒量级"""
    return ExperimentConfig(
        system="G1",
        noise_var=0.1,
        n_samples=80,
        n_g=12,
        kernel="TC",
        runs=3,
        seed=7,
        grid_c_count=10,
        grid_lambda_count=10,
        out_dir=str(tmp_path / "out"),
    )


def grid_from_mass(mass, data: Dataset = None, family: str = "TC") -> HyperGrid:
    """
    直接由单元质量构造超参数网格

    c 在 [0.1, 10] 上对数等距、λ 在 [0.2, 0.8] 上线性等距，单元面积相等。
    """
    mass = np.asarray(mass, dtype=float)
    nc, nl = mass.shape
    c_values = np.geomspace(0.1, 10.0, nc) if nc > 1 else np.array([1.0])
    lam_values = np.linspace(0.2, 0.8, nl) if nl > 1 else np.array([0.5])
    with np.errstate(divide="ignore"):
        log_mass = np.log(mass)
    return HyperGrid(
        c_values=c_values,
        lam_values=lam_values,
        log_marginal=log_mass,
        log_prior=np.zeros_like(mass),
        cell_area=cell_areas(c_values, lam_values),
        mass=mass,
        family=family,
        data=data,
    )
