import numpy as np
import pytest

from kbound.core.contracts import Dataset, TransferFunction
from kbound.core.errors import DegenerateNoiseError, StabilityError
from kbound.ident.linsys import (
    build_regressor,
    gaussian_input,
    h2_norm,
    impulse_response,
    make_dataset,
    benchmark_system,
    simulate,
    simulate_fir,
)


class TestImpulseResponse:
    def test_pure_delay(self):
        tf = TransferFunction(num=[0.0, 1.0], den=[1.0])
        np.testing.assert_array_equal(impulse_response(tf, 3).coefficients, [0.0, 1.0, 0.0])

    def test_geometric_series(self):
        tf = TransferFunction(num=[1.0], den=[1.0, -0.5])
        np.testing.assert_allclose(impulse_response(tf, 4).coefficients, [1.0, 0.5, 0.25, 0.125])

    def test_length_is_n_g(self):
        assert impulse_response(benchmark_system("G2"), 17).n_g == 17

    def test_unstable_denominator_rejected(self):
        tf = TransferFunction(num=[1.0], den=[1.0, -1.1])
        with pytest.raises(StabilityError):
            impulse_response(tf, 5)

    def test_pole_on_unit_circle_rejected(self):
        with pytest.raises(StabilityError):
            impulse_response(TransferFunction(num=[1.0], den=[1.0, -1.0]), 5)

    def test_non_monic_denominator_rejected(self):
        with pytest.raises(StabilityError):
            TransferFunction(num=[1.0], den=[2.0, -0.5])


class TestH2Norm:
    def test_zero(self):
        assert h2_norm([0.0, 0.0, 0.0]) == 0.0

    def test_pythagorean(self):
        assert h2_norm([3.0, 4.0]) == pytest.approx(5.0)

    @pytest.mark.parametrize("tag", ["G1", "G2"])
    def test_benchmark_systems_unit_norm_after_truncation(self, tag):
        g = impulse_response(benchmark_system(tag), 50)
        assert h2_norm(g) == pytest.approx(1.0, abs=0.02)


class TestBenchmarkSystems:
    def test_complex_poles_have_magnitude_point_nine(self):
        tf = benchmark_system("G2")
        np.testing.assert_allclose(np.abs(tf.poles()), 0.9, atol=1e-9)
        assert tf.is_stable()

    def test_double_pole_at_point_nine(self):
        tf = benchmark_system("G1")
        # 二重根的数值求根误差约为 sqrt(eps)
        np.testing.assert_allclose(np.abs(tf.poles()), 0.9, atol=1e-7)
        assert np.prod(np.abs(tf.poles())) == pytest.approx(0.81, abs=1e-12)
        assert tf.is_stable()

    def test_gains(self):
        # 二重实极点系统增益约 0.0616，复极点系统约 0.4888
        assert benchmark_system("G1").num[2] == pytest.approx(0.0616, abs=5e-4)
        assert benchmark_system("G2").num[2] == pytest.approx(0.4888, abs=5e-4)

    def test_unknown_tag(self):
        with pytest.raises(ValueError):
            benchmark_system("G3")


class TestRegressor:
    def test_impulse_input(self):
        np.testing.assert_array_equal(build_regressor([1.0, 0.0, 0.0], 2), [[1, 0], [0, 1], [0, 0]])

    def test_single_column(self):
        np.testing.assert_array_equal(build_regressor([2.5, -1.0], 1), [[2.5], [-1.0]])

    def test_lower_triangular_toeplitz(self):
        np.testing.assert_array_equal(build_regressor([1.0, 2.0, 3.0], 3), [[1, 0, 0], [2, 1, 0], [3, 2, 1]])

    def test_linearity(self, rng):
        u = rng.standard_normal(25)
        alpha = -3.7
        np.testing.assert_allclose(build_regressor(alpha * u, 6), alpha * build_regressor(u, 6))

    def test_more_lags_than_samples(self):
        phi = build_regressor([1.0, 2.0], 4)
        np.testing.assert_array_equal(phi, [[1, 0, 0, 0], [2, 1, 0, 0]])

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            build_regressor([], 3)


class TestSimulate:
    def test_impulse_input_reproduces_response(self):
        tf = benchmark_system("G1")
        u = np.zeros(30)
        u[0] = 1.0
        data = simulate(tf, u, 0.0, seed=1, n_g=30)
        np.testing.assert_allclose(data.y, impulse_response(tf, 30).coefficients, atol=1e-15)

    def test_zero_input(self):
        data = simulate(benchmark_system("G2"), np.zeros(20), 0.0, seed=1, n_g=5)
        np.testing.assert_array_equal(data.y, np.zeros(20))

    def test_noise_free_identity_random_systems(self, rng):
        for _ in range(20):
            radius = rng.uniform(0.1, 0.95)
            den = np.poly(radius * np.exp(1j * rng.uniform(0, np.pi) * np.array([1, -1]))).real
            tf = TransferFunction(num=rng.standard_normal(3), den=den)
            u = rng.standard_normal(40)
            data = simulate(tf, u, 0.0, seed=0, n_g=10)
            g = impulse_response(tf, 10).coefficients
            np.testing.assert_allclose(data.y, data.phi @ g, rtol=1e-12, atol=1e-14)

    def test_protocol_dataset(self):
        data = simulate(benchmark_system("G1"), gaussian_input(200, 3), 0.1, seed=4, n_g=50)
        assert data.n_samples == 200
        assert data.n_g == 50
        assert data.noise_var == 0.1
        residual = data.y - data.phi @ impulse_response(benchmark_system("G1"), 50).coefficients
        assert residual.var() == pytest.approx(0.1, rel=0.3)

    def test_deterministic_under_seed(self):
        u = gaussian_input(50, 5)
        a = simulate(benchmark_system("G2"), u, 0.3, seed=9, n_g=8)
        b = simulate(benchmark_system("G2"), u, 0.3, seed=9, n_g=8)
        np.testing.assert_array_equal(a.y, b.y)

    def test_negative_noise_rejected(self):
        with pytest.raises(DegenerateNoiseError):
            simulate_fir(np.ones(3), np.ones(5), -0.1)

    def test_dataset_is_read_only(self):
        data = simulate_fir(np.ones(2), np.ones(4), 0.0)
        with pytest.raises(ValueError):
            data.y[0] = 1.0


class TestDataset:
    def test_cached_products(self, small_data):
        np.testing.assert_allclose(small_data.gram, small_data.phi.T @ small_data.phi)
        np.testing.assert_allclose(small_data.phi_y, small_data.phi.T @ small_data.y)
        assert small_data.y_energy == pytest.approx(float(small_data.y @ small_data.y))

    def test_size_mismatch_rejected(self):
        with pytest.raises(ValueError):
            Dataset(u=np.ones(3), y=np.ones(4), phi=np.ones((4, 2)), noise_var=0.1)

    def test_fewer_samples_than_coefficients_rejected(self):
        with pytest.raises(ValueError, match="N=2, n_g=4"):
            make_dataset([1.0, 2.0], [0.0, 1.0], n_g=4, noise_var=0.1)
        with pytest.raises(ValueError):
            simulate_fir(np.ones(5), np.ones(3), 0.1)

    def test_make_dataset(self):
        data = make_dataset([1.0, 2.0, 3.0], [0.5, 1.0, 1.5], n_g=2, noise_var=0.2)
        np.testing.assert_array_equal(data.phi, [[1, 0], [2, 1], [3, 2]])
