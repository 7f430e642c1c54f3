import numpy as np
import pytest

from conftest import random_dataset
from kbound.core.contracts import Dataset, GridSpec, Hyperparameters, PosteriorModel
from kbound.core.errors import DegenerateNoiseError, SingularRegressorError
from kbound.ident.estimation import (
    KernelSlice,
    estimate_hyperparameters,
    estimate_noise_variance,
    grid_argmax,
    least_squares,
    log_marginal,
    log_marginal_table,
    posterior_at,
    posterior_norm_sq,
    posterior_variance_table,
    regularized_estimate,
    representer_values,
    rkhs_norm_sq,
)
from kbound.ident.kernels import build_kernel, sample_impulse_response
from kbound.ident.linalg import is_psd
from kbound.ident.linsys import simulate_fir


def dense_log_marginal(data: Dataset, K: np.ndarray) -> float:
    """直接在 N 维上计算的对数边缘似然"""
    psi = data.noise_var * np.eye(data.n_samples) + data.phi @ K @ data.phi.T
    sign, logdet = np.linalg.slogdet(psi)
    assert sign > 0
    quad = data.y @ np.linalg.solve(psi, data.y)
    return float(-0.5 * logdet - 0.5 * quad - 0.5 * data.n_samples * np.log(2 * np.pi))


def identity_dataset(y, noise_var=1.0) -> Dataset:
    y = np.asarray(y, dtype=float)
    return Dataset(u=np.zeros(y.size), y=y, phi=np.eye(y.size), noise_var=noise_var)


class TestLeastSquares:
    def test_identity_regressor(self):
        data = identity_dataset([1.0, -2.0, 0.5])
        model = least_squares(data)
        np.testing.assert_allclose(model.g_hat, [1.0, -2.0, 0.5])
        np.testing.assert_allclose(model.sigma, np.eye(3))

    def test_noise_free_recovers_truth(self, rng):
        g = rng.standard_normal(5)
        data = simulate_fir(g, rng.standard_normal(40), 0.0)
        np.testing.assert_allclose(least_squares(data).g_hat, g, rtol=1e-10, atol=1e-12)

    def test_matches_pseudo_inverse(self, rng):
        phi = rng.standard_normal((6, 3))
        y = rng.standard_normal(6)
        data = Dataset(u=np.zeros(6), y=y, phi=phi, noise_var=0.5)
        model = least_squares(data)
        np.testing.assert_allclose(model.g_hat, np.linalg.pinv(phi) @ y, rtol=1e-10)
        np.testing.assert_allclose(model.sigma, 0.5 * np.linalg.inv(phi.T @ phi), rtol=1e-10)

    def test_rank_deficient(self):
        data = simulate_fir(np.ones(3), np.zeros(10), 0.0)
        with pytest.raises(SingularRegressorError):
            least_squares(data)

    def test_rank_deficient_is_arithmetic_error(self):
        phi = np.column_stack([np.arange(1.0, 6.0), 2.0 * np.arange(1.0, 6.0)])
        data = Dataset(u=np.zeros(5), y=np.ones(5), phi=phi, noise_var=0.1)
        with pytest.raises(ArithmeticError):
            least_squares(data)

    def test_noise_variance_estimate(self, rng):
        data = random_dataset(rng, 400, 5, noise_var=0.3)
        assert estimate_noise_variance(data) == pytest.approx(0.3, rel=0.25)


class TestRegularizedEstimate:
    def test_scalar_case(self):
        data = identity_dataset([1.0], noise_var=1.0)
        model = regularized_estimate(data, np.array([[1.0]]))
        assert model.g_hat[0] == pytest.approx(0.5)
        assert model.sigma[0, 0] == pytest.approx(0.5)

    def test_vanishing_regularization(self, rng):
        data = random_dataset(rng, 40, 4, noise_var=0.1)
        model = regularized_estimate(data, 1e9 * np.eye(4))
        ls = least_squares(data).g_hat
        assert np.linalg.norm(model.g_hat - ls) / np.linalg.norm(ls) < 1e-5

    def test_zero_noise_rejected(self, rng):
        data = simulate_fir(np.ones(3), rng.standard_normal(10), 0.0)
        with pytest.raises(DegenerateNoiseError):
            regularized_estimate(data, np.eye(3))

    def test_unknown_form(self, small_data):
        with pytest.raises(ValueError):
            regularized_estimate(small_data, np.eye(small_data.n_g), form="cholesky")

    def test_forms_agree(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n_g = int(rng.integers(1, 11))
            N = int(rng.integers(n_g, 41))
            data = random_dataset(rng, N, n_g, noise_var=rng.uniform(0.05, 1.0))
            K = build_kernel("TC", (rng.uniform(0.1, 5.0), rng.uniform(0.3, 0.95)), n_g)
            ref = regularized_estimate(data, K, form="primal")
            for form in ("factor", "dual", "representer"):
                other = regularized_estimate(data, K, form=form)
                scale = max(np.abs(ref.g_hat).max(), 1e-12)
                assert np.abs(other.g_hat - ref.g_hat).max() <= 1e-8 * scale
                assert np.abs(other.sigma - ref.sigma).max() <= 1e-8 * np.abs(ref.sigma).max()

    def test_posterior_shrinks_prior(self):
        rng = np.random.default_rng(4)
        for family in ("DI", "TC", "SS"):
            for _ in range(20):
                data = random_dataset(rng, 30, 8, noise_var=0.2)
                eta = (rng.uniform(0.1, 5.0), rng.uniform(0.3, 0.95))
                model = posterior_at(data, family, eta)
                assert is_psd(build_kernel(family, eta, 8) - model.sigma)
                assert is_psd(model.sigma)

    def test_posterior_records_hyperparameters(self, small_data):
        model = posterior_at(small_data, "TC", (1.0, 0.7))
        assert model.eta == Hyperparameters(c=1.0, lam=0.7)
        assert model.family == "TC"

    def test_representer_values_at_lags(self, small_data):
        K = build_kernel("TC", (2.0, 0.8), small_data.n_g)
        model = regularized_estimate(small_data, K)
        np.testing.assert_allclose(representer_values(small_data, K, K), model.g_hat, rtol=1e-9, atol=1e-12)


class TestNorms:
    def test_rkhs_norm_of_zero(self, small_data):
        K = build_kernel("TC", (1.0, 0.7), small_data.n_g)
        zero = PosteriorModel(g_hat=np.zeros(small_data.n_g), sigma=K)
        assert rkhs_norm_sq(zero, K) == 0.0

    def test_rkhs_norm_identity_kernel(self, small_data):
        model = regularized_estimate(small_data, np.eye(small_data.n_g))
        assert rkhs_norm_sq(model, np.eye(small_data.n_g)) == pytest.approx(model.g_hat @ model.g_hat)

    def test_rkhs_norm_dual_identity(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            data = random_dataset(rng, 25, 5, noise_var=0.3)
            K = build_kernel("TC", (rng.uniform(0.5, 3.0), rng.uniform(0.4, 0.9)), 5)
            model = regularized_estimate(data, K)
            psi = data.phi @ K @ data.phi.T + data.noise_var * np.eye(25)
            alpha = np.linalg.solve(psi, data.y)
            expected = alpha @ data.phi @ K @ data.phi.T @ alpha
            assert rkhs_norm_sq(model, K) == pytest.approx(expected, rel=1e-8)

    def test_posterior_norm_identity(self, small_data):
        model = posterior_at(small_data, "TC", (1.0, 0.6))
        direct = model.g_hat @ np.linalg.solve(model.sigma, model.g_hat)
        assert posterior_norm_sq(model, small_data) == pytest.approx(direct, rel=1e-6)


class TestLogMarginal:
    def test_zero_inputs(self):
        y = np.array([0.3, -1.2, 0.8, 0.1])
        data = Dataset(u=np.zeros(4), y=y, phi=np.zeros((4, 2)), noise_var=0.5)
        expected = -2.0 * np.log(2 * np.pi * 0.5) - (y @ y) / (2 * 0.5)
        assert log_marginal(data, "TC", (1.0, 0.5)).value == pytest.approx(expected)

    def test_zero_scale(self, small_data):
        s, N = small_data.noise_var, small_data.n_samples
        expected = -0.5 * N * np.log(2 * np.pi * s) - small_data.y_energy / (2 * s)
        assert float(log_marginal(small_data, "SS", (0.0, 0.5))) == pytest.approx(expected)

    @pytest.mark.parametrize("family", ["DI", "TC", "SS"])
    def test_matches_dense_evaluation(self, family):
        rng = np.random.default_rng(6)
        for _ in range(100):
            n_g = int(rng.integers(1, 6))
            N = int(rng.integers(max(n_g, 2), 31))
            data = random_dataset(rng, N, n_g, noise_var=rng.uniform(0.05, 1.0))
            eta = (rng.uniform(0.01, 10.0), rng.uniform(0.05, 0.98))
            expected = dense_log_marginal(data, build_kernel(family, eta, n_g))
            assert log_marginal(data, family, eta).value == pytest.approx(expected, rel=1e-9, abs=1e-7)

    def test_small_instance(self):
        rng = np.random.default_rng(7)
        data = random_dataset(rng, 8, 3, noise_var=0.4)
        eta = (2.0, 0.6)
        assert log_marginal(data, "TC", eta).value == pytest.approx(dense_log_marginal(data, build_kernel("TC", eta, 3)), abs=1e-8)

    def test_weak_consistency(self):
        rng = np.random.default_rng(8)
        c0, lam0 = 1.0, 0.8
        wins = []
        for _ in range(50):
            g = sample_impulse_response("TC", (c0, lam0), 20, seed=rng.integers(2 ** 32))
            data = simulate_fir(g, rng.standard_normal(100), 0.1, rng.integers(2 ** 32))
            true = log_marginal(data, "TC", (c0, lam0)).value
            perturbed = log_marginal(data, "TC", (2.0 * c0, 0.99 * lam0 + 0.01)).value
            wins.append(true - perturbed)
        assert np.mean(wins) >= 0.0


class TestKernelSlice:
    @pytest.mark.parametrize("family", ["DI", "TC", "SS"])
    def test_agrees_with_direct_forms(self, family, small_data):
        lam = 0.75
        c_values = np.array([0.01, 0.3, 2.0, 50.0])
        piece = KernelSlice(small_data, family, lam)
        lml = piece.log_marginal(c_values)
        var = piece.variances(c_values)
        for k, c in enumerate(c_values):
            assert lml[k] == pytest.approx(log_marginal(small_data, family, (c, lam)).value, abs=1e-8)
            model = posterior_at(small_data, family, (c, lam))
            np.testing.assert_allclose(var[k], np.diag(model.sigma), rtol=1e-8, atol=1e-14)
            np.testing.assert_allclose(piece.estimate(c), model.g_hat, rtol=1e-8, atol=1e-12)

    def test_posterior(self, small_data):
        piece = KernelSlice(small_data, "TC", 0.6)
        model = piece.posterior(1.5)
        reference = posterior_at(small_data, "TC", (1.5, 0.6))
        np.testing.assert_allclose(model.sigma, reference.sigma, rtol=1e-8, atol=1e-14)
        assert model.eta == Hyperparameters(c=1.5, lam=0.6)

    def test_tables(self, small_data):
        c_values, lam_values = np.array([0.1, 1.0]), np.array([0.3, 0.9])
        lml = log_marginal_table(small_data, "TC", c_values, lam_values)
        var = posterior_variance_table(small_data, "TC", c_values, lam_values)
        assert lml.shape == (2, 2)
        assert var.shape == (2, 2, small_data.n_g)
        assert lml[1, 0] == pytest.approx(log_marginal(small_data, "TC", (1.0, 0.3)).value, abs=1e-8)


class TestEstimateHyperparameters:
    def test_single_point_grid(self, small_data):
        spec = GridSpec(c_min=0.5, c_max=0.5, c_count=1, lam_min=0.4, lam_max=0.4, lam_count=1)
        assert estimate_hyperparameters(small_data, "TC", spec) == Hyperparameters(c=0.5, lam=0.4)

    def test_tie_break(self):
        table = np.array([[1.0, 3.0], [3.0, 3.0]])
        assert grid_argmax(table) == (0, 1)
        assert grid_argmax(np.array([[np.nan, 0.0]])) == (0, 1)

    def test_matches_pointwise_scan(self):
        rng = np.random.default_rng(9)
        g = 0.7 ** np.arange(20)
        data = simulate_fir(g, rng.standard_normal(200), 1e-2, 10)
        spec = GridSpec(c_count=8, lam_count=8)
        eta = estimate_hyperparameters(data, "TC", spec)

        best, best_eta = -np.inf, None
        for c in spec.c_values():
            for lam in spec.lam_values():
                value = log_marginal(data, "TC", (c, lam)).value
                if value > best:
                    best, best_eta = value, Hyperparameters(c=c, lam=lam)
        assert eta.c == pytest.approx(best_eta.c)
        assert eta.lam == pytest.approx(best_eta.lam)
        assert 0.4 <= eta.lam <= 0.95

    def test_within_one_cell_of_dense_profile_maximizer(self):
        rng = np.random.default_rng(12)
        g = sample_impulse_response("TC", (1.0, 0.8), 20, seed=3)
        data = simulate_fir(g, rng.standard_normal(200), 1e-3, 13)
        spec = GridSpec(c_min=1e-2, c_max=1e2, c_count=20, lam_min=0.05, lam_max=0.95, lam_count=10)
        eta = estimate_hyperparameters(data, "TC", spec)

        # 10 倍分辨率的稠密扫描，对 c 取剖面最大
        dense_c = np.geomspace(1e-2, 1e2, 200)
        dense_lam = np.linspace(0.05, 0.95, 100)
        profile = log_marginal_table(data, "TC", dense_c, dense_lam).max(axis=0)
        lam_star = dense_lam[int(np.argmax(profile))]

        step = spec.lam_values()[1] - spec.lam_values()[0]
        assert abs(eta.lam - lam_star) <= step + 1e-12
