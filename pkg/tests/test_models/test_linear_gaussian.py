"""Tests for linear-Gaussian models and the Kalman/RTS oracle."""

import numpy as np
import pytest
from scipy import stats

from lowdim.errors import MatrixError
from lowdim.models.linear_gaussian import (
    LinearGaussianSSM,
    kalman_rts_oracle,
    steady_state_variance,
)
from lowdim.models.simulation import simulate
from lowdim.sequential.model import StateSpaceModel


def joint_moments(model, N):
    """Mean and covariance of (Z_0..Z_{N-1}, Y_0..Y_{N-1}) by brute force."""
    n = model.state_dim
    F = model.F
    means = [model.mu0]
    marginals = [model.Gamma0]
    for _ in range(1, N):
        means.append(F @ means[-1])
        marginals.append(F @ marginals[-1] @ F.T + model.Q)
    cov_z = np.zeros((N * n, N * n))
    for j in range(N):
        for k in range(j, N):
            block = np.linalg.matrix_power(F, k - j) @ marginals[j]
            cov_z[k * n : (k + 1) * n, j * n : (j + 1) * n] = block
            cov_z[j * n : (j + 1) * n, k * n : (k + 1) * n] = block.T
    H = np.kron(np.eye(N), model.H)
    R = np.kron(np.eye(N), model.R)
    mean_z = np.concatenate(means)
    return mean_z, H @ mean_z, cov_z, cov_z @ H.T, H @ cov_z @ H.T + R


def posterior(model, Y):
    """Mean and covariance of the stacked states given Y."""
    mean_z, mean_y, cov_z, cov_zy, cov_y = joint_moments(model, Y.shape[0])
    gain = np.linalg.solve(cov_y, cov_zy.T).T
    return mean_z + gain @ (Y.reshape(-1) - mean_y), cov_z - gain @ cov_zy.T


class TestLinearGaussianSSM:
    """Test model densities and construction."""

    def test_densities(self, scalar_model):
        """Test log-densities against scipy."""
        none = np.zeros((2, 0))
        z = np.array([[0.3], [-1.0]])
        z_next = np.array([[0.5], [0.2]])
        assert np.allclose(scalar_model.log_initial(z, none), stats.norm.logpdf(z[:, 0]))
        assert np.allclose(
            scalar_model.log_transition(z_next, z, none),
            stats.norm.logpdf(z_next[:, 0], loc=z[:, 0]),
        )
        assert np.allclose(
            scalar_model.log_likelihood(np.array([1.0]), z, none),
            stats.norm.logpdf(1.0, loc=z[:, 0]),
        )

    def test_analytic_gradients(self, lg_model, rng):
        """Test analytic gradients against finite differences."""
        theta = np.zeros((4, 0))
        z = rng.standard_normal((4, 2))
        z_next = rng.standard_normal((4, 2))
        y = rng.standard_normal(1)
        for analytic, numeric in zip(
            lg_model.grad_log_transition(z_next, z, theta),
            StateSpaceModel.grad_log_transition(lg_model, z_next, z, theta),
        ):
            assert np.allclose(analytic, numeric, atol=1e-6)
        for analytic, numeric in zip(
            lg_model.grad_log_likelihood(y, z, theta),
            StateSpaceModel.grad_log_likelihood(lg_model, y, z, theta),
        ):
            assert np.allclose(analytic, numeric, atol=1e-6)
        assert np.allclose(
            lg_model.grad_log_initial(z, theta)[0],
            StateSpaceModel.grad_log_initial(lg_model, z, theta)[0],
            atol=1e-6,
        )

    def test_random_stable(self):
        """Test generated systems are reproducible with the requested spectral radius."""
        first = LinearGaussianSSM.random_stable(3, 2, seed=9, spectral_radius=0.5)
        second = LinearGaussianSSM.random_stable(3, 2, seed=9, spectral_radius=0.5)
        assert np.max(np.abs(np.linalg.eigvals(first.F))) == pytest.approx(0.5)
        assert first.model_hash() == second.model_hash()
        assert first.H.shape == (2, 3)

    def test_shape_checks(self):
        """Test mismatched matrices raise."""
        with pytest.raises(ValueError):
            LinearGaussianSSM(
                np.eye(2), np.eye(3), np.ones((1, 2)), np.eye(1), np.zeros(2), np.eye(2)
            )

    def test_indefinite_noise(self):
        """Test a non-SPD covariance raises."""
        with pytest.raises(MatrixError):
            LinearGaussianSSM(
                np.eye(1), -np.eye(1), np.eye(1), np.eye(1), np.zeros(1), np.eye(1)
            )

    def test_describe_changes_hash(self, scalar_model):
        """Test the model hash follows the parameters."""
        other = LinearGaussianSSM.from_params(
            {"F": 0.5, "Q": 1.0, "H": 1.0, "R": 1.0, "mu0": 0.0, "Gamma0": 1.0}
        )
        assert scalar_model.describe()["kind"] == "linear-gaussian"
        assert scalar_model.model_hash() != other.model_hash()


class TestKalmanOracle:
    """Test the Kalman filter and RTS smoother against brute-force conditioning."""

    @pytest.fixture
    def data(self, lg_model):
        return lg_model, simulate(lg_model, 6, seed=2)[1]

    def test_log_likelihood(self, data):
        """Test the prediction-error decomposition."""
        model, Y = data
        _, mean_y, _, _, cov_y = joint_moments(model, Y.shape[0])
        expected = stats.multivariate_normal(mean_y, cov_y).logpdf(Y.reshape(-1))
        result = kalman_rts_oracle(model, Y)
        assert result.log_likelihood == pytest.approx(expected, abs=1e-9)
        assert result.step_log_likelihoods.sum() == pytest.approx(result.log_likelihood)

    def test_smoothing_joint(self, data):
        """Test the joint smoothing distribution."""
        model, Y = data
        expected_mean, expected_cov = posterior(model, Y)
        mean, cov = kalman_rts_oracle(model, Y).smoothing_joint()
        assert np.allclose(mean, expected_mean, atol=1e-9)
        assert np.allclose(cov, expected_cov, atol=1e-9)

    def test_filtering_moments(self, data):
        """Test filtering moments are smoothing moments of truncated data."""
        model, Y = data
        result = kalman_rts_oracle(model, Y)
        n = model.state_dim
        for k in range(Y.shape[0]):
            mean, cov = posterior(model, Y[: k + 1])
            assert np.allclose(result.filter_means[k], mean[k * n :], atol=1e-9)
            assert np.allclose(result.filter_covs[k], cov[k * n :, k * n :], atol=1e-9)

    def test_lag_one_joint(self, data):
        """Test the lag-one joint given observations up to k + 1."""
        model, Y = data
        result = kalman_rts_oracle(model, Y)
        n = model.state_dim
        for k in range(Y.shape[0] - 1):
            mean, cov = posterior(model, Y[: k + 2])
            block = slice(k * n, (k + 2) * n)
            lag_mean, lag_cov = result.lag_one_joint(k)
            assert np.allclose(lag_mean, mean[block], atol=1e-9)
            assert np.allclose(lag_cov, cov[block, block], atol=1e-9)

    def test_steady_state_variance(self):
        """Test the scalar Riccati fixed point for unit coefficients."""
        assert steady_state_variance(1.0, 1.0, 1.0, 1.0) == pytest.approx(
            (np.sqrt(5.0) - 1.0) / 2.0, abs=1e-12
        )

    def test_filter_variance_converges(self, scalar_model):
        """Test the filtering variance approaches the steady state."""
        Y = simulate(scalar_model, 40, seed=0)[1]
        result = kalman_rts_oracle(scalar_model, Y)
        assert result.filter_covs[-1, 0, 0] == pytest.approx(
            steady_state_variance(1.0, 1.0, 1.0, 1.0), abs=1e-10
        )
