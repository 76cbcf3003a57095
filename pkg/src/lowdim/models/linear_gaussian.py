"""Linear-Gaussian state-space models and their Kalman/RTS oracle."""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Tuple

import numpy as np
import scipy.linalg

from ..errors import MatrixError
from ..sequential.model import StateSpaceModel

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)


def _as_matrix(value: Any, rows: int, cols: int, name: str) -> np.ndarray:
    matrix = np.atleast_2d(np.asarray(value, dtype=float))
    if matrix.shape != (rows, cols):
        raise ValueError(f"{name} has shape {matrix.shape}, expected {(rows, cols)}")
    return matrix


def _cholesky(matrix: np.ndarray, name: str) -> Tuple[np.ndarray, bool]:
    try:
        return scipy.linalg.cho_factor(matrix, lower=True)
    except np.linalg.LinAlgError as exc:
        raise MatrixError(f"{name} is not symmetric positive definite") from exc


class _GaussianTerm:
    """log N(x; mean, cov) on batches with a cached Cholesky factor."""

    def __init__(self, cov: np.ndarray, name: str) -> None:
        self.factor = _cholesky(cov, name)
        self.log_norm = -0.5 * cov.shape[0] * LOG_2PI - np.sum(
            np.log(np.diag(self.factor[0]))
        )

    def value_and_score(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """log-density of residuals r (m, k) and its gradient -cov^{-1} r."""
        solved = scipy.linalg.cho_solve(self.factor, r.T).T
        return self.log_norm - 0.5 * np.sum(r * solved, axis=1), -solved


class LinearGaussianSSM(StateSpaceModel):
    """Z_{k+1} = F Z_k + eps_k, Y_k = H Z_k + xi_k, Z_0 ~ N(mu0, Gamma0).

    Noise covariances Q (state) and R (observation) and Gamma0 must be
    symmetric positive definite.
    """

    def __init__(
        self,
        F: np.ndarray,
        Q: np.ndarray,
        H: np.ndarray,
        R: np.ndarray,
        mu0: np.ndarray,
        Gamma0: np.ndarray,
    ) -> None:
        F = np.atleast_2d(np.asarray(F, dtype=float))
        n = F.shape[0]
        H = np.atleast_2d(np.asarray(H, dtype=float))
        d = H.shape[0]
        self.F = _as_matrix(F, n, n, "F")
        self.Q = _as_matrix(Q, n, n, "Q")
        self.H = _as_matrix(H, d, n, "H")
        self.R = _as_matrix(R, d, d, "R")
        self.mu0 = np.asarray(mu0, dtype=float).reshape(n)
        self.Gamma0 = _as_matrix(Gamma0, n, n, "Gamma0")
        self._transition = _GaussianTerm(self.Q, "Q")
        self._observation = _GaussianTerm(self.R, "R")
        self._initial = _GaussianTerm(self.Gamma0, "Gamma0")

    def __repr__(self) -> str:
        return f"LinearGaussianSSM(state_dim={self.state_dim}, obs_dim={self.obs_dim})"

    @classmethod
    def from_params(cls, params: Mapping[str, Any]) -> "LinearGaussianSSM":
        return cls(
            params["F"], params["Q"], params["H"], params["R"], params["mu0"], params["Gamma0"]
        )

    @classmethod
    def random_stable(
        cls, n: int, d: int, seed: int, spectral_radius: float = 0.9
    ) -> "LinearGaussianSSM":
        """Random system whose transition matrix has the given spectral radius."""
        rng = np.random.default_rng(seed)
        F = rng.standard_normal((n, n))
        F *= spectral_radius / max(np.max(np.abs(np.linalg.eigvals(F))), 1e-12)
        a = rng.standard_normal((n, n))
        Q = 0.1 * (a @ a.T) + 0.1 * np.eye(n)
        H = rng.standard_normal((d, n))
        b = rng.standard_normal((d, d))
        R = 0.1 * (b @ b.T) + 0.2 * np.eye(d)
        mu0 = rng.standard_normal(n)
        return cls(F, Q, H, R, mu0, np.eye(n))

    @property
    def state_dim(self) -> int:
        return self.F.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.H.shape[0]

    def log_initial(self, z0: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return self._initial.value_and_score(z0 - self.mu0)[0]

    def grad_log_initial(
        self, z0: np.ndarray, theta: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        return self._initial.value_and_score(z0 - self.mu0)[1], np.zeros_like(theta)

    def log_transition(
        self, z_next: np.ndarray, z: np.ndarray, theta: np.ndarray
    ) -> np.ndarray:
        return self._transition.value_and_score(z_next - z @ self.F.T)[0]

    def grad_log_transition(
        self, z_next: np.ndarray, z: np.ndarray, theta: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        score = self._transition.value_and_score(z_next - z @ self.F.T)[1]
        return score, -score @ self.F, np.zeros_like(theta)

    def log_likelihood(
        self, y: np.ndarray, z: np.ndarray, theta: np.ndarray
    ) -> np.ndarray:
        return self._observation.value_and_score(np.asarray(y) - z @ self.H.T)[0]

    def grad_log_likelihood(
        self, y: np.ndarray, z: np.ndarray, theta: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        score = self._observation.value_and_score(np.asarray(y) - z @ self.H.T)[1]
        return -score @ self.H, np.zeros_like(theta)

    def sample_initial(self, rng: np.random.Generator, theta: np.ndarray) -> np.ndarray:
        return rng.multivariate_normal(self.mu0, self.Gamma0, size=theta.shape[0])

    def sample_transition(
        self, rng: np.random.Generator, z: np.ndarray, theta: np.ndarray
    ) -> np.ndarray:
        noise = rng.multivariate_normal(np.zeros(self.state_dim), self.Q, size=z.shape[0])
        return z @ self.F.T + noise

    def sample_observation(
        self, rng: np.random.Generator, z: np.ndarray, theta: np.ndarray
    ) -> np.ndarray:
        noise = rng.multivariate_normal(np.zeros(self.obs_dim), self.R, size=z.shape[0])
        return z @ self.H.T + noise

    def describe(self) -> Dict[str, Any]:
        return {
            "kind": "linear-gaussian",
            "params": {
                name: np.asarray(getattr(self, name)).tolist()
                for name in ("F", "Q", "H", "R", "mu0", "Gamma0")
            },
        }


@dataclass
class KalmanResult:
    """Moments produced by the Kalman filter and RTS smoother.

    Attributes:
        predicted_means: E[Z_k | y_{0:k-1}], shape (N, n).
        predicted_covs: Cov[Z_k | y_{0:k-1}], shape (N, n, n).
        filter_means: E[Z_k | y_{0:k}].
        filter_covs: Cov[Z_k | y_{0:k}].
        smooth_means: E[Z_k | y_{0:N-1}].
        smooth_covs: Cov[Z_k | y_{0:N-1}].
        gains: Smoother gains G_k = P_k F^T P_{k+1|k}^{-1}, shape (N-1, n, n).
        lag_one_covs: Cov[Z_k, Z_{k+1} | y_{0:N-1}], shape (N-1, n, n).
        log_likelihood: Prediction-error decomposition of log p(y_{0:N-1}).
        step_log_likelihoods: log p(y_k | y_{0:k-1}) per time.
    """

    predicted_means: np.ndarray
    predicted_covs: np.ndarray
    filter_means: np.ndarray
    filter_covs: np.ndarray
    smooth_means: np.ndarray
    smooth_covs: np.ndarray
    gains: np.ndarray
    lag_one_covs: np.ndarray
    log_likelihood: float
    step_log_likelihoods: np.ndarray

    def lag_one_joint(self, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """Mean and covariance of (Z_k, Z_{k+1}) given y_{0:k+1}."""
        G = self.gains[k]
        innovation = self.filter_means[k + 1] - self.predicted_means[k + 1]
        mean_k = self.filter_means[k] + G @ innovation
        cov_k = (
            self.filter_covs[k]
            + G @ (self.filter_covs[k + 1] - self.predicted_covs[k + 1]) @ G.T
        )
        cross = G @ self.filter_covs[k + 1]
        mean = np.concatenate([mean_k, self.filter_means[k + 1]])
        cov = np.block([[cov_k, cross], [cross.T, self.filter_covs[k + 1]]])
        return mean, cov

    def smoothing_joint(self) -> Tuple[np.ndarray, np.ndarray]:
        """Mean and covariance of (Z_0, ..., Z_{N-1}) given all observations."""
        N, n = self.smooth_means.shape
        cov = np.zeros((N * n, N * n))
        for k in range(N):
            cov[k * n : (k + 1) * n, k * n : (k + 1) * n] = self.smooth_covs[k]
        # Cov(Z_j, Z_l) = G_j Cov(Z_{j+1}, Z_l) for j < l.
        for l in range(N):
            for j in range(l - 1, -1, -1):
                block = self.gains[j] @ cov[(j + 1) * n : (j + 2) * n, l * n : (l + 1) * n]
                cov[j * n : (j + 1) * n, l * n : (l + 1) * n] = block
                cov[l * n : (l + 1) * n, j * n : (j + 1) * n] = block.T
        return self.smooth_means.reshape(-1), cov


def kalman_rts_oracle(model: LinearGaussianSSM, observations: np.ndarray) -> KalmanResult:
    """Kalman filter followed by the Rauch-Tung-Striebel smoother.

    Args:
        model: Linear-Gaussian model.
        observations: (N, d) observations y_0..y_{N-1}.

    Returns:
        Filtering, smoothing and lag-one moments and the log-likelihood.

    Raises:
        MatrixError: If an innovation or predicted covariance loses definiteness.
    """
    Y = np.atleast_2d(np.asarray(observations, dtype=float))
    if Y.shape[1] != model.obs_dim:
        Y = Y.reshape(-1, model.obs_dim)
    N, n = Y.shape[0], model.state_dim
    F, Q, H, R = model.F, model.Q, model.H, model.R

    pm = np.zeros((N, n))
    pc = np.zeros((N, n, n))
    fm = np.zeros((N, n))
    fc = np.zeros((N, n, n))
    step_ll = np.zeros(N)

    mean, cov = model.mu0.copy(), model.Gamma0.copy()
    for k in range(N):
        if k > 0:
            mean = F @ fm[k - 1]
            cov = F @ fc[k - 1] @ F.T + Q
        pm[k], pc[k] = mean, cov
        S = H @ cov @ H.T + R
        factor = _cholesky(S, f"innovation covariance at time {k}")
        innovation = Y[k] - H @ mean
        gain = scipy.linalg.cho_solve(factor, H @ cov).T
        fm[k] = mean + gain @ innovation
        joseph = np.eye(n) - gain @ H
        fc[k] = joseph @ cov @ joseph.T + gain @ R @ gain.T
        step_ll[k] = (
            -0.5 * model.obs_dim * LOG_2PI
            - np.sum(np.log(np.diag(factor[0])))
            - 0.5 * innovation @ scipy.linalg.cho_solve(factor, innovation)
        )

    sm, sc = fm.copy(), fc.copy()
    gains = np.zeros((max(N - 1, 0), n, n))
    lag = np.zeros((max(N - 1, 0), n, n))
    for k in range(N - 2, -1, -1):
        factor = _cholesky(pc[k + 1], f"predicted covariance at time {k + 1}")
        G = scipy.linalg.cho_solve(factor, F @ fc[k]).T
        gains[k] = G
        sm[k] = fm[k] + G @ (sm[k + 1] - pm[k + 1])
        sc[k] = fc[k] + G @ (sc[k + 1] - pc[k + 1]) @ G.T
        lag[k] = G @ sc[k + 1]

    total = float(step_ll.sum())
    logger.debug("kalman oracle over %d steps, log-likelihood %.10g", N, total)
    return KalmanResult(pm, pc, fm, fc, sm, sc, gains, lag, total, step_ll)


def steady_state_variance(F: float, Q: float, H: float, R: float) -> float:
    """Fixed point of the scalar filtering-variance Riccati recursion."""
    P = Q
    for _ in range(10000):
        predicted = F * F * P + Q
        updated = predicted - predicted * H * H * predicted / (H * H * predicted + R)
        if abs(updated - P) < 1e-15:
            return updated
        P = updated
    return P
