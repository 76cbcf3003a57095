"""Stochastic volatility model with optional static parameters (mu, phi)."""

from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.special import expit

from ..errors import DomainError
from ..graphs.graph import UndirectedGraph
from ..sequential.model import StateSpaceModel

LOG_2PI = np.log(2.0 * np.pi)
TRANSITION_VARIANCE = 1.0 / 16.0
PHI_STAR_PRIOR_MEAN = 3.0


def sv_phi(phi_star: np.ndarray) -> np.ndarray:
    """Map the unconstrained parameter to the autocorrelation in (-1, 1)."""
    return 2.0 * expit(phi_star) - 1.0


def sv_log_param_prior(mu: np.ndarray, phi_star: np.ndarray) -> np.ndarray:
    """mu ~ N(0, 1) and phi* ~ N(3, 1)."""
    return -LOG_2PI - 0.5 * mu**2 - 0.5 * (phi_star - PHI_STAR_PRIOR_MEAN) ** 2


def sv_log_initial(
    z0: np.ndarray,
    mu: np.ndarray,
    phi: np.ndarray,
    precision: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Z_0 ~ N(mu, 1 / (1 - phi^2)).

    Args:
        precision: 1 - phi^2 when the caller has it without cancellation.

    Raises:
        DomainError: If precision is not given and some |phi| >= 1.
    """
    if precision is None:
        phi = np.asarray(phi, dtype=float)
        if np.any(np.abs(phi) >= 1.0):
            raise DomainError("the stationary initial density needs |phi| < 1")
        precision = 1.0 - phi**2
    return 0.5 * (np.log(precision) - LOG_2PI) - 0.5 * precision * (z0 - mu) ** 2


def sv_log_transition(
    z_next: np.ndarray, z: np.ndarray, mu: np.ndarray, phi: np.ndarray
) -> np.ndarray:
    r = z_next - mu - phi * (z - mu)
    return -0.5 * (LOG_2PI + np.log(TRANSITION_VARIANCE)) - 0.5 * r**2 / TRANSITION_VARIANCE


def sv_log_likelihood(y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """log N(y; 0, exp(z))."""
    return -0.5 * (LOG_2PI + z + y**2 * np.exp(-z))


class StochasticVolatilityModel(StateSpaceModel):
    """Scalar log-volatility Z_k observed through Y_k = xi_k exp(Z_k / 2).

    With ``mu`` and ``phi`` fixed the model has no static parameters;
    otherwise theta = (mu, phi*) with phi = 2 expit(phi*) - 1.
    """

    def __init__(self, mu: Optional[float] = None, phi: Optional[float] = None) -> None:
        if (mu is None) != (phi is None):
            raise ValueError("fix both mu and phi or neither")
        if phi is not None and abs(phi) >= 1.0:
            raise DomainError("phi must lie in (-1, 1)")
        self.mu = mu
        self.phi = phi

    def __repr__(self) -> str:
        return f"StochasticVolatilityModel(mu={self.mu}, phi={self.phi})"

    @property
    def state_dim(self) -> int:
        return 1

    @property
    def obs_dim(self) -> int:
        return 1

    @property
    def param_dim(self) -> int:
        return 0 if self.mu is not None else 2

    def _unpack(
        self, theta: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """mu, phi, d phi / d phi* and 1 - phi^2 as (m,) arrays."""
        if self.mu is not None:
            m = theta.shape[0]
            phi = np.full(m, float(self.phi))
            return np.full(m, float(self.mu)), phi, np.zeros(m), 1.0 - phi**2
        s = expit(theta[:, 1])
        # 1 - phi^2 = 4 s (1 - s) without cancellation near |phi| = 1.
        return theta[:, 0], 2.0 * s - 1.0, 2.0 * s * (1.0 - s), 4.0 * s * expit(-theta[:, 1])

    def log_param_prior(self, theta: np.ndarray) -> np.ndarray:
        if self.mu is not None:
            return np.zeros(theta.shape[0])
        return sv_log_param_prior(theta[:, 0], theta[:, 1])

    def grad_log_param_prior(self, theta: np.ndarray) -> np.ndarray:
        if self.mu is not None:
            return np.zeros_like(theta)
        return np.stack([-theta[:, 0], PHI_STAR_PRIOR_MEAN - theta[:, 1]], axis=1)

    def log_initial(self, z0: np.ndarray, theta: np.ndarray) -> np.ndarray:
        mu, phi, _, precision = self._unpack(theta)
        return sv_log_initial(z0[:, 0], mu, phi, precision)

    def grad_log_initial(
        self, z0: np.ndarray, theta: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        mu, phi, _, precision = self._unpack(theta)
        r = z0[:, 0] - mu
        g_z = (-precision * r)[:, None]
        if self.mu is not None:
            return g_z, np.zeros_like(theta)
        # d log(1 - phi^2) / d phi* = 1 - 2 s = -phi.
        g_phi = -0.5 * phi * (1.0 - precision * r**2)
        return g_z, np.stack([precision * r, g_phi], axis=1)

    def log_transition(
        self, z_next: np.ndarray, z: np.ndarray, theta: np.ndarray
    ) -> np.ndarray:
        mu, phi, _, _ = self._unpack(theta)
        return sv_log_transition(z_next[:, 0], z[:, 0], mu, phi)

    def grad_log_transition(
        self, z_next: np.ndarray, z: np.ndarray, theta: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        mu, phi, dphi, _ = self._unpack(theta)
        r = z_next[:, 0] - mu - phi * (z[:, 0] - mu)
        score = -r / TRANSITION_VARIANCE
        g_next = score[:, None]
        g_z = (-score * phi)[:, None]
        if self.mu is not None:
            return g_next, g_z, np.zeros_like(theta)
        g_mu = -score * (1.0 - phi)
        g_phi = -score * (z[:, 0] - mu) * dphi
        return g_next, g_z, np.stack([g_mu, g_phi], axis=1)

    def log_likelihood(
        self, y: np.ndarray, z: np.ndarray, theta: np.ndarray
    ) -> np.ndarray:
        return sv_log_likelihood(float(np.asarray(y).reshape(-1)[0]), z[:, 0])

    def grad_log_likelihood(
        self, y: np.ndarray, z: np.ndarray, theta: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        y0 = float(np.asarray(y).reshape(-1)[0])
        g_z = 0.5 * (y0**2 * np.exp(-z[:, 0]) - 1.0)
        return g_z[:, None], np.zeros_like(theta)

    def sample_param_prior(self, rng: np.random.Generator, m: int) -> np.ndarray:
        if self.mu is not None:
            return np.zeros((m, 0))
        return np.stack(
            [rng.standard_normal(m), PHI_STAR_PRIOR_MEAN + rng.standard_normal(m)], axis=1
        )

    def sample_initial(self, rng: np.random.Generator, theta: np.ndarray) -> np.ndarray:
        mu, _, _, precision = self._unpack(theta)
        return (mu + rng.standard_normal(mu.shape[0]) / np.sqrt(precision))[:, None]

    def sample_transition(
        self, rng: np.random.Generator, z: np.ndarray, theta: np.ndarray
    ) -> np.ndarray:
        mu, phi, _, _ = self._unpack(theta)
        noise = np.sqrt(TRANSITION_VARIANCE) * rng.standard_normal(z.shape[0])
        return (mu + phi * (z[:, 0] - mu) + noise)[:, None]

    def sample_observation(
        self, rng: np.random.Generator, z: np.ndarray, theta: np.ndarray
    ) -> np.ndarray:
        return (rng.standard_normal(z.shape[0]) * np.exp(0.5 * z[:, 0]))[:, None]

    def describe(self) -> Dict[str, Any]:
        params = {} if self.mu is None else {"mu": repr(self.mu), "phi": repr(self.phi)}
        return {"kind": "stochastic-volatility", "params": params}


def sv_markov_graph(n_states: int, with_params: bool = True) -> UndirectedGraph:
    """Minimal I-map of the joint of (mu, phi, Z_0..Z_{N-1}) given observations.

    Vertices 1 and 2 are mu and phi when ``with_params`` is set, followed by
    the states in time order; the states form a chain and both parameters are
    adjacent to every other vertex.
    """
    offset = 2 if with_params else 0
    edges = [(offset + k, offset + k + 1) for k in range(1, n_states)]
    if with_params:
        edges.append((1, 2))
        edges.extend((p, offset + k) for p in (1, 2) for k in range(1, n_states + 1))
    return UndirectedGraph.from_edges(offset + n_states, edges)
