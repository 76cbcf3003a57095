"""State-space model interface consumed by sequential assimilation."""

import hashlib
import json
from abc import ABC, abstractmethod
from typing import Any, Callable, Dict, Tuple

import numpy as np

from ..transport.density import finite_difference_gradient


def _finite_difference_blocks(
    fn: Callable[..., np.ndarray], *blocks: np.ndarray
) -> Tuple[np.ndarray, ...]:
    """Central-difference gradients of fn(*blocks) with respect to every block."""
    sizes = [b.shape[1] for b in blocks]
    splits = np.cumsum(sizes)[:-1]
    joint = np.concatenate(blocks, axis=1)

    def joint_fn(x: np.ndarray) -> np.ndarray:
        return fn(*np.split(x, splits, axis=1))

    grads = finite_difference_gradient(joint_fn, joint)
    return tuple(np.split(grads, splits, axis=1))


class StateSpaceModel(ABC):
    """Abstract base class for models Z_0 -> Z_1 -> ... observed through Y_k.

    All densities act on batches: states are (m, n) arrays, static parameters
    (m, p) arrays (p may be 0) and a single observation is a (d,) vector.
    Gradients default to central differences; subclasses override them with
    analytic versions where they can.
    """

    @property
    @abstractmethod
    def state_dim(self) -> int:
        """Dimension n of each state."""
        pass

    @property
    @abstractmethod
    def obs_dim(self) -> int:
        """Dimension d of each observation."""
        pass

    @property
    def param_dim(self) -> int:
        """Dimension p of the static parameters."""
        return 0

    @abstractmethod
    def log_initial(self, z0: np.ndarray, theta: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def log_transition(
        self, z_next: np.ndarray, z: np.ndarray, theta: np.ndarray
    ) -> np.ndarray:
        pass

    @abstractmethod
    def log_likelihood(
        self, y: np.ndarray, z: np.ndarray, theta: np.ndarray
    ) -> np.ndarray:
        pass

    def log_param_prior(self, theta: np.ndarray) -> np.ndarray:
        return np.zeros(theta.shape[0])

    def grad_log_param_prior(self, theta: np.ndarray) -> np.ndarray:
        return _finite_difference_blocks(self.log_param_prior, theta)[0]

    def grad_log_initial(
        self, z0: np.ndarray, theta: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        g_z, g_theta = _finite_difference_blocks(self.log_initial, z0, theta)
        return g_z, g_theta

    def grad_log_transition(
        self, z_next: np.ndarray, z: np.ndarray, theta: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        g_next, g_z, g_theta = _finite_difference_blocks(
            self.log_transition, z_next, z, theta
        )
        return g_next, g_z, g_theta

    def grad_log_likelihood(
        self, y: np.ndarray, z: np.ndarray, theta: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        g_z, g_theta = _finite_difference_blocks(
            lambda zz, tt: self.log_likelihood(y, zz, tt), z, theta
        )
        return g_z, g_theta

    # Ancestral sampling hooks used by simulation and posterior predictive draws.

    def sample_param_prior(self, rng: np.random.Generator, m: int) -> np.ndarray:
        if self.param_dim:
            raise NotImplementedError(f"{type(self).__name__} cannot sample parameters")
        return np.zeros((m, 0))

    def sample_initial(self, rng: np.random.Generator, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} cannot sample initial states")

    def sample_transition(
        self, rng: np.random.Generator, z: np.ndarray, theta: np.ndarray
    ) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} cannot sample transitions")

    def sample_observation(
        self, rng: np.random.Generator, z: np.ndarray, theta: np.ndarray
    ) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} cannot sample observations")

    def describe(self) -> Dict[str, Any]:
        """JSON-serializable description used for the model hash."""
        return {"kind": type(self).__name__}

    def model_hash(self) -> str:
        payload = json.dumps(self.describe(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()


class FixedPointModel(StateSpaceModel):
    """Model whose static parameter is the initial state of a parameter-free model.

    Theta := Z_0 with prior pi(z_0) l(y_0 | z_0); the chain starts at Z_1 with
    initial density pi(z_1 | z_0) and observations y_1, y_2, ...
    """

    def __init__(self, base: StateSpaceModel, y0: np.ndarray) -> None:
        if base.param_dim:
            raise ValueError("fixed-point smoothing needs a model without static parameters")
        self.base = base
        self.y0 = np.asarray(y0, dtype=float).reshape(base.obs_dim)

    @property
    def state_dim(self) -> int:
        return self.base.state_dim

    @property
    def obs_dim(self) -> int:
        return self.base.obs_dim

    @property
    def param_dim(self) -> int:
        return self.base.state_dim

    def _none(self, m: int) -> np.ndarray:
        return np.zeros((m, 0))

    def log_param_prior(self, theta: np.ndarray) -> np.ndarray:
        none = self._none(theta.shape[0])
        return self.base.log_initial(theta, none) + self.base.log_likelihood(
            self.y0, theta, none
        )

    def grad_log_param_prior(self, theta: np.ndarray) -> np.ndarray:
        none = self._none(theta.shape[0])
        g_init, _ = self.base.grad_log_initial(theta, none)
        g_lik, _ = self.base.grad_log_likelihood(self.y0, theta, none)
        return g_init + g_lik

    def log_initial(self, z0: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return self.base.log_transition(z0, theta, self._none(z0.shape[0]))

    def grad_log_initial(
        self, z0: np.ndarray, theta: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        g_next, g_prev, _ = self.base.grad_log_transition(
            z0, theta, self._none(z0.shape[0])
        )
        return g_next, g_prev

    def log_transition(
        self, z_next: np.ndarray, z: np.ndarray, theta: np.ndarray
    ) -> np.ndarray:
        return self.base.log_transition(z_next, z, self._none(z.shape[0]))

    def grad_log_transition(
        self, z_next: np.ndarray, z: np.ndarray, theta: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        g_next, g_z, _ = self.base.grad_log_transition(z_next, z, self._none(z.shape[0]))
        return g_next, g_z, np.zeros_like(theta)

    def log_likelihood(
        self, y: np.ndarray, z: np.ndarray, theta: np.ndarray
    ) -> np.ndarray:
        return self.base.log_likelihood(y, z, self._none(z.shape[0]))

    def grad_log_likelihood(
        self, y: np.ndarray, z: np.ndarray, theta: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        g_z, _ = self.base.grad_log_likelihood(y, z, self._none(z.shape[0]))
        return g_z, np.zeros_like(theta)

    def describe(self) -> Dict[str, Any]:
        return {
            "kind": "fixed-point",
            "base": self.base.describe(),
            "y0": [repr(float(v)) for v in self.y0],
        }
