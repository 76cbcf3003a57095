"""Step maps of sequential assimilation and the targets they are fitted to.

A step map acts on (x_theta, x_i, x_{i+1}) laid out as coordinates
[0, p), [p, p + n) and [p + n, p + 2n). Its components are ordered
(x_theta, x_{i+1}, x_i): the parameter block reads only x_theta, the x_{i+1}
block reads x_theta and x_{i+1}, and the x_i block reads everything.
"""

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, List, Optional, Tuple

import numpy as np

from ..config.settings import TemplateSpec
from ..errors import SequencingError
from ..transport.base import TransportMap
from ..transport.composition import AffineMap
from ..transport.density import LogDensity
from ..transport.maps import MonotoneTriangularMap
from ..variational.fitting import FitReport
from .model import StateSpaceModel

if TYPE_CHECKING:
    from .smoother import SmootherState

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepLayout:
    """Coordinate layout of a step map with p parameters and n states."""

    param_dim: int
    state_dim: int

    @property
    def dim(self) -> int:
        return self.param_dim + 2 * self.state_dim

    @property
    def theta(self) -> slice:
        return slice(0, self.param_dim)

    @property
    def current(self) -> slice:
        return slice(self.param_dim, self.param_dim + self.state_dim)

    @property
    def following(self) -> slice:
        return slice(self.param_dim + self.state_dim, self.dim)

    def coords(self, block: slice) -> List[int]:
        return list(range(block.start, block.stop))

    @property
    def perm(self) -> List[int]:
        return (
            self.coords(self.theta) + self.coords(self.following) + self.coords(self.current)
        )

    def active(self) -> Dict[int, List[int]]:
        """Off-diagonal inputs of the parameter and x_{i+1} components."""
        theta = self.coords(self.theta)
        following = self.coords(self.following)
        active = {c: theta[:j] for j, c in enumerate(theta)}
        active.update({c: theta + following[:j] for j, c in enumerate(following)})
        return active

    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return x[:, self.theta], x[:, self.current], x[:, self.following]

    def join(
        self, theta: np.ndarray, current: np.ndarray, following: np.ndarray
    ) -> np.ndarray:
        return np.concatenate([theta, current, following], axis=1)


def step_template(layout: StepLayout, spec: Optional[TemplateSpec] = None) -> MonotoneTriangularMap:
    """Identity-initialized step map with the block-triangular sparsity."""
    spec = spec or TemplateSpec()
    return MonotoneTriangularMap.identity(
        layout.dim,
        spec.degree,
        perm=layout.perm,
        active=layout.active(),
        rectifier=spec.rectifier,
        a_family=spec.a_basis,
        b_family=spec.b_basis,
    )


@dataclass
class StepMap:
    """A fitted (or closed-form) step map and its per-step diagnostics.

    Attributes:
        index: Step index i.
        layout: Coordinate layout.
        transport: Map on dimension p + 2n.
        log_c: Log normalizing constant of the step target.
        diagnostic: Variance diagnostic (zero for closed-form steps).
        converged: Whether the fit met its gradient tolerance.
        report: Fit report; None for closed-form steps.
    """

    index: int
    layout: StepLayout
    transport: TransportMap
    log_c: float
    diagnostic: float = 0.0
    converged: bool = True
    report: Optional[FitReport] = field(default=None, repr=False)

    def _at(self, x_theta: np.ndarray, x_following: np.ndarray) -> np.ndarray:
        m = x_following.shape[0]
        return self.layout.join(
            x_theta, np.zeros((m, self.layout.state_dim)), x_following
        )

    def filter_block(
        self, x_theta: np.ndarray, x_following: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        """(M^Theta(x_theta), M^1(x_theta, x_{i+1}))."""
        out = self.transport.evaluate(self._at(x_theta, x_following))
        return out[:, self.layout.theta], out[:, self.layout.following]

    def filter_block_jacobian(
        self, x_theta: np.ndarray, x_following: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        """d M^1 / d x_theta (m, n, p) and d M^1 / d x_{i+1} (m, n, n)."""
        jac = self.transport.jacobian(self._at(x_theta, x_following))
        rows = jac[:, self.layout.following, :]
        return rows[:, :, self.layout.theta], rows[:, :, self.layout.following]

    def param_map(self) -> TransportMap:
        """M^Theta as a map on the p parameter coordinates."""
        p = self.layout.param_dim
        if isinstance(self.transport, MonotoneTriangularMap):
            return self.transport.restrict(range(p))
        if isinstance(self.transport, AffineMap):
            return AffineMap(self.transport.matrix[:p, :p], self.transport.offset[:p])
        raise TypeError(f"cannot extract a parameter block from {self.transport!r}")

    def affine_filter(self) -> Tuple[np.ndarray, np.ndarray]:
        """(c, C) of an affine M^1(x) = c + C x."""
        if not isinstance(self.transport, AffineMap):
            raise TypeError("closed-form recursion needs affine step maps")
        block = self.layout.following
        return self.transport.offset[block].copy(), self.transport.matrix[block, block].copy()


def _standard_normal_terms(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return -0.5 * np.sum(x * x, axis=1) - 0.5 * x.shape[1] * np.log(2.0 * np.pi), -x


def initial_target(
    model: StateSpaceModel, y0: np.ndarray, y1: np.ndarray, layout: StepLayout
) -> LogDensity:
    """log of pi(theta, z_0, z_1) l(y_0 | z_0, theta) l(y_1 | z_1, theta)."""

    def fn(x: np.ndarray) -> np.ndarray:
        theta, z0, z1 = layout.split(x)
        return (
            model.log_param_prior(theta)
            + model.log_initial(z0, theta)
            + model.log_transition(z1, z0, theta)
            + model.log_likelihood(y0, z0, theta)
            + model.log_likelihood(y1, z1, theta)
        )

    def grad(x: np.ndarray) -> np.ndarray:
        theta, z0, z1 = layout.split(x)
        g_prior = model.grad_log_param_prior(theta)
        gi_z, gi_t = model.grad_log_initial(z0, theta)
        gt_next, gt_z, gt_t = model.grad_log_transition(z1, z0, theta)
        gl0_z, gl0_t = model.grad_log_likelihood(y0, z0, theta)
        gl1_z, gl1_t = model.grad_log_likelihood(y1, z1, theta)
        return layout.join(
            g_prior + gi_t + gt_t + gl0_t + gl1_t,
            gi_z + gt_z + gl0_z,
            gt_next + gl1_z,
        )

    return LogDensity(layout.dim, fn, grad, name="step-0")


def recursive_target(
    model: StateSpaceModel,
    y_next: np.ndarray,
    previous: StepMap,
    param_map: Optional[TransportMap],
    layout: StepLayout,
    index: int,
) -> LogDensity:
    """eta(z_theta, z_i) times the transition and likelihood at transported inputs.

    The previous filtering block M^1_{i-1}(z_theta, z_i) stands in for z_i and
    the running parameter map for theta.
    """
    p = layout.param_dim

    def parameters(z_theta: np.ndarray) -> np.ndarray:
        if p == 0 or param_map is None:
            return z_theta
        return param_map.evaluate(z_theta)

    def fn(x: np.ndarray) -> np.ndarray:
        z_theta, z_i, z_next = layout.split(x)
        theta = parameters(z_theta)
        _, state = previous.filter_block(z_theta, z_i)
        reference, _ = _standard_normal_terms(np.concatenate([z_theta, z_i], axis=1))
        return (
            reference
            + model.log_transition(z_next, state, theta)
            + model.log_likelihood(y_next, z_next, theta)
        )

    def grad(x: np.ndarray) -> np.ndarray:
        z_theta, z_i, z_next = layout.split(x)
        theta = parameters(z_theta)
        _, state = previous.filter_block(z_theta, z_i)
        d_theta, d_state = previous.filter_block_jacobian(z_theta, z_i)
        gt_next, gt_z, gt_t = model.grad_log_transition(z_next, state, theta)
        gl_z, gl_t = model.grad_log_likelihood(y_next, z_next, theta)

        g_theta = -z_theta + np.einsum("mnp,mn->mp", d_theta, gt_z)
        if p and param_map is not None:
            param_jac = param_map.jacobian(z_theta).reshape(-1, p, p)
            g_theta = g_theta + np.einsum("mqp,mq->mp", param_jac, gt_t + gl_t)
        elif p:
            g_theta = g_theta + gt_t + gl_t
        g_i = -z_i + np.einsum("mnk,mn->mk", d_state, gt_z)
        return layout.join(g_theta, g_i, gt_next + gl_z)

    return LogDensity(layout.dim, fn, grad, name=f"step-{index}")


def step_target(
    state: "SmootherState",
    model: StateSpaceModel,
    observations: np.ndarray,
    i: int,
) -> LogDensity:
    """Unnormalized target of step i.

    Step 0 uses y_0 and y_1; step i >= 1 uses y_{i+1} and the maps of step
    i - 1.

    Raises:
        SequencingError: If step i - 1 has not been computed.
    """
    layout = StepLayout(model.param_dim, model.state_dim)
    Y = np.asarray(observations, dtype=float).reshape(-1, model.obs_dim)
    if i + 1 >= Y.shape[0]:
        raise SequencingError(f"step {i} needs observation {i + 1}, have {Y.shape[0]}")
    if i == 0:
        return initial_target(model, Y[0], Y[1], layout)
    if len(state.steps) < i:
        raise SequencingError(f"step {i} requested but only {len(state.steps)} steps exist")
    param_map = state.param_maps[i - 1] if model.param_dim else None
    return recursive_target(model, Y[i + 1], state.steps[i - 1], param_map, layout, i)
