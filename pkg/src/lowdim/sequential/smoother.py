"""Recursive smoothing, filtering and joint parameter inference with step maps."""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional

import numpy as np
from scipy.special import logsumexp

from ..config.settings import (
    AssimilationSpec,
    OptimizerSpec,
    ReferenceSpec,
    TemplateSpec,
)
from ..errors import (
    AssimilationError,
    ConfigurationError,
    LowdimError,
    SequencingError,
)
from ..models.linear_gaussian import LinearGaussianSSM
from ..transport.base import TransportMap
from ..transport.composition import AffineMap, EmbeddedMap, MapComposition, embed
from ..transport.maps import MonotoneTriangularMap
from ..variational.fitting import compute_map, regress_map
from ..variational.reference import ReferenceRule
from .linear import initial_linear_step, linear_gaussian_step
from .model import FixedPointModel, StateSpaceModel
from .steps import StepLayout, StepMap, step_target, step_template

logger = logging.getLogger(__name__)

StepCallback = Callable[[StepMap], None]


@dataclass
class SmootherState:
    """Everything assimilation has produced so far.

    Attributes:
        state_dim: n.
        param_dim: p.
        steps: Step maps in order; step i covers (z_i, z_{i+1}).
        param_maps: Running parameter maps, one per step when p > 0.
        observations: Observations the steps were fitted to.
        model_hash: Hash of the model description.
        failure_index: Index of a failed step, if any.
    """

    state_dim: int
    param_dim: int = 0
    steps: List[StepMap] = field(default_factory=list)
    param_maps: List[TransportMap] = field(default_factory=list)
    observations: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    model_hash: str = ""
    failure_index: Optional[int] = None

    @property
    def layout(self) -> StepLayout:
        return StepLayout(self.param_dim, self.state_dim)

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    @property
    def n_times(self) -> int:
        """Number of states covered, k + 2 after k + 1 steps."""
        return self.n_steps + 1 if self.steps else 0

    @property
    def log_evidence(self) -> float:
        return float(sum(step.log_c for step in self.steps))

    @property
    def total_dim(self) -> int:
        return self.param_dim + self.n_times * self.state_dim

    def require_steps(self) -> None:
        if not self.steps:
            raise SequencingError("no step maps have been computed")


def _check_observations(model: StateSpaceModel, observations: np.ndarray) -> np.ndarray:
    Y = np.asarray(observations, dtype=float)
    if Y.ndim == 1:
        Y = Y.reshape(-1, model.obs_dim)
    if Y.ndim != 2 or Y.shape[1] != model.obs_dim:
        raise ConfigurationError(
            f"observations must have {model.obs_dim} columns, got shape {Y.shape}"
        )
    if Y.shape[0] < 2:
        raise ConfigurationError("assimilation needs at least two observations")
    if not np.all(np.isfinite(Y)):
        raise ConfigurationError("observations contain missing or non-finite values")
    return Y


def _regress_param_map(
    previous: TransportMap,
    increment: TransportMap,
    template: TemplateSpec,
    samples: int,
    seed: int,
) -> TransportMap:
    """Fit one map to previous o increment on seeded reference points."""
    p = increment.dim
    if (
        isinstance(previous, MonotoneTriangularMap)
        and previous.rectifier.name == template.rectifier
    ):
        start = previous
    else:
        start = MonotoneTriangularMap.identity(
            p,
            template.degree,
            rectifier=template.rectifier,
            a_family=template.a_basis,
            b_family=template.b_basis,
        )
    rule = ReferenceRule.monte_carlo(p, samples, seed)
    return regress_map(lambda x: previous.evaluate(increment.evaluate(x)), start, rule)


def _fit_step(
    model: StateSpaceModel,
    state: SmootherState,
    Y: np.ndarray,
    i: int,
    template: TemplateSpec,
    reference: ReferenceSpec,
    optimizer: OptimizerSpec,
    seed: int,
    threads: int,
) -> StepMap:
    layout = state.layout
    target = step_target(state, model, Y, i)
    rule = ReferenceRule.from_spec(reference, layout.dim, seed + i)
    fitted, report = compute_map(
        target, step_template(layout, template), rule, optimizer, threads
    )
    return StepMap(
        index=i,
        layout=layout,
        transport=fitted,
        log_c=report.log_normalizing_constant,
        diagnostic=report.variance_diagnostic,
        converged=report.converged,
        report=report,
    )


def _closed_form_step(
    model: LinearGaussianSSM, state: SmootherState, Y: np.ndarray, i: int
) -> StepMap:
    if i == 0:
        return initial_linear_step(model, Y[0], Y[1])
    c_prev, C_prev = state.steps[i - 1].affine_filter()
    return linear_gaussian_step(
        model.F, model.Q, model.H, model.R, c_prev, C_prev, Y[i + 1], i
    )


def assimilate(
    model: StateSpaceModel,
    observations: np.ndarray,
    template: Optional[TemplateSpec] = None,
    reference: Optional[ReferenceSpec] = None,
    optimizer: Optional[OptimizerSpec] = None,
    options: Optional[AssimilationSpec] = None,
    seed: int = 0,
    threads: int = 1,
    state: Optional[SmootherState] = None,
    on_step: Optional[StepCallback] = None,
) -> SmootherState:
    """Compute the step maps for every observation not yet assimilated.

    Step i is fitted to its target with a block upper-triangular template;
    with static parameters the running parameter map is regressed after
    each step. Passing an existing ``state`` extends it, leaving earlier step
    maps untouched.

    Args:
        model: State-space model.
        observations: (N, d) observations, N >= 2.
        template: Step-map template settings.
        reference: Reference rule settings.
        optimizer: Optimizer settings.
        options: Closed-form, halting and regression options.
        seed: Base seed; step i uses seed + i.
        threads: Worker threads for the objective.
        state: State to extend.
        on_step: Called with each new step map.

    Returns:
        The state after assimilating all observations.

    Raises:
        ConfigurationError: For malformed observations or options.
        AssimilationError: If a step fails; ``state`` on the error holds
            every step fitted before it.
    """
    template = template or TemplateSpec()
    reference = reference or ReferenceSpec()
    optimizer = optimizer or OptimizerSpec()
    options = options or AssimilationSpec()
    Y = _check_observations(model, observations)

    if options.closed_form and not (
        isinstance(model, LinearGaussianSSM) and model.param_dim == 0
    ):
        raise ConfigurationError("closed-form steps need a linear-Gaussian model")

    if state is None:
        state = SmootherState(
            model.state_dim, model.param_dim, model_hash=model.model_hash()
        )
    else:
        if state.model_hash and state.model_hash != model.model_hash():
            raise ConfigurationError("state was produced by a different model")
        done = state.observations.shape[0]
        if done and not np.array_equal(Y[:done], state.observations):
            raise ConfigurationError("observations do not extend those already assimilated")
    if options.closed_form and any(
        not isinstance(step.transport, AffineMap) for step in state.steps
    ):
        raise ConfigurationError("cannot extend fitted steps in closed form")
    state.failure_index = None

    for i in range(state.n_steps, Y.shape[0] - 1):
        try:
            if options.closed_form:
                step = _closed_form_step(model, state, Y, i)  # type: ignore[arg-type]
            else:
                step = _fit_step(
                    model, state, Y, i, template, reference, optimizer, seed, threads
                )
        except LowdimError as exc:
            state.failure_index = i
            raise AssimilationError(str(exc), i, state) from exc

        if not (np.isfinite(step.log_c) and np.isfinite(step.diagnostic)):
            state.failure_index = i
            raise AssimilationError("non-finite objective or diagnostic", i, state)
        if not step.converged and options.halt_on_nonconvergence:
            state.failure_index = i
            raise AssimilationError("map fit did not converge", i, state)

        state.steps.append(step)
        state.observations = Y[: i + 2]
        if model.param_dim:
            increment = step.param_map()
            if i == 0:
                state.param_maps.append(increment)
            else:
                state.param_maps.append(
                    _regress_param_map(
                        state.param_maps[i - 1],
                        increment,
                        template,
                        options.regression_samples,
                        seed + i,
                    )
                )
        logger.info(
            "step %d: log c = %.6g, diagnostic = %.3e%s",
            i,
            step.log_c,
            step.diagnostic,
            "" if step.converged else " (not converged)",
        )
        if on_step is not None:
            on_step(step)

    return state


def evidence(state: SmootherState) -> float:
    """Log marginal likelihood, the sum of the per-step log normalizing constants."""
    return state.log_evidence


def smoothing_composition(state: SmootherState) -> MapComposition:
    """T_0 o ... o T_k with every step map embedded into the full trajectory space."""
    state.require_steps()
    p, n, total = state.param_dim, state.state_dim, state.total_dim
    members = []
    for step in state.steps:
        coords = list(range(p)) + list(range(p + step.index * n, p + (step.index + 2) * n))
        members.append(embed(step.transport, coords, total))
    return MapComposition(members)


def _reference_draws(dim: int, m: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((m, dim))


def sample_smoothing(state: SmootherState, m: int, seed: int = 0) -> np.ndarray:
    """Draws of (theta, z_0, ..., z_{k+1}) from the full posterior.

    Reference draws go through T_k first and T_0 last; no model density is
    evaluated.

    Returns:
        (m, p + (k + 2) n) samples.
    """
    composition = smoothing_composition(state)
    return composition.evaluate(_reference_draws(composition.dim, m, seed))


class FilteringMap(TransportMap):
    """[T^Theta(x_theta); M^1(x_theta, x_{k+1})] on dimension p + n."""

    def __init__(self, step: StepMap, param_map: Optional[TransportMap]) -> None:
        self.step = step
        self.param_map = param_map
        self.layout = step.layout

    def __repr__(self) -> str:
        return f"FilteringMap(step={self.step.index}, dim={self.dim})"

    @property
    def dim(self) -> int:
        return self.layout.param_dim + self.layout.state_dim

    def _split(self, x: np.ndarray) -> "tuple[np.ndarray, np.ndarray]":
        p = self.layout.param_dim
        return x[:, :p], x[:, p:]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        batch, single = self._batch(x)
        x_theta, x_next = self._split(batch)
        _, state = self.step.filter_block(x_theta, x_next)
        theta = x_theta if self.param_map is None else self.param_map.evaluate(x_theta)
        out = np.concatenate([theta, state], axis=1)
        return out[0] if single else out

    def log_det_jacobian(self, x: np.ndarray) -> np.ndarray:
        batch, single = self._batch(x)
        x_theta, x_next = self._split(batch)
        _, d_state = self.step.filter_block_jacobian(x_theta, x_next)
        total = np.linalg.slogdet(d_state)[1]
        if self.param_map is not None and x_theta.shape[1]:
            total = total + self.param_map.log_det_jacobian(x_theta)
        return total[0] if single else total

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        batch, single = self._batch(x)
        x_theta, x_next = self._split(batch)
        p = x_theta.shape[1]
        d_theta, d_state = self.step.filter_block_jacobian(x_theta, x_next)
        jac = np.zeros((batch.shape[0], self.dim, self.dim))
        if p:
            jac[:, :p, :p] = (
                np.eye(p) if self.param_map is None else self.param_map.jacobian(x_theta)
            )
        jac[:, p:, :p] = d_theta
        jac[:, p:, p:] = d_state
        return jac[0] if single else jac

    def invert(self, y: np.ndarray) -> np.ndarray:
        batch, single = self._batch(y)
        y_theta, y_next = self._split(batch)
        x_theta = y_theta if self.param_map is None else self.param_map.invert(y_theta)
        layout = self.layout
        m = batch.shape[0]
        theta_image, _ = self.step.filter_block(x_theta, np.zeros((m, layout.state_dim)))
        full = self.step.transport.invert(
            layout.join(theta_image, np.zeros((m, layout.state_dim)), y_next)
        )
        out = np.concatenate([x_theta, full[:, layout.following]], axis=1)
        return out[0] if single else out


def filtering_map(state: SmootherState, k: Optional[int] = None) -> FilteringMap:
    """Map pushing eta to the filtering posterior of (theta, z_{k+1})."""
    state.require_steps()
    k = state.n_steps - 1 if k is None else k
    if not 0 <= k < state.n_steps:
        raise SequencingError(f"step {k} outside 0..{state.n_steps - 1}")
    param_map = state.param_maps[k] if state.param_dim else None
    return FilteringMap(state.steps[k], param_map)


def sample_filtering(state: SmootherState, m: int, seed: int = 0) -> np.ndarray:
    """Draws of (theta, z_{k+1}) given y_{0:k+1}, shape (m, p + n)."""
    fmap = filtering_map(state)
    return fmap.evaluate(_reference_draws(fmap.dim, m, seed))


def lag1_map(state: SmootherState, k: int) -> TransportMap:
    """Map pushing eta to the lag-one smoothing posterior of (theta, z_k, z_{k+1}).

    For k = 0 this is the first step map itself; otherwise the filtering map
    of step k - 1 is applied to (x_theta, x_k) after step map k.
    """
    state.require_steps()
    if not 0 <= k < state.n_steps:
        raise SequencingError(f"step {k} outside 0..{state.n_steps - 1}")
    step = state.steps[k]
    if k == 0:
        return step.transport
    layout = step.layout
    previous = filtering_map(state, k - 1)
    coords = list(range(layout.param_dim)) + layout.coords(layout.current)
    return MapComposition([EmbeddedMap(previous, coords, layout.dim), step.transport])


def fixed_point_smoother(
    model: StateSpaceModel,
    observations: np.ndarray,
    template: Optional[TemplateSpec] = None,
    reference: Optional[ReferenceSpec] = None,
    optimizer: Optional[OptimizerSpec] = None,
    options: Optional[AssimilationSpec] = None,
    seed: int = 0,
    threads: int = 1,
    state: Optional[SmootherState] = None,
) -> SmootherState:
    """Recursive characterization of pi(z_0 | y_{0:k}) by a single running map.

    Z_0 becomes the static parameter of a derived model whose chain starts at
    Z_1. After derived step k the running parameter map pushes eta to
    pi(z_0 | y_{0:k+2}).
    """
    Y = _check_observations(model, observations)
    if Y.shape[0] < 3:
        raise ConfigurationError("fixed-point smoothing needs at least three observations")
    options = (options or AssimilationSpec()).model_copy(update={"closed_form": False})
    derived = FixedPointModel(model, Y[0])
    return assimilate(
        derived, Y[1:], template, reference, optimizer, options, seed, threads, state
    )


def sample_fixed_point(state: SmootherState, m: int, seed: int = 0) -> np.ndarray:
    """Draws of z_0 from a fixed-point smoother state."""
    state.require_steps()
    if not state.param_maps:
        raise SequencingError("state has no running parameter map")
    return state.param_maps[-1].evaluate(_reference_draws(state.param_dim, m, seed))


def joint_log_density(
    model: StateSpaceModel, observations: np.ndarray, samples: np.ndarray
) -> np.ndarray:
    """Unnormalized log posterior of (theta, z_0, ..., z_{N-1}) rows."""
    p, n = model.param_dim, model.state_dim
    Y = np.asarray(observations, dtype=float).reshape(-1, model.obs_dim)
    theta = samples[:, :p]
    states = samples[:, p:].reshape(samples.shape[0], -1, n)
    if states.shape[1] != Y.shape[0]:
        raise ValueError("samples and observations cover different numbers of times")
    total = model.log_param_prior(theta) + model.log_initial(states[:, 0], theta)
    for k in range(Y.shape[0]):
        if k:
            total = total + model.log_transition(states[:, k], states[:, k - 1], theta)
        total = total + model.log_likelihood(Y[k], states[:, k], theta)
    return total


class ImportanceResult(NamedTuple):
    """Self-normalized importance weights with the transport map as proposal."""

    samples: np.ndarray
    log_weights: np.ndarray
    weights: np.ndarray
    ess: float


def importance_weights(
    state: SmootherState,
    model: StateSpaceModel,
    observations: np.ndarray,
    m: int,
    seed: int = 0,
) -> ImportanceResult:
    """Weights pi / T#eta at m smoothing draws, normalized to sum to one."""
    composition = smoothing_composition(state)
    x = _reference_draws(composition.dim, m, seed)
    samples, log_det = composition.evaluate_with_log_det(x)
    log_eta = -0.5 * np.sum(x * x, axis=1) - 0.5 * x.shape[1] * np.log(2.0 * np.pi)
    Y = np.asarray(observations, dtype=float).reshape(-1, model.obs_dim)[: state.n_times]
    with np.errstate(invalid="ignore", over="ignore"):
        log_w = joint_log_density(model, Y, samples) + log_det - log_eta
    log_w = np.where(np.isfinite(log_w), log_w, -np.inf)
    weights = np.exp(log_w - logsumexp(log_w))
    ess = float(1.0 / np.sum(weights**2))
    logger.debug("importance sampling with %d draws, ESS %.1f", m, ess)
    return ImportanceResult(samples, log_w, weights, ess)


def global_variance_diagnostic(
    state: SmootherState,
    model: StateSpaceModel,
    observations: np.ndarray,
    m: int = 1000,
    seed: int = 0,
) -> float:
    """Half the variance of the whole-trajectory log importance weight."""
    result = importance_weights(state, model, observations, m, seed)
    if not np.all(np.isfinite(result.log_weights)):
        return float("inf")
    return float(0.5 * np.var(result.log_weights))


def sample_posterior_predictive(
    state: SmootherState, model: StateSpaceModel, m: int, seed: int = 0
) -> np.ndarray:
    """Replicated observations (m, k + 2, d) drawn at smoothing samples."""
    rng = np.random.default_rng(seed)
    samples = sample_smoothing(state, m, seed)
    p, n = state.param_dim, state.state_dim
    theta = samples[:, :p]
    states = samples[:, p:].reshape(m, -1, n)
    return np.stack(
        [model.sample_observation(rng, states[:, k], theta) for k in range(states.shape[1])],
        axis=1,
    )
