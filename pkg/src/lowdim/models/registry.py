"""Built-in targets and models addressable by name from configuration."""

import logging
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from ..config.settings import ModelSpec, TargetSpec
from ..errors import ConfigurationError
from ..sequential.model import StateSpaceModel
from ..transport.density import LogDensity
from .banana import banana_target
from .gaussian import gaussian_logdensity, shifted_normal_logdensity, standard_normal
from .linear_gaussian import LinearGaussianSSM
from .stochastic_volatility import StochasticVolatilityModel

logger = logging.getLogger(__name__)


def _standard_normal(spec: TargetSpec) -> LogDensity:
    return standard_normal(spec.dim or 1, spec.params.get("log_scale"))


def _gaussian(spec: TargetSpec) -> LogDensity:
    if "mean" not in spec.params or "cov" not in spec.params:
        raise ConfigurationError("target 'gaussian' needs params.mean and params.cov")
    return gaussian_logdensity(spec.params["mean"], spec.params["cov"])


def _shifted_normal(spec: TargetSpec) -> LogDensity:
    return shifted_normal_logdensity(
        spec.dim or 1,
        float(spec.params.get("shift", 0.0)),
        float(spec.params.get("scale", 1.0)),
    )


def _banana(spec: TargetSpec) -> LogDensity:
    if spec.dim not in (None, 2):
        raise ConfigurationError("the banana target is two-dimensional")
    return banana_target(float(spec.params.get("curvature", 1.0)))


TARGETS: Dict[str, Callable[[TargetSpec], LogDensity]] = {
    "standard-normal": _standard_normal,
    "gaussian": _gaussian,
    "shifted-normal": _shifted_normal,
    "banana": _banana,
}


def build_target(spec: TargetSpec) -> LogDensity:
    """Instantiate a registry target.

    Raises:
        ConfigurationError: For unknown names or missing parameters.
    """
    try:
        factory = TARGETS[spec.name]
    except KeyError:
        raise ConfigurationError(
            f"unknown target {spec.name!r}; choose from {sorted(TARGETS)}"
        ) from None
    target = factory(spec)
    logger.debug("built target %s of dimension %d", target.name, target.dim)
    return target


def build_model(spec: ModelSpec) -> StateSpaceModel:
    if spec.kind == "linear-gaussian":
        try:
            return LinearGaussianSSM.from_params(spec.params)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc
    mu: Optional[float] = spec.params.get("mu")
    phi: Optional[float] = spec.params.get("phi")
    try:
        return StochasticVolatilityModel(mu, phi)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc


def model_truth(spec: ModelSpec) -> Tuple[StateSpaceModel, Optional[np.ndarray]]:
    """Model and the static parameter value used for simulation.

    ``params.theta`` gives the simulation truth for models with static
    parameters; without it the truth is drawn from the prior.
    """
    model = build_model(spec)
    theta = spec.params.get("theta")
    if theta is None or not model.param_dim:
        return model, None
    theta = np.asarray(theta, dtype=float).reshape(model.param_dim)
    return model, theta
