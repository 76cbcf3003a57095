"""Synthetic data by ancestral sampling of a state-space model."""

import logging
from typing import Optional, Tuple

import numpy as np

from ..sequential.model import StateSpaceModel

logger = logging.getLogger(__name__)


def simulate(
    model: StateSpaceModel,
    steps: int,
    theta: Optional[np.ndarray] = None,
    seed: "int | np.random.Generator" = 0,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw a state path and its observations.

    Args:
        model: Model providing the sampling hooks.
        steps: Number of time indices N.
        theta: Static parameters; drawn from the prior when omitted.
        seed: Seed or generator; equal seeds give identical paths.

    Returns:
        States (N, n), observations (N, d) and the parameters used (p,).
    """
    if steps < 1:
        raise ValueError("simulate needs at least one step")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if theta is None:
        params = model.sample_param_prior(rng, 1)
    else:
        params = np.asarray(theta, dtype=float).reshape(1, model.param_dim)

    states = np.zeros((steps, model.state_dim))
    observations = np.zeros((steps, model.obs_dim))
    z = model.sample_initial(rng, params)
    for k in range(steps):
        if k:
            z = model.sample_transition(rng, z, params)
        states[k] = z[0]
        observations[k] = model.sample_observation(rng, z, params)[0]
    logger.debug("simulated %d steps of %r", steps, model)
    return states, observations, params[0]
