"""Tests for step-map layout, templates and step targets."""

import numpy as np
import pytest

from lowdim.config.settings import TemplateSpec
from lowdim.errors import SequencingError
from lowdim.models.stochastic_volatility import StochasticVolatilityModel
from lowdim.sequential.smoother import SmootherState
from lowdim.sequential.steps import (
    StepLayout,
    StepMap,
    initial_target,
    recursive_target,
    step_target,
    step_template,
)
from lowdim.transport.density import check_gradient
from lowdim.transport.maps import MonotoneTriangularMap


def perturbed(template, rng, scale=0.05):
    return template.with_coefficients(
        template.coefficients + scale * rng.standard_normal(template.n_coefficients)
    )


class TestStepLayout:
    """Test the coordinate layout of step maps."""

    def test_blocks(self):
        """Test parameter, current and following slices."""
        layout = StepLayout(1, 2)
        assert layout.dim == 5
        assert layout.coords(layout.theta) == [0]
        assert layout.coords(layout.current) == [1, 2]
        assert layout.coords(layout.following) == [3, 4]
        assert layout.perm == [0, 3, 4, 1, 2]

    def test_active_inputs(self):
        """Test the parameter and following blocks read no current state."""
        assert StepLayout(1, 2).active() == {0: [], 3: [0], 4: [0, 3]}
        assert StepLayout(0, 1).active() == {1: []}

    def test_split_and_join(self, rng):
        """Test splitting a batch into blocks and back."""
        layout = StepLayout(2, 1)
        x = rng.standard_normal((3, 4))
        theta, current, following = layout.split(x)
        assert theta.shape == (3, 2)
        assert np.array_equal(layout.join(theta, current, following), x)


class TestStepTemplate:
    """Test block upper-triangular step templates."""

    def test_identity_start(self, rng):
        """Test templates start at the identity."""
        template = step_template(StepLayout(1, 2))
        x = rng.standard_normal((4, 5))
        assert np.allclose(template.evaluate(x), x)

    def test_block_sparsity(self, rng):
        """Test the Jacobian zeros of a perturbed step map."""
        layout = StepLayout(1, 2)
        m = perturbed(step_template(layout, TemplateSpec(degree=2)), rng, 0.1)
        jac = m.jacobian(rng.standard_normal(5))
        # The parameter block reads only theta.
        assert np.all(jac[0, 1:] == 0.0)
        # The following block never reads the current state.
        assert np.all(jac[3:, 1:3] == 0.0)
        assert jac[1, 3] != 0.0


class TestStepTargets:
    """Test the unnormalized targets of sequential steps."""

    def test_initial_target_gradient(self, lg_model, lg_observations, rng):
        """Test the step-0 gradient of a linear-Gaussian model."""
        layout = StepLayout(0, lg_model.state_dim)
        target = initial_target(lg_model, lg_observations[0], lg_observations[1], layout)
        assert target.dim == 4
        assert check_gradient(target, rng.standard_normal((6, 4))) < 1e-5

    def test_initial_target_value(self, scalar_model):
        """Test the step-0 target is the sum of model log-densities."""
        layout = StepLayout(0, 1)
        target = initial_target(scalar_model, np.array([1.0]), np.array([0.5]), layout)
        x = np.array([[0.2, -0.3]])
        z0, z1 = x[:, :1], x[:, 1:]
        none = np.zeros((1, 0))
        expected = (
            scalar_model.log_initial(z0, none)
            + scalar_model.log_transition(z1, z0, none)
            + scalar_model.log_likelihood(np.array([1.0]), z0, none)
            + scalar_model.log_likelihood(np.array([0.5]), z1, none)
        )
        assert target.batch(x) == pytest.approx(expected)

    def test_recursive_target_gradient(self, rng):
        """Test the gradient through a previous step and parameter map."""
        model = StochasticVolatilityModel()
        layout = StepLayout(model.param_dim, model.state_dim)
        previous = StepMap(
            index=0,
            layout=layout,
            transport=perturbed(step_template(layout, TemplateSpec(degree=2)), rng),
            log_c=0.0,
        )
        param_map = perturbed(MonotoneTriangularMap.identity(2, 1), rng)
        target = recursive_target(
            model, np.array([0.7]), previous, param_map, layout, index=1
        )
        points = 0.5 * rng.standard_normal((6, layout.dim))
        assert check_gradient(target, points) < 1e-5

    def test_recursive_target_without_parameters(self, scalar_model, rng):
        """Test the gradient of a parameter-free recursive target."""
        layout = StepLayout(0, 1)
        previous = StepMap(
            index=0,
            layout=layout,
            transport=perturbed(step_template(layout, TemplateSpec(degree=2)), rng),
            log_c=0.0,
        )
        target = recursive_target(scalar_model, np.array([1.2]), previous, None, layout, 1)
        assert check_gradient(target, rng.standard_normal((6, 2))) < 1e-5

    def test_step_target_sequencing(self, scalar_model):
        """Test out-of-order steps raise."""
        Y = np.array([[0.1], [0.2], [0.3]])
        state = SmootherState(1)
        assert step_target(state, scalar_model, Y, 0).name == "step-0"
        with pytest.raises(SequencingError):
            step_target(state, scalar_model, Y, 1)
        with pytest.raises(SequencingError):
            step_target(state, scalar_model, Y, 2)
