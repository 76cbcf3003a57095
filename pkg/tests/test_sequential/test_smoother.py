"""Tests for sequential assimilation, sampling and fixed-point smoothing."""

import numpy as np
import pytest

from lowdim.config.settings import (
    AssimilationSpec,
    OptimizerSpec,
    ReferenceSpec,
    TemplateSpec,
)
from lowdim.errors import (
    AssimilationError,
    ConfigurationError,
    NumericalError,
    SequencingError,
)
from lowdim.models.linear_gaussian import LinearGaussianSSM, kalman_rts_oracle
from lowdim.models.simulation import simulate
from lowdim.models.stochastic_volatility import StochasticVolatilityModel
from lowdim.sequential import smoother
from lowdim.sequential.smoother import (
    SmootherState,
    assimilate,
    evidence,
    filtering_map,
    fixed_point_smoother,
    global_variance_diagnostic,
    importance_weights,
    lag1_map,
    sample_filtering,
    sample_fixed_point,
    sample_posterior_predictive,
    sample_smoothing,
)
from lowdim.transport.maps import MonotoneTriangularMap

CLOSED_FORM = AssimilationSpec(closed_form=True)
AFFINE = TemplateSpec(degree=1)
SMALL_RULE = ReferenceSpec(kind="gauss-hermite", order=3)


@pytest.fixture
def closed_state(lg_model, lg_observations):
    return assimilate(lg_model, lg_observations, options=CLOSED_FORM)


class TestFittedAssimilation:
    """Test fitted step maps on a linear-Gaussian model."""

    @pytest.fixture
    def fitted(self, lg_model, lg_observations):
        Y = lg_observations[:6]
        state = assimilate(lg_model, Y, template=AFFINE, reference=SMALL_RULE)
        return state, kalman_rts_oracle(lg_model, Y)

    def test_filtering_moments(self, fitted):
        """Test affine fitted steps reproduce the Kalman filter."""
        state, oracle = fitted
        for k in range(state.n_steps):
            fmap = filtering_map(state, k)
            zero = np.zeros((1, fmap.dim))
            jac = fmap.jacobian(zero)[0]
            assert np.allclose(fmap.evaluate(zero)[0], oracle.filter_means[k + 1], atol=1e-4)
            assert np.allclose(jac @ jac.T, oracle.filter_covs[k + 1], atol=1e-4)

    def test_diagnostics_and_evidence(self, fitted):
        """Test exact steps have vanishing diagnostics and the right evidence."""
        state, oracle = fitted
        assert all(step.converged for step in state.steps)
        assert all(step.diagnostic < 1e-6 for step in state.steps)
        assert evidence(state) == pytest.approx(oracle.log_likelihood, abs=1e-4)

    def test_on_step_callback(self, lg_model, lg_observations, mocker):
        """Test the callback sees every new step in order."""
        callback = mocker.Mock()
        assimilate(lg_model, lg_observations[:4], options=CLOSED_FORM, on_step=callback)
        assert [c.args[0].index for c in callback.call_args_list] == [0, 1, 2]

    def test_logs_each_step(self, lg_model, lg_observations, caplog):
        """Test per-step progress messages."""
        caplog.set_level("INFO", logger="lowdim")
        assimilate(lg_model, lg_observations[:3], options=CLOSED_FORM)
        assert "step 1: log c" in caplog.text


class TestObservationChecks:
    """Test validation of observation sequences."""

    @pytest.mark.parametrize(
        "observations",
        [np.ones((1, 1)), np.ones((4, 2)), np.array([[0.1], [np.nan], [0.2]])],
    )
    def test_rejects(self, scalar_model, observations):
        """Test malformed observations raise."""
        with pytest.raises(ConfigurationError):
            assimilate(scalar_model, observations, options=CLOSED_FORM)

    def test_one_dimensional_input(self, scalar_model):
        """Test a flat vector is read as scalar observations."""
        state = assimilate(scalar_model, np.array([0.1, 0.4, -0.2]), options=CLOSED_FORM)
        assert state.n_steps == 2


class TestResume:
    """Test extending a state with further observations."""

    def test_extension_matches_single_run(self, lg_model, lg_observations):
        """Test resuming leaves earlier steps untouched."""
        state = assimilate(lg_model, lg_observations[:11], options=CLOSED_FORM)
        first_steps = list(state.steps)
        resumed = assimilate(
            lg_model, lg_observations[:16], options=CLOSED_FORM, state=state
        )
        assert resumed.n_steps == 15
        assert all(a is b for a, b in zip(first_steps, resumed.steps))
        full = assimilate(lg_model, lg_observations[:16], options=CLOSED_FORM)
        assert resumed.log_evidence == pytest.approx(full.log_evidence, abs=1e-10)

    def test_different_observations(self, lg_model, lg_observations):
        """Test a state cannot be extended with altered history."""
        state = assimilate(lg_model, lg_observations[:5], options=CLOSED_FORM)
        altered = lg_observations[:8].copy()
        altered[2] += 1.0
        with pytest.raises(ConfigurationError):
            assimilate(lg_model, altered, options=CLOSED_FORM, state=state)

    def test_different_model(self, lg_model, lg_observations):
        """Test a state cannot be extended under another model."""
        state = assimilate(lg_model, lg_observations[:5], options=CLOSED_FORM)
        other = LinearGaussianSSM.random_stable(2, 1, seed=4)
        with pytest.raises(ConfigurationError):
            assimilate(other, lg_observations[:8], options=CLOSED_FORM, state=state)

    def test_no_new_observations(self, lg_model, lg_observations):
        """Test resuming with nothing new is a no-op."""
        state = assimilate(lg_model, lg_observations[:5], options=CLOSED_FORM)
        again = assimilate(lg_model, lg_observations[:5], options=CLOSED_FORM, state=state)
        assert again.n_steps == 4


class TestFailures:
    """Test failure reporting during assimilation."""

    def test_failing_step_keeps_partial_state(self, lg_model, lg_observations, mocker):
        """Test a failure at step 2 reports the index and earlier steps."""
        real = smoother.compute_map
        calls = []

        def flaky(*args, **kwargs):
            calls.append(1)
            if len(calls) == 3:
                raise NumericalError("optimizer blew up")
            return real(*args, **kwargs)

        mocker.patch("lowdim.sequential.smoother.compute_map", side_effect=flaky)
        with pytest.raises(AssimilationError) as info:
            assimilate(lg_model, lg_observations[:6], template=AFFINE, reference=SMALL_RULE)
        assert info.value.step_index == 2
        assert info.value.state.n_steps == 2
        assert info.value.state.failure_index == 2
        assert "optimizer blew up" in str(info.value)

    def test_halt_on_nonconvergence(self, lg_model, lg_observations):
        """Test a non-converged fit halts when asked to."""
        with pytest.raises(AssimilationError) as info:
            assimilate(
                lg_model,
                lg_observations[:4],
                template=AFFINE,
                reference=SMALL_RULE,
                optimizer=OptimizerSpec(max_iterations=1),
                options=AssimilationSpec(halt_on_nonconvergence=True),
            )
        assert info.value.step_index == 0
        assert info.value.state.n_steps == 0


class TestSampling:
    """Test sampling from step maps."""

    def test_no_model_evaluations(self, closed_state, mocker):
        """Test sampling evaluates no model density."""
        likelihood = mocker.spy(LinearGaussianSSM, "log_likelihood")
        transition = mocker.spy(LinearGaussianSSM, "log_transition")
        samples = sample_smoothing(closed_state, 50, seed=1)
        assert samples.shape == (50, closed_state.total_dim)
        assert likelihood.call_count == 0
        assert transition.call_count == 0

    def test_seeded(self, closed_state):
        """Test equal seeds give equal draws."""
        assert np.array_equal(
            sample_smoothing(closed_state, 5, seed=3), sample_smoothing(closed_state, 5, seed=3)
        )

    def test_filtering_draws(self, closed_state, lg_model, lg_observations):
        """Test filtering draws match the final Kalman moments."""
        oracle = kalman_rts_oracle(lg_model, lg_observations)
        draws = sample_filtering(closed_state, 20000, seed=0)
        assert draws.shape == (20000, lg_model.state_dim)
        assert np.allclose(draws.mean(axis=0), oracle.filter_means[-1], atol=0.05)
        assert np.allclose(np.cov(draws.T), oracle.filter_covs[-1], atol=0.05)

    def test_posterior_predictive(self, closed_state, lg_model):
        """Test replicated observations have one row per time."""
        draws = sample_posterior_predictive(closed_state, lg_model, 7, seed=2)
        assert draws.shape == (7, closed_state.n_times, lg_model.obs_dim)

    def test_lag1_bounds(self, closed_state):
        """Test invalid lag-one indices raise."""
        with pytest.raises(SequencingError):
            lag1_map(closed_state, closed_state.n_steps)
        with pytest.raises(SequencingError):
            sample_smoothing(SmootherState(2), 3)


class TestImportanceWeights:
    """Test importance weights with the smoothing map as proposal."""

    def test_exact_map(self, closed_state, lg_model, lg_observations):
        """Test exact maps give constant weights equal to the evidence."""
        result = importance_weights(closed_state, lg_model, lg_observations, 200, seed=5)
        assert np.allclose(result.log_weights, closed_state.log_evidence, atol=1e-6)
        assert result.weights.sum() == pytest.approx(1.0)
        assert result.ess == pytest.approx(200.0, rel=1e-6)
        assert global_variance_diagnostic(
            closed_state, lg_model, lg_observations, 200
        ) == pytest.approx(0.0, abs=1e-10)

    def test_approximate_map(self, lg_model, lg_observations):
        """Test a perturbed map has a positive diagnostic and fewer effective samples."""
        state = assimilate(lg_model, lg_observations[:4], options=CLOSED_FORM)
        loose = LinearGaussianSSM(
            lg_model.F, 2.0 * lg_model.Q, lg_model.H, lg_model.R, lg_model.mu0, lg_model.Gamma0
        )
        result = importance_weights(state, loose, lg_observations[:4], 500, seed=0)
        assert result.ess < 500.0
        assert global_variance_diagnostic(state, loose, lg_observations[:4], 500) > 0.0


class TestFixedPointSmoother:
    """Test recursive characterization of the initial state."""

    @pytest.fixture
    def scalar_lg(self):
        model = LinearGaussianSSM.random_stable(1, 1, seed=5)
        return model, simulate(model, 5, seed=8)[1]

    def test_matches_rts(self, scalar_lg):
        """Test the running map matches the smoothed moments of z_0."""
        model, Y = scalar_lg
        state = fixed_point_smoother(model, Y, template=AFFINE, reference=SMALL_RULE)
        assert state.n_steps == Y.shape[0] - 2
        oracle = kalman_rts_oracle(model, Y)
        param_map = state.param_maps[-1]
        zero = np.zeros((1, 1))
        slope = param_map.jacobian(zero)[0, 0, 0]
        assert param_map.evaluate(zero)[0, 0] == pytest.approx(oracle.smooth_means[0, 0], abs=1e-4)
        assert slope**2 == pytest.approx(oracle.smooth_covs[0, 0, 0], abs=1e-4)

    def test_cost_constant_per_step(self, scalar_lg, mocker):
        """Test every step fits and regresses maps of one fixed size."""
        model, Y = scalar_lg
        fit = mocker.spy(smoother, "compute_map")
        regress = mocker.spy(smoother, "regress_map")
        state = fixed_point_smoother(model, Y, template=AFFINE, reference=SMALL_RULE)
        assert fit.call_count == state.n_steps
        assert regress.call_count == state.n_steps - 1
        fitted = {(c.args[1].n_coefficients, c.args[2].size) for c in fit.call_args_list}
        regressed = {(c.args[1].n_coefficients, c.args[2].size) for c in regress.call_args_list}
        assert len(fitted) == 1
        assert len(regressed) == 1
        # The running map is refitted rather than composed, so its size stays put.
        assert all(isinstance(m, MonotoneTriangularMap) for m in state.param_maps)
        assert len({m.n_coefficients for m in state.param_maps}) == 1

    def test_draws(self, scalar_lg):
        """Test draws of z_0 come from the running map."""
        model, Y = scalar_lg
        state = fixed_point_smoother(model, Y[:3], template=AFFINE, reference=SMALL_RULE)
        draws = sample_fixed_point(state, 10, seed=0)
        assert draws.shape == (10, 1)

    def test_ignores_closed_form(self, scalar_lg):
        """Test the closed-form option is overridden."""
        model, Y = scalar_lg
        state = fixed_point_smoother(
            model, Y[:3], template=AFFINE, reference=SMALL_RULE, options=CLOSED_FORM
        )
        assert state.param_dim == 1

    def test_needs_three_observations(self, scalar_lg):
        """Test short sequences raise."""
        model, Y = scalar_lg
        with pytest.raises(ConfigurationError):
            fixed_point_smoother(model, Y[:2])

    def test_needs_parameter_free_model(self):
        """Test models with static parameters are refused."""
        with pytest.raises(ValueError):
            fixed_point_smoother(StochasticVolatilityModel(), np.ones((4, 1)))

    def test_no_param_maps(self, closed_state):
        """Test sampling z_0 needs a running parameter map."""
        with pytest.raises(SequencingError):
            sample_fixed_point(closed_state, 3)


def weighted_tail_probability(values, weights, point):
    """Weighted probability of values <= point and its Monte Carlo standard error."""
    below = (values <= point).astype(float)
    prob = float(weights @ below)
    return prob, float(np.sqrt(weights**2 @ (below - prob) ** 2))


class TestStochasticVolatility:
    """Test assimilation of the stochastic volatility model at default settings."""

    @pytest.mark.slow
    def test_smoothing_percentiles_match_importance_sampling(self):
        """Test smoothing percentiles against self-normalized importance sampling."""
        model = StochasticVolatilityModel(mu=-0.5, phi=0.95)
        Y = simulate(model, 50, seed=4)[1]
        state = assimilate(model, Y)
        diagnostics = np.array([step.diagnostic for step in state.steps])
        assert state.n_times == 50
        assert np.all(np.isfinite(diagnostics))
        assert np.median(diagnostics) <= 0.5

        # Unweighted oracle draws are the map's own smoothing draws for this seed.
        oracle = importance_weights(state, model, Y, 100_000, seed=1)
        assert oracle.ess > 100.0
        agreeing = 0
        for k in range(50):
            values = oracle.samples[:, k]
            agree = True
            for level, point in zip((0.05, 0.95), np.percentile(values, [5, 95])):
                prob, se = weighted_tail_probability(values, oracle.weights, point)
                # 0.01 absorbs the degree-2 approximation error of the map itself.
                agree &= abs(prob - level) <= 1.96 * se + 0.01
            agreeing += agree
        assert agreeing >= 45

    @pytest.mark.slow
    def test_parameter_posterior_covers_truth(self):
        """Test the running parameter map covers the true parameters."""
        model = StochasticVolatilityModel()
        truth = np.array([-0.5, 3.66])
        Y = simulate(model, 30, theta=truth, seed=4)[1]
        state = assimilate(model, Y)
        diagnostics = np.array([step.diagnostic for step in state.steps])
        assert len(state.param_maps) == state.n_steps == 29
        assert np.all(np.isfinite(diagnostics))
        for k in range(1, diagnostics.size):
            assert diagnostics[k] <= 10.0 * np.median(diagnostics[:k])

        reference = np.random.default_rng(0).standard_normal((5000, 2))
        draws = state.param_maps[-1].evaluate(reference)
        low, high = np.percentile(draws, [5, 95], axis=0)
        assert np.all(low <= truth)
        assert np.all(truth <= high)
