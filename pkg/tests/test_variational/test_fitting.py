"""Tests for map fitting by KL minimization and regression."""

import csv

import numpy as np
import pytest

from lowdim.config.settings import OptimizerSpec
from lowdim.models.banana import banana_target
from lowdim.models.gaussian import gaussian_logdensity, standard_normal
from lowdim.transport.maps import MonotoneTriangularMap
from lowdim.variational.fitting import FitReport, compute_map, regress_map
from lowdim.variational.reference import ReferenceRule

MEAN = np.array([1.0, -2.0])
COV = np.array([[2.0, 0.6], [0.6, 1.0]])


class TestComputeMap:
    """Test KL minimization."""

    def test_gaussian_target(self):
        """Test an affine map recovers mean and Cholesky factor."""
        target = gaussian_logdensity(MEAN, COV)
        fitted, report = compute_map(
            target, MonotoneTriangularMap.identity(2, 1), ReferenceRule.gauss_hermite(2, 5)
        )
        assert report.converged
        assert report.iterations > 0
        assert report.variance_diagnostic < 1e-8
        assert report.log_normalizing_constant == pytest.approx(0.0, abs=1e-6)
        assert np.allclose(fitted.evaluate(np.zeros(2)), MEAN, atol=1e-5)
        jac = fitted.jacobian(np.zeros(2))
        assert np.allclose(jac @ jac.T, COV, atol=1e-5)
        assert report.trace[0].iteration == 0
        assert len(report.trace) == report.iterations + 1

    def test_newton_cg(self):
        """Test the Newton-CG optimizer on the same problem."""
        target = gaussian_logdensity(MEAN, COV)
        fitted, report = compute_map(
            target,
            MonotoneTriangularMap.identity(2, 1),
            ReferenceRule.gauss_hermite(2, 5),
            OptimizerSpec(method="newton-cg"),
        )
        assert report.method == "newton-cg"
        assert np.allclose(fitted.evaluate(np.zeros(2)), MEAN, atol=1e-4)

    def test_initial_point_already_optimal(self):
        """Test the identity is returned unchanged for a standard normal target."""
        template = MonotoneTriangularMap.identity(2, 1)
        fitted, report = compute_map(
            standard_normal(2), template, ReferenceRule.gauss_hermite(2)
        )
        assert report.iterations == 0
        assert report.converged
        assert np.array_equal(fitted.coefficients, template.coefficients)
        assert "initial point" in report.message

    def test_not_converged(self, caplog):
        """Test an iteration cap leaves converged unset and warns."""
        fitted, report = compute_map(
            banana_target(),
            MonotoneTriangularMap.identity(2, 3),
            ReferenceRule.gauss_hermite(2),
            OptimizerSpec(max_iterations=1),
        )
        assert not report.converged
        assert report.gradient_norm > 1e-6
        assert "map fit stopped" in caplog.text
        # The best iterate improves on the start.
        assert report.final_objective <= report.trace[0].objective

    def test_write_trace_csv(self, tmp_path):
        """Test the optimization trace file."""
        report = FitReport(
            final_objective=1.0,
            variance_diagnostic=0.1,
            log_normalizing_constant=0.0,
            iterations=1,
            gradient_norm=0.5,
            converged=False,
            trace=[
                {"iteration": 0, "objective": 2.0, "gradient_norm": 1.0},
                {"iteration": 1, "objective": 1.0, "gradient_norm": 0.5},
            ],
        )
        path = tmp_path / "trace.csv"
        report.write_trace_csv(path)
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["iteration", "objective", "gradient_norm"]
        assert rows[2] == ["1", "1.0", "0.5"]

    @pytest.mark.slow
    def test_banana_degree_three(self):
        """Test a cubic map characterizes the banana target."""
        fitted, report = compute_map(
            banana_target(),
            MonotoneTriangularMap.identity(2, 3),
            ReferenceRule.gauss_hermite(2),
        )
        assert report.variance_diagnostic <= 1e-2
        x = np.random.default_rng(0).standard_normal((2000, 2))
        z = fitted.evaluate(x)
        # Exact banana map: z1 = x1, z2 = x1^2 + 0.5 x2.
        assert np.mean(z[:, 1] - z[:, 0] ** 2) == pytest.approx(0.0, abs=0.05)

    @pytest.mark.slow
    def test_log_constant_improves_with_degree(self):
        """Test the log normalizing constant estimate does not degrade as the degree grows."""
        rule = ReferenceRule.gauss_hermite(2)
        biases = []
        for degree in (1, 2, 3):
            _, report = compute_map(
                banana_target(), MonotoneTriangularMap.identity(2, degree), rule
            )
            # The banana target is normalized, so -log c is the bias.
            biases.append(-report.log_normalizing_constant)
        assert biases[0] > 0.1
        for coarse, fine in zip(biases, biases[1:]):
            assert fine <= coarse + 0.1 * abs(coarse) + 1e-3


class TestRegressMap:
    """Test least-squares fits to given functions."""

    def test_affine_target(self, rng):
        """Test regression reproduces an affine function."""
        template = MonotoneTriangularMap.identity(2, 1)
        rule = ReferenceRule.monte_carlo(2, 200, seed=0)
        matrix = np.array([[2.0, 0.0], [0.5, 0.3]])
        offset = np.array([1.0, -1.0])
        fitted = regress_map(lambda x: x @ matrix.T + offset, template, rule)
        x = rng.standard_normal((5, 2))
        assert np.allclose(fitted.evaluate(x), x @ matrix.T + offset, atol=1e-8)

    def test_identity_from_perturbed_start(self, rng):
        """Test regressing onto the identity from a perturbed map."""
        template = MonotoneTriangularMap.identity(2, 2, rectifier="exp")
        start = template.with_coefficients(
            template.coefficients + 0.1 * rng.standard_normal(template.n_coefficients)
        )
        fitted = regress_map(lambda x: x, start, ReferenceRule.gauss_hermite(2, 6))
        x = rng.standard_normal((5, 2))
        assert np.allclose(fitted.evaluate(x), x, atol=1e-6)

    def test_shape_mismatch(self):
        """Test a target of the wrong dimension raises."""
        with pytest.raises(ValueError):
            regress_map(
                lambda x: x[:, :1],
                MonotoneTriangularMap.identity(2, 1),
                ReferenceRule.gauss_hermite(2, 3),
            )
