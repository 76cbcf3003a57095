"""Fitting transport maps by KL minimization and by regression."""

import csv
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import least_squares, minimize

from ..config.settings import OptimizerSpec
from ..errors import EvaluationError
from ..transport.density import LogDensity
from ..transport.maps import MonotoneTriangularMap
from .objective import (
    PENALTY,
    KLObjective,
    kl_objective,
    log_normalizing_constant,
    variance_diagnostic,
)
from .reference import ReferenceRule

logger = logging.getLogger(__name__)

# Central-difference step for Hessian-vector products.
HESSP_STEP = 1e-6


class TraceRow(BaseModel):
    iteration: int
    objective: float
    gradient_norm: float


class FitReport(BaseModel):
    """Outcome of a map fit."""

    final_objective: float
    variance_diagnostic: float = Field(ge=0.0)
    log_normalizing_constant: float
    iterations: int
    gradient_norm: float
    converged: bool
    clamped_samples: int = 0
    method: str = "bfgs"
    message: str = ""
    trace: List[TraceRow] = []

    def write_trace_csv(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["iteration", "objective", "gradient_norm"])
            for row in self.trace:
                writer.writerow([row.iteration, repr(row.objective), repr(row.gradient_norm)])


class _ObjectiveCache:
    """Memoizes objective evaluations and remembers the best point seen."""

    def __init__(
        self,
        template: MonotoneTriangularMap,
        logpi_bar: LogDensity,
        rule: ReferenceRule,
        threads: int,
    ) -> None:
        self.template = template
        self.logpi_bar = logpi_bar
        self.rule = rule
        self.threads = threads
        self._cache: Dict[bytes, KLObjective] = {}
        self.best_value = np.inf
        self.best_coefficients = template.coefficients
        self.evaluations = 0

    def __call__(self, c: np.ndarray) -> KLObjective:
        key = np.asarray(c, dtype=float).tobytes()
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        self.evaluations += 1
        try:
            result = kl_objective(
                self.template.with_coefficients(c), self.logpi_bar, self.rule, self.threads
            )
        except EvaluationError as exc:
            logger.debug("objective evaluation failed: %s", exc)
            result = KLObjective(PENALTY, np.zeros_like(c), 0)
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[key] = result
        if result.value < self.best_value:
            self.best_value = result.value
            self.best_coefficients = np.array(c, dtype=float)
        return result

    def fun_and_grad(self, c: np.ndarray) -> Tuple[float, np.ndarray]:
        result = self(c)
        return result.value, result.gradient

    def hessp(self, c: np.ndarray, p: np.ndarray) -> np.ndarray:
        norm = float(np.linalg.norm(p)) or 1.0
        h = HESSP_STEP / norm
        return (self(c + h * p).gradient - self(c - h * p).gradient) / (2.0 * h)


def compute_map(
    logpi_bar: LogDensity,
    template: MonotoneTriangularMap,
    rule: ReferenceRule,
    optimizer: Optional[OptimizerSpec] = None,
    threads: int = 1,
) -> Tuple[MonotoneTriangularMap, FitReport]:
    """Fit the coefficients of ``template`` so that it pushes eta towards pi.

    The KL objective is minimized with BFGS (default) or Newton-CG, starting
    from the template's coefficients. Convergence means a gradient infinity
    norm at most ``optimizer.gtol``; otherwise the best iterate is returned
    with ``converged`` unset.

    Args:
        logpi_bar: Unnormalized target log-density.
        template: Map fixing structure, degree and starting coefficients.
        rule: Reference discretization.
        optimizer: Optimizer settings.
        threads: Worker threads for the objective.

    Returns:
        The fitted map and its report.
    """
    optimizer = optimizer or OptimizerSpec()
    objective = _ObjectiveCache(template, logpi_bar, rule, threads)
    trace: List[TraceRow] = []

    start = objective(template.coefficients)
    trace.append(TraceRow(iteration=0, objective=start.value,
                          gradient_norm=float(np.max(np.abs(start.gradient), initial=0.0))))

    def callback(xk: np.ndarray) -> None:
        result = objective(xk)
        row = TraceRow(
            iteration=len(trace),
            objective=result.value,
            gradient_norm=float(np.max(np.abs(result.gradient), initial=0.0)),
        )
        trace.append(row)
        logger.debug("iteration %d objective %.10g |g| %.3e", row.iteration,
                     row.objective, row.gradient_norm)

    if trace[0].gradient_norm <= optimizer.gtol:
        message = "initial point satisfies the gradient tolerance"
        iterations = 0
    elif optimizer.method == "bfgs":
        res = minimize(
            objective.fun_and_grad,
            template.coefficients,
            jac=True,
            method="BFGS",
            callback=callback,
            options={"gtol": optimizer.gtol, "maxiter": optimizer.max_iterations,
                     "norm": np.inf},
        )
        message, iterations = str(res.message), int(res.nit)
    else:
        res = minimize(
            objective.fun_and_grad,
            template.coefficients,
            jac=True,
            hessp=objective.hessp,
            method="Newton-CG",
            callback=callback,
            options={"maxiter": optimizer.max_iterations, "xtol": 1e-12},
        )
        message, iterations = str(res.message), int(res.nit)

    fitted = template.with_coefficients(objective.best_coefficients)
    final = objective(objective.best_coefficients)
    gradient_norm = float(np.max(np.abs(final.gradient), initial=0.0))
    converged = gradient_norm <= optimizer.gtol
    if not converged:
        logger.warning(
            "map fit stopped after %d iterations with |g| = %.3e (%s)",
            iterations,
            gradient_norm,
            message,
        )

    diagnostic = variance_diagnostic(fitted, logpi_bar, rule)
    report = FitReport(
        final_objective=final.value,
        variance_diagnostic=diagnostic if np.isfinite(diagnostic) else 1e300,
        log_normalizing_constant=log_normalizing_constant(fitted, logpi_bar, rule),
        iterations=iterations,
        gradient_norm=gradient_norm,
        converged=converged,
        clamped_samples=final.clamped,
        method=optimizer.method,
        message=message,
        trace=trace,
    )
    return fitted, report


def regress_map(
    target_fn: Callable[[np.ndarray], np.ndarray],
    template: MonotoneTriangularMap,
    rule: ReferenceRule,
    tolerance: float = 1e-14,
    max_evaluations: int = 2000,
) -> MonotoneTriangularMap:
    """Least-squares fit of ``template`` to the values of ``target_fn``.

    Minimizes sum_i w_i |target_fn(x_i) - T(x_i)|^2 over the rule's nodes with
    a trust-region least-squares solver.
    """
    points = rule.points
    target = np.asarray(target_fn(points), dtype=float)
    if target.shape != points.shape:
        raise ValueError("regression target must map points to the same dimension")
    sqrt_w = np.sqrt(rule.weights)[:, None]
    slices = template.coefficient_slices()

    def residuals(c: np.ndarray) -> np.ndarray:
        candidate = template.with_coefficients(c)
        return (sqrt_w * (candidate.evaluate(points) - target)).ravel(order="F")

    def jacobian(c: np.ndarray) -> np.ndarray:
        candidate = template.with_coefficients(c)
        terms = candidate.component_terms(points)
        jac = np.zeros((points.shape[0], template.dim, c.size))
        for comp, term, (sa, sb) in zip(candidate.components, terms, slices):
            cols = slice(sa.start, sb.stop)
            jac[:, comp.output, cols] = sqrt_w * term.value_grad
        return jac.transpose(1, 0, 2).reshape(-1, c.size)

    res = least_squares(
        residuals,
        template.coefficients,
        jac=jacobian,
        method="trf",
        xtol=tolerance,
        ftol=tolerance,
        gtol=tolerance,
        max_nfev=max_evaluations,
    )
    if not res.success:
        logger.warning("map regression did not converge: %s", res.message)
    logger.debug("regression residual %.3e after %d evaluations", res.cost, res.nfev)
    return template.with_coefficients(res.x)
