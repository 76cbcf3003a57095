"""Sample-average KL objective and the diagnostics derived from it."""

import logging
from typing import NamedTuple, Tuple

import numpy as np

from ..transport.density import LogDensity
from ..transport.maps import MonotoneTriangularMap
from ..utils.parallel import chunked_sum
from .reference import ReferenceRule

logger = logging.getLogger(__name__)

# Stand-in for -log pi_bar where the target density vanishes.
PENALTY = 1e10


class KLObjective(NamedTuple):
    """Objective value, its coefficient gradient and the number of clamped points."""

    value: float
    gradient: np.ndarray
    clamped: int


def _pullback_terms(
    m: MonotoneTriangularMap,
    logpi_bar: LogDensity,
    x: np.ndarray,
    with_gradient: bool,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """log pi_bar(T(x)) + log det grad T(x), its coefficient gradients, bad rows."""
    terms = m.component_terms(x)
    y = np.empty_like(x)
    log_det = np.zeros(x.shape[0])
    for comp, term in zip(m.components, terms):
        y[:, comp.output] = term.value
        log_det += term.log_slope

    with np.errstate(invalid="ignore", over="ignore"):
        log_target = logpi_bar.batch(y)
    bad = ~np.isfinite(log_target)
    values = np.where(bad, -PENALTY, log_target + log_det)
    if not with_gradient:
        return values, np.zeros((x.shape[0], 0)), bad

    target_grad = np.zeros_like(y)
    good = ~bad
    if np.any(good):
        target_grad[good] = logpi_bar.gradient(y[good])
    blocks = [
        target_grad[:, comp.output][:, None] * term.value_grad + term.log_slope_grad
        for comp, term in zip(m.components, terms)
    ]
    grads = np.concatenate(blocks, axis=1)
    grads[bad] = 0.0
    return values, grads, bad


def kl_objective(
    m: MonotoneTriangularMap,
    logpi_bar: LogDensity,
    rule: ReferenceRule,
    threads: int = 1,
) -> KLObjective:
    """-sum_i w_i [log pi_bar(T(x_i)) + log det grad T(x_i)] and its gradient.

    Points where the target is -inf contribute 1e10 with zero gradient.
    """
    if m.dim != logpi_bar.dim or m.dim != rule.dim:
        raise ValueError("map, target and reference dimensions differ")

    def chunk(s: slice) -> Tuple[float, np.ndarray, int]:
        values, grads, bad = _pullback_terms(m, logpi_bar, rule.points[s], True)
        w = rule.weights[s]
        return float(w @ values), w @ grads, int(bad.sum())

    total, grad, clamped = chunked_sum(chunk, rule.size, threads)
    if clamped:
        logger.warning("clamped %d points where the target density vanishes", clamped)
    return KLObjective(-total, -np.asarray(grad), clamped)


def log_weights(
    m: MonotoneTriangularMap, logpi_bar: LogDensity, rule: ReferenceRule
) -> np.ndarray:
    """log pi_bar(T(x)) + log det grad T(x) - log eta(x) at the rule's nodes."""
    with np.errstate(invalid="ignore", over="ignore"):
        values = logpi_bar.batch(m.evaluate(rule.points)) + m.log_det_jacobian(
            rule.points
        )
    return values - rule.log_reference()


def variance_diagnostic(
    m: MonotoneTriangularMap, logpi_bar: LogDensity, rule: ReferenceRule
) -> float:
    """Half the weighted variance of the log ratio of target to pushforward."""
    values = log_weights(m, logpi_bar, rule)
    if not np.all(np.isfinite(values)):
        return float("inf")
    mean = rule.expectation(values)
    return float(0.5 * rule.expectation((values - mean) ** 2))


def log_normalizing_constant(
    m: MonotoneTriangularMap, logpi_bar: LogDensity, rule: ReferenceRule
) -> float:
    """Weighted mean of the log ratio, an estimate of log of the target's mass."""
    return float(rule.expectation(log_weights(m, logpi_bar, rule)))
