"""Gaussian target densities."""

from typing import Optional

import numpy as np
import scipy.linalg

from ..errors import MatrixError
from ..transport.density import LogDensity, standard_normal_logdensity


def gaussian_logdensity(
    mean: np.ndarray, cov: np.ndarray, normalized: bool = True
) -> LogDensity:
    """log N(x; mean, cov) with analytic gradient.

    Raises:
        MatrixError: If ``cov`` is not symmetric positive definite.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    dim = mean.size
    if cov.shape != (dim, dim):
        raise ValueError(f"covariance shape {cov.shape} does not match mean of size {dim}")
    try:
        factor = scipy.linalg.cho_factor(cov, lower=True)
    except np.linalg.LinAlgError as exc:
        raise MatrixError("covariance is not symmetric positive definite") from exc
    const = 0.0
    if normalized:
        const = -0.5 * dim * np.log(2.0 * np.pi) - np.sum(np.log(np.diag(factor[0])))

    def fn(x: np.ndarray) -> np.ndarray:
        r = x - mean
        return const - 0.5 * np.sum(r * scipy.linalg.cho_solve(factor, r.T).T, axis=1)

    def grad(x: np.ndarray) -> np.ndarray:
        return -scipy.linalg.cho_solve(factor, (x - mean).T).T

    return LogDensity(dim, fn, grad, name="gaussian")


def shifted_normal_logdensity(
    dim: int, shift: float = 0.0, scale: float = 1.0, normalized: bool = True
) -> LogDensity:
    """Isotropic N(shift, scale^2 I)."""
    return gaussian_logdensity(
        np.full(dim, float(shift)), scale**2 * np.eye(dim), normalized=normalized
    )


def standard_normal(dim: int, log_scale: Optional[float] = None) -> LogDensity:
    """Reference density, optionally multiplied by exp(log_scale)."""
    density = standard_normal_logdensity(dim)
    return density if log_scale is None else density.shifted(log_scale)
