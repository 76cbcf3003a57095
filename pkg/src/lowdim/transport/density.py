"""Unnormalized log-densities and their pullbacks and pushforwards."""

import logging
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np

if TYPE_CHECKING:
    from .base import TransportMap

logger = logging.getLogger(__name__)

LogDensityFn = Callable[[np.ndarray], np.ndarray]
GradientFn = Callable[[np.ndarray], np.ndarray]

# Relative step of central finite differences.
FD_STEP = 1e-6


def _as_batch(x: np.ndarray, dim: int) -> "tuple[np.ndarray, bool]":
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = x.reshape(1, -1) if single else x
    if batch.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got {batch.shape[1]}")
    return batch, single


class LogDensity:
    """Unnormalized log-density with an optional analytic gradient.

    Both callables act on batches: ``fn`` maps an (m, dim) array to (m,) values
    and ``grad`` maps it to (m, dim) gradients. Single points of shape (dim,)
    are accepted by ``__call__`` and ``gradient``.
    """

    def __init__(
        self,
        dim: int,
        fn: LogDensityFn,
        grad: Optional[GradientFn] = None,
        name: str = "",
    ) -> None:
        if dim < 1:
            raise ValueError("dimension must be positive")
        self.dim = dim
        self._fn = fn
        self._grad = grad
        self.name = name or "logdensity"

    def __repr__(self) -> str:
        return f"LogDensity(name={self.name!r}, dim={self.dim})"

    @property
    def has_gradient(self) -> bool:
        return self._grad is not None

    def batch(self, x: np.ndarray) -> np.ndarray:
        """Values on an (m, dim) batch without shape coercion."""
        return np.asarray(self._fn(x), dtype=float)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        batch, single = _as_batch(x, self.dim)
        values = np.asarray(self._fn(batch), dtype=float).reshape(batch.shape[0])
        return values[0] if single else values

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Gradient, analytic when available and central differences otherwise."""
        batch, single = _as_batch(x, self.dim)
        if self._grad is not None:
            grads = np.asarray(self._grad(batch), dtype=float).reshape(batch.shape)
        else:
            grads = finite_difference_gradient(self._fn, batch)
        return grads[0] if single else grads

    def shifted(self, constant: float) -> "LogDensity":
        """Same density multiplied by exp(constant)."""
        fn, grad = self._fn, self._grad
        return LogDensity(
            self.dim, lambda x: fn(x) + constant, grad, name=f"{self.name}+const"
        )


def finite_difference_gradient(fn: LogDensityFn, x: np.ndarray) -> np.ndarray:
    """Central-difference gradient of a batched scalar function."""
    m, d = x.shape
    grads = np.empty((m, d))
    for j in range(d):
        h = FD_STEP * np.maximum(1.0, np.abs(x[:, j]))
        up = x.copy()
        down = x.copy()
        up[:, j] += h
        down[:, j] -= h
        grads[:, j] = (np.asarray(fn(up)) - np.asarray(fn(down))) / (2.0 * h)
    return grads


def check_gradient(
    density: LogDensity, points: np.ndarray, rtol: float = 1e-5
) -> float:
    """Largest relative gap between analytic and finite-difference gradients.

    Args:
        density: Density with an analytic gradient.
        points: (m, dim) evaluation points.
        rtol: Tolerance reported in the log message.

    Returns:
        max |g - g_fd| / max(1, |g_fd|) over all entries.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    analytic = density.gradient(points)
    numeric = finite_difference_gradient(density.batch, points)
    gap = float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))))
    if gap > rtol:
        logger.warning("%s gradient check gap %.3e exceeds %.1e", density.name, gap, rtol)
    return gap


def standard_normal_logdensity(dim: int) -> LogDensity:
    """Normalized standard Gaussian reference density."""
    const = -0.5 * dim * np.log(2.0 * np.pi)
    return LogDensity(
        dim,
        lambda x: const - 0.5 * np.sum(x * x, axis=1),
        lambda x: -x,
        name="standard-normal",
    )


def pullback_logdensity(m: "TransportMap", logpi: LogDensity) -> LogDensity:
    """x -> log pi(T(x)) + log det grad T(x)."""
    if m.dim != logpi.dim:
        raise ValueError("map and density dimensions differ")

    def fn(x: np.ndarray) -> np.ndarray:
        return logpi(m.evaluate(x)) + m.log_det_jacobian(x)

    return LogDensity(m.dim, fn, name=f"pullback({logpi.name})")


def pushforward_logdensity(m: "TransportMap", logeta: LogDensity) -> LogDensity:
    """z -> log eta(S(z)) - log det grad T(S(z)) with S the inverse of T."""
    if m.dim != logeta.dim:
        raise ValueError("map and density dimensions differ")

    def fn(z: np.ndarray) -> np.ndarray:
        x = m.invert(z)
        return logeta(x) - m.log_det_jacobian(x)

    return LogDensity(m.dim, fn, name=f"pushforward({logeta.name})")
