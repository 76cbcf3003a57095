"""Weighted point sets that discretize the standard Gaussian reference."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial import hermite_e

from ..config.settings import ReferenceSpec

TENSOR_MAX_DIM = 4
DEFAULT_ORDER = 10
DEFAULT_SAMPLES = 5000


@dataclass(frozen=True)
class ReferenceRule:
    """Points and weights approximating expectations under N(0, I).

    Attributes:
        kind: ``monte-carlo`` or ``gauss-hermite``.
        points: (m, dim) nodes.
        weights: (m,) weights summing to one.
        seed: Seed of a Monte Carlo rule.
        order: Points per axis of a tensor rule.
    """

    kind: str
    points: np.ndarray
    weights: np.ndarray
    seed: Optional[int] = None
    order: Optional[int] = None

    @classmethod
    def monte_carlo(cls, dim: int, m: int, seed: int) -> "ReferenceRule":
        points = np.random.default_rng(seed).standard_normal((m, dim))
        return cls("monte-carlo", points, np.full(m, 1.0 / m), seed=seed)

    @classmethod
    def gauss_hermite(cls, dim: int, order: int = DEFAULT_ORDER) -> "ReferenceRule":
        """Tensor product of ``order``-point probabilists' Gauss-Hermite rules."""
        nodes, weights = hermite_e.hermegauss(order)
        weights = weights / weights.sum()
        grids = np.meshgrid(*([nodes] * dim), indexing="ij")
        wgrids = np.meshgrid(*([weights] * dim), indexing="ij")
        points = np.stack([g.ravel() for g in grids], axis=1)
        tensor_weights = np.prod(np.stack([w.ravel() for w in wgrids], axis=1), axis=1)
        return cls("gauss-hermite", points, tensor_weights, order=order)

    @classmethod
    def default(
        cls,
        dim: int,
        seed: int = 0,
        order: int = DEFAULT_ORDER,
        samples: int = DEFAULT_SAMPLES,
    ) -> "ReferenceRule":
        """Tensor quadrature up to dimension 4, seeded Monte Carlo above."""
        if dim <= TENSOR_MAX_DIM:
            return cls.gauss_hermite(dim, order)
        return cls.monte_carlo(dim, samples, seed)

    @classmethod
    def from_spec(cls, spec: ReferenceSpec, dim: int, seed: int = 0) -> "ReferenceRule":
        if spec.kind == "gauss-hermite":
            return cls.gauss_hermite(dim, spec.order)
        if spec.kind == "monte-carlo":
            return cls.monte_carlo(dim, spec.samples, seed)
        return cls.default(dim, seed, spec.order, spec.samples)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def log_reference(self) -> np.ndarray:
        """log eta at the nodes."""
        return -0.5 * np.sum(self.points**2, axis=1) - 0.5 * self.dim * np.log(
            2.0 * np.pi
        )

    def expectation(self, values: np.ndarray) -> np.ndarray:
        return np.tensordot(self.weights, values, axes=(0, 0))
