"""Hermite polynomial and Hermite function bases with total-degree truncation."""

from dataclasses import dataclass
from enum import Enum
from math import factorial, pi, sqrt
from typing import Tuple

import numpy as np
from numpy.polynomial import hermite_e


class BasisFamily(str, Enum):
    """Families of univariate functions used in map expansions."""

    HERMITE = "hermite"
    HERMITE_FUNCTION = "hermite-function"
    LINEAR = "linear"


def total_degree_multi_indices(n_vars: int, degree: int) -> np.ndarray:
    """All multi-indices with total degree at most ``degree``.

    Sorted by total degree, then lexicographically, so the zero index is first.

    Returns:
        Integer array of shape (N, n_vars); (1, 0) when n_vars is 0.
    """
    if degree < 0:
        return np.zeros((0, n_vars), dtype=int)
    indices = [()]
    for _ in range(n_vars):
        indices = [idx + (k,) for idx in indices for k in range(degree + 1)]
    kept = [idx for idx in indices if sum(idx) <= degree]
    kept.sort(key=lambda idx: (sum(idx), tuple(-k for k in idx)))
    return np.array(kept, dtype=int).reshape(len(kept), n_vars)


def hermite_polynomials(x: np.ndarray, degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """Probabilists' Hermite polynomials He_0..He_degree and their derivatives."""
    values = hermite_e.hermevander(x, degree)
    derivs = np.zeros_like(values)
    if degree >= 1:
        derivs[..., 1:] = values[..., :-1] * np.arange(1, degree + 1)
    return values, derivs


def hermite_functions(x: np.ndarray, degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """Constant-extended Hermite functions and their derivatives.

    Index 0 is the constant 1; index j >= 1 is the L2-normalized Hermite
    function He_{j-1}(x) exp(-x^2/4) / sqrt(sqrt(2 pi) (j-1)!).
    """
    values = np.ones(np.shape(x) + (degree + 1,))
    derivs = np.zeros_like(values)
    if degree >= 1:
        he, dhe = hermite_polynomials(x, degree - 1)
        envelope = np.exp(-0.25 * np.asarray(x) ** 2)[..., None]
        norms = np.array([sqrt(sqrt(2.0 * pi) * factorial(n)) for n in range(degree)])
        values[..., 1:] = he * envelope / norms
        x_col = np.asarray(x)[..., None]
        derivs[..., 1:] = (dhe - 0.5 * x_col * he) * envelope / norms
    return values, derivs


@dataclass(frozen=True)
class BasisSet:
    """Tensor-product basis indexed by multi-indices.

    With the Hermite-function family the last variable uses Hermite functions
    and all others Hermite polynomials; the other families use polynomials in
    every variable.
    """

    family: BasisFamily
    multi_indices: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", BasisFamily(self.family))
        indices = np.asarray(self.multi_indices, dtype=int)
        if indices.ndim != 2:
            raise ValueError("multi_indices must be a 2-D integer array")
        if self.family == BasisFamily.LINEAR and indices.size and indices.sum(1).max() > 1:
            raise ValueError("linear family allows total degree at most 1")
        object.__setattr__(self, "multi_indices", indices)

    @classmethod
    def total_degree(
        cls, family: "BasisFamily | str", n_vars: int, degree: int
    ) -> "BasisSet":
        return cls(BasisFamily(family), total_degree_multi_indices(n_vars, degree))

    @property
    def size(self) -> int:
        return self.multi_indices.shape[0]

    @property
    def n_vars(self) -> int:
        return self.multi_indices.shape[1]

    def _univariate(self, j: int, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        degree = int(self.multi_indices[:, j].max()) if self.size else 0
        last = j == self.n_vars - 1
        if self.family == BasisFamily.HERMITE_FUNCTION and last:
            return hermite_functions(x, degree)
        return hermite_polynomials(x, degree)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Basis values at points x of shape (..., n_vars); returns (..., size)."""
        out = np.ones(x.shape[:-1] + (self.size,))
        for j in range(self.n_vars):
            values, _ = self._univariate(j, x[..., j])
            out *= values[..., self.multi_indices[:, j]]
        return out

    def evaluate_with_gradient(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Basis values (..., size) and input gradients (..., size, n_vars)."""
        factors = []
        dfactors = []
        for j in range(self.n_vars):
            values, derivs = self._univariate(j, x[..., j])
            factors.append(values[..., self.multi_indices[:, j]])
            dfactors.append(derivs[..., self.multi_indices[:, j]])
        out = np.ones(x.shape[:-1] + (self.size,))
        for f in factors:
            out = out * f
        grads = np.empty(x.shape[:-1] + (self.size, self.n_vars))
        for j in range(self.n_vars):
            partial = dfactors[j]
            for l, f in enumerate(factors):
                if l != j:
                    partial = partial * f
            grads[..., j] = partial
        return out, grads
