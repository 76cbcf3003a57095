"""Strictly positive functions used to keep map components monotone."""

from abc import ABC, abstractmethod

import numpy as np

SHIFT = 1e-8


class Rectifier(ABC):
    """Positive function r applied to the monotone integrand."""

    @property
    @abstractmethod
    def name(self) -> str:
        pass

    @abstractmethod
    def __call__(self, u: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def derivative(self, u: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def inverse(self, v: float) -> float:
        """A preimage of v > 0, used to initialize at the identity map."""
        pass


class ShiftedSquare(Rectifier):
    """r(u) = u^2 + 1e-8."""

    @property
    def name(self) -> str:
        return "shifted-square"

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return u * u + SHIFT

    def derivative(self, u: np.ndarray) -> np.ndarray:
        return 2.0 * u

    def inverse(self, v: float) -> float:
        return float(np.sqrt(v - SHIFT))


class Exponential(Rectifier):
    """r(u) = exp(u)."""

    @property
    def name(self) -> str:
        return "exp"

    def __call__(self, u: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(u)

    def derivative(self, u: np.ndarray) -> np.ndarray:
        return self(u)

    def inverse(self, v: float) -> float:
        return float(np.log(v))


RECTIFIERS = {"shifted-square": ShiftedSquare, "exp": Exponential}


def get_rectifier(name: str) -> Rectifier:
    try:
        return RECTIFIERS[name]()
    except KeyError:
        raise ValueError(f"unknown rectifier {name!r}; choose from {sorted(RECTIFIERS)}")
