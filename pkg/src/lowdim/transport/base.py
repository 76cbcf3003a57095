"""Base class for transport maps."""

from abc import ABC, abstractmethod

import numpy as np


class TransportMap(ABC):
    """Abstract base class for invertible maps acting on batches of points.

    Every method accepts an (m, dim) array; single points of shape (dim,) are
    promoted and the result is returned without the batch axis.
    """

    @property
    @abstractmethod
    def dim(self) -> int:
        """Get the input and output dimension.

        Returns:
            Dimension of the map.
        """
        pass

    @abstractmethod
    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Apply the map.

        Args:
            x: Points of shape (m, dim) or (dim,).

        Returns:
            Mapped points with the shape of x.
        """
        pass

    @abstractmethod
    def log_det_jacobian(self, x: np.ndarray) -> np.ndarray:
        """Log-determinant of the Jacobian at x.

        Args:
            x: Points of shape (m, dim) or (dim,).

        Returns:
            Array of shape (m,) or a scalar.
        """
        pass

    @abstractmethod
    def invert(self, y: np.ndarray) -> np.ndarray:
        """Solve evaluate(x) = y for x.

        Args:
            y: Points of shape (m, dim) or (dim,).

        Returns:
            Preimages with the shape of y.
        """
        pass

    @abstractmethod
    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """Full input Jacobian at x.

        Args:
            x: Points of shape (m, dim) or (dim,).

        Returns:
            Array of shape (m, dim, dim) or (dim, dim).
        """
        pass

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.evaluate(x)

    def _batch(self, x: np.ndarray) -> "tuple[np.ndarray, bool]":
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        batch = x.reshape(1, -1) if single else x
        if batch.ndim != 2 or batch.shape[1] != self.dim:
            raise ValueError(
                f"expected points of dimension {self.dim}, got shape {x.shape}"
            )
        return batch, single
