"""Affine maps, embeddings and compositions of transport maps."""

from typing import Sequence, Tuple

import numpy as np
import scipy.linalg

from ..errors import EmbeddingError, EvaluationError
from .base import TransportMap


class AffineMap(TransportMap):
    """T(x) = L x + c for an invertible matrix L."""

    def __init__(self, matrix: np.ndarray, offset: np.ndarray) -> None:
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.offset = np.asarray(offset, dtype=float).reshape(-1)
        n = self.matrix.shape[0]
        if self.matrix.shape != (n, n) or self.offset.shape != (n,):
            raise ValueError("affine map needs a square matrix and matching offset")
        sign, logdet = np.linalg.slogdet(self.matrix)
        if sign == 0 or not np.isfinite(logdet):
            raise EvaluationError("affine map matrix is singular")
        self._log_det = float(logdet)
        self._lu = scipy.linalg.lu_factor(self.matrix)

    def __repr__(self) -> str:
        return f"AffineMap(dim={self.dim})"

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        batch, single = self._batch(x)
        out = batch @ self.matrix.T + self.offset
        return out[0] if single else out

    def log_det_jacobian(self, x: np.ndarray) -> np.ndarray:
        batch, single = self._batch(x)
        out = np.full(batch.shape[0], self._log_det)
        return out[0] if single else out

    def invert(self, y: np.ndarray) -> np.ndarray:
        batch, single = self._batch(y)
        out = scipy.linalg.lu_solve(self._lu, (batch - self.offset).T).T
        return out[0] if single else out

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        batch, single = self._batch(x)
        jac = np.broadcast_to(self.matrix, (batch.shape[0],) + self.matrix.shape).copy()
        return jac[0] if single else jac


class EmbeddedMap(TransportMap):
    """A map acting on selected coordinates of a larger space, identity elsewhere."""

    def __init__(
        self, inner: TransportMap, coords: Sequence[int], ambient_dim: int
    ) -> None:
        coords = tuple(int(c) for c in coords)
        if len(coords) != inner.dim:
            raise EmbeddingError(
                f"{len(coords)} coordinates given for a map of dimension {inner.dim}"
            )
        if len(set(coords)) != len(coords):
            raise EmbeddingError(f"overlapping coordinates {coords}")
        if any(c < 0 or c >= ambient_dim for c in coords):
            raise EmbeddingError(f"coordinates {coords} outside 0..{ambient_dim - 1}")
        self.inner = inner
        self.coords = coords
        self._ambient = ambient_dim

    def __repr__(self) -> str:
        return f"EmbeddedMap({self.inner!r}, coords={self.coords}, dim={self.dim})"

    @property
    def dim(self) -> int:
        return self._ambient

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        batch, single = self._batch(x)
        out = batch.copy()
        out[:, list(self.coords)] = self.inner.evaluate(batch[:, list(self.coords)])
        return out[0] if single else out

    def log_det_jacobian(self, x: np.ndarray) -> np.ndarray:
        batch, single = self._batch(x)
        out = np.asarray(self.inner.log_det_jacobian(batch[:, list(self.coords)]))
        return out[0] if single else out

    def invert(self, y: np.ndarray) -> np.ndarray:
        batch, single = self._batch(y)
        out = batch.copy()
        out[:, list(self.coords)] = self.inner.invert(batch[:, list(self.coords)])
        return out[0] if single else out

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        batch, single = self._batch(x)
        jac = np.broadcast_to(np.eye(self.dim), (batch.shape[0], self.dim, self.dim)).copy()
        idx = np.array(self.coords)
        jac[:, idx[:, None], idx[None, :]] = self.inner.jacobian(batch[:, idx])
        return jac[0] if single else jac


def embed(m: TransportMap, coords: Sequence[int], ambient_dim: int) -> EmbeddedMap:
    """Embed m on ``coords`` (0-based) of an ``ambient_dim``-dimensional space."""
    return EmbeddedMap(m, coords, ambient_dim)


class MapComposition(TransportMap):
    """T_1 o T_2 o ... o T_l; the last member is applied first."""

    def __init__(self, members: Sequence[TransportMap]) -> None:
        if not members:
            raise ValueError("a composition needs at least one member")
        dims = {member.dim for member in members}
        if len(dims) != 1:
            raise ValueError(f"members have different dimensions {sorted(dims)}")
        self.members: Tuple[TransportMap, ...] = tuple(members)

    def __repr__(self) -> str:
        return f"MapComposition(dim={self.dim}, members={len(self.members)})"

    @property
    def dim(self) -> int:
        return self.members[0].dim

    def _forward(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        log_det = np.zeros(x.shape[0])
        current = x
        for member in reversed(self.members):
            log_det = log_det + member.log_det_jacobian(current)
            current = member.evaluate(current)
        return current, log_det

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        batch, single = self._batch(x)
        out, _ = self._forward(batch)
        return out[0] if single else out

    def log_det_jacobian(self, x: np.ndarray) -> np.ndarray:
        batch, single = self._batch(x)
        _, log_det = self._forward(batch)
        return log_det[0] if single else log_det

    def evaluate_with_log_det(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Image and log-determinant in one pass."""
        batch, _ = self._batch(x)
        return self._forward(batch)

    def invert(self, y: np.ndarray) -> np.ndarray:
        batch, single = self._batch(y)
        current = batch
        for member in self.members:
            current = member.invert(current)
        return current[0] if single else current

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        batch, single = self._batch(x)
        jac = np.broadcast_to(np.eye(self.dim), (batch.shape[0], self.dim, self.dim))
        current = batch
        for member in reversed(self.members):
            jac = np.einsum("mij,mjk->mik", member.jacobian(current), jac)
            current = member.evaluate(current)
        return jac[0] if single else jac


def compose_evaluate(c: MapComposition, x: np.ndarray) -> np.ndarray:
    return c.evaluate(x)


def compose_log_det(c: MapComposition, x: np.ndarray) -> np.ndarray:
    return c.log_det_jacobian(x)
