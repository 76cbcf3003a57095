"""JSON checkpoints for transport maps."""

import hashlib
import json
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ValidationError

from ..errors import IntegrityError
from .base import TransportMap
from .basis import BasisSet
from .composition import AffineMap
from .maps import MapComponent, MonotoneTriangularMap


class ComponentRecord(BaseModel):
    """Serialized form of one triangular map component."""

    output: int
    inputs: List[int]
    a_family: str
    b_family: str
    a_multi_indices: List[List[int]]
    b_multi_indices: List[List[int]]
    a_coeffs: List[float]
    b_coeffs: List[float]


class MapCheckpoint(BaseModel):
    """Serialized transport map; floats are written with round-trip exact repr."""

    kind: Literal["triangular", "affine"]
    dim: int
    rectifier: Optional[str] = None
    permutation: List[int] = []
    components: List[ComponentRecord] = []
    matrix: Optional[List[List[float]]] = None
    offset: Optional[List[float]] = None


def map_to_checkpoint(m: TransportMap) -> MapCheckpoint:
    if isinstance(m, MonotoneTriangularMap):
        return MapCheckpoint(
            kind="triangular",
            dim=m.dim,
            rectifier=m.rectifier.name,
            permutation=list(m.perm),
            components=[
                ComponentRecord(
                    output=comp.output,
                    inputs=list(comp.inputs),
                    a_family=comp.a_basis.family.value,
                    b_family=comp.b_basis.family.value,
                    a_multi_indices=comp.a_basis.multi_indices.tolist(),
                    b_multi_indices=comp.b_basis.multi_indices.tolist(),
                    a_coeffs=comp.a_coeffs.tolist(),
                    b_coeffs=comp.b_coeffs.tolist(),
                )
                for comp in m.components
            ],
        )
    if isinstance(m, AffineMap):
        return MapCheckpoint(
            kind="affine",
            dim=m.dim,
            matrix=m.matrix.tolist(),
            offset=m.offset.tolist(),
        )
    raise TypeError(f"cannot checkpoint {type(m).__name__}")


def checkpoint_to_map(checkpoint: MapCheckpoint) -> TransportMap:
    if checkpoint.kind == "affine":
        if checkpoint.matrix is None or checkpoint.offset is None:
            raise IntegrityError("affine checkpoint without matrix or offset")
        return AffineMap(np.array(checkpoint.matrix), np.array(checkpoint.offset))

    components = []
    for record in checkpoint.components:
        n_off = len(record.inputs) - 1
        a_basis = BasisSet(
            record.a_family,
            np.array(record.a_multi_indices, dtype=int).reshape(
                len(record.a_multi_indices), n_off
            ),
        )
        b_basis = BasisSet(
            record.b_family,
            np.array(record.b_multi_indices, dtype=int).reshape(
                len(record.b_multi_indices), n_off + 1
            ),
        )
        components.append(
            MapComponent(
                record.output,
                tuple(record.inputs),
                a_basis,
                b_basis,
                np.array(record.a_coeffs, dtype=float),
                np.array(record.b_coeffs, dtype=float),
            )
        )
    result = MonotoneTriangularMap(
        checkpoint.dim, components, checkpoint.rectifier or "shifted-square"
    )
    if list(result.perm) != checkpoint.permutation:
        raise IntegrityError("checkpoint permutation does not match its components")
    return result


def dumps_map(m: TransportMap) -> str:
    return json.dumps(map_to_checkpoint(m).model_dump(), indent=2)


def save_map(m: TransportMap, path: Path) -> str:
    """Write a checkpoint and return the SHA-256 of its bytes."""
    path.parent.mkdir(parents=True, exist_ok=True)
    text = dumps_map(m)
    with open(path, "w") as f:
        f.write(text)
    return hashlib.sha256(text.encode()).hexdigest()


def load_map(path: Path, expected_sha256: Optional[str] = None) -> TransportMap:
    """Read a checkpoint, optionally verifying its hash.

    Raises:
        IntegrityError: If the file is missing, unreadable or does not match.
    """
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as exc:
        raise IntegrityError(f"cannot read checkpoint {path}: {exc}")
    if expected_sha256 and hashlib.sha256(text.encode()).hexdigest() != expected_sha256:
        raise IntegrityError(f"checkpoint {path} does not match its recorded hash")
    try:
        checkpoint = MapCheckpoint.model_validate(json.loads(text))
        return checkpoint_to_map(checkpoint)
    except (ValueError, ValidationError) as exc:
        raise IntegrityError(f"corrupt checkpoint {path}: {exc}")
