"""State directories: per-step map checkpoints plus a JSON manifest."""

import hashlib
import json
import logging
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ValidationError

from ..errors import IntegrityError
from ..transport.checkpoint import dumps_map, load_map
from ..transport.base import TransportMap
from ..variational.fitting import FitReport
from .smoother import SmootherState
from .steps import StepLayout, StepMap

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"


class StepRecord(BaseModel):
    index: int
    checkpoint: str
    sha256: str
    log_c: float
    diagnostic: float
    converged: bool
    param_checkpoint: Optional[str] = None
    param_sha256: Optional[str] = None
    report: Optional[FitReport] = None


class Manifest(BaseModel):
    """Contents of manifest.json."""

    format_version: int = FORMAT_VERSION
    state_dim: int
    param_dim: int
    model_hash: str
    observations: List[List[float]]
    steps: List[StepRecord]
    log_evidence: float
    failure_index: Optional[int] = None


def _write_once(path: Path, text: str) -> str:
    """Write text unless an identical file exists; return its SHA-256."""
    digest = hashlib.sha256(text.encode()).hexdigest()
    if path.exists():
        if hashlib.sha256(path.read_bytes()).hexdigest() != digest:
            raise IntegrityError(f"refusing to overwrite {path} with different content")
        return digest
    with open(path, "w") as f:
        f.write(text)
    return digest


def _write_map(directory: Path, name: str, m: TransportMap) -> str:
    return _write_once(directory / name, dumps_map(m))


def save_state(state: SmootherState, directory: Path) -> Manifest:
    """Persist a state; existing checkpoint files are verified, never rewritten.

    Raises:
        IntegrityError: If an existing checkpoint differs from the state.
    """
    directory.mkdir(parents=True, exist_ok=True)
    records = []
    for step in state.steps:
        name = f"step_{step.index:04d}.json"
        record = StepRecord(
            index=step.index,
            checkpoint=name,
            sha256=_write_map(directory, name, step.transport),
            log_c=step.log_c,
            diagnostic=step.diagnostic,
            converged=step.converged,
            report=None
            if step.report is None
            else step.report.model_copy(update={"trace": []}),
        )
        if state.param_dim:
            param_name = f"param_map_{step.index:04d}.json"
            record.param_checkpoint = param_name
            record.param_sha256 = _write_map(
                directory, param_name, state.param_maps[step.index]
            )
        records.append(record)

    manifest = Manifest(
        state_dim=state.state_dim,
        param_dim=state.param_dim,
        model_hash=state.model_hash,
        observations=np.asarray(state.observations, dtype=float).tolist(),
        steps=records,
        log_evidence=state.log_evidence,
        failure_index=state.failure_index,
    )
    with open(directory / MANIFEST_NAME, "w") as f:
        json.dump(manifest.model_dump(mode="json"), f, indent=2)
    logger.info("saved %d steps to %s", len(records), directory)
    return manifest


def load_manifest(directory: Path) -> Manifest:
    path = directory / MANIFEST_NAME
    try:
        with open(path, "r") as f:
            manifest = Manifest.model_validate(json.load(f))
    except OSError as exc:
        raise IntegrityError(f"cannot read {path}: {exc}") from exc
    except (ValueError, ValidationError) as exc:
        raise IntegrityError(f"corrupt manifest {path}: {exc}") from exc
    if manifest.format_version != FORMAT_VERSION:
        raise IntegrityError(f"unsupported state format {manifest.format_version}")
    return manifest


def load_state(directory: Path) -> SmootherState:
    """Rebuild a state, verifying every checkpoint against its recorded hash.

    Raises:
        IntegrityError: If the manifest or a checkpoint is missing or corrupt.
    """
    manifest = load_manifest(directory)
    layout = StepLayout(manifest.param_dim, manifest.state_dim)
    steps = []
    param_maps = []
    for position, record in enumerate(manifest.steps):
        if record.index != position:
            raise IntegrityError(f"manifest step {position} has index {record.index}")
        steps.append(
            StepMap(
                index=record.index,
                layout=layout,
                transport=load_map(directory / record.checkpoint, record.sha256),
                log_c=record.log_c,
                diagnostic=record.diagnostic,
                converged=record.converged,
                report=record.report,
            )
        )
        if manifest.param_dim:
            if record.param_checkpoint is None:
                raise IntegrityError(f"step {record.index} lacks a parameter map")
            param_maps.append(
                load_map(directory / record.param_checkpoint, record.param_sha256)
            )

    observations = np.asarray(manifest.observations, dtype=float)
    if observations.size == 0:
        observations = np.zeros((0, 0))
    return SmootherState(
        state_dim=manifest.state_dim,
        param_dim=manifest.param_dim,
        steps=steps,
        param_maps=param_maps,
        observations=observations,
        model_hash=manifest.model_hash,
        failure_index=manifest.failure_index,
    )
