"""Reading observations and writing samples, summaries and reports."""

import csv
import json
import logging
from pathlib import Path
from typing import Any, List, Sequence

import numpy as np

from ..errors import ConfigurationError

logger = logging.getLogger(__name__)

PERCENTILES = (5, 25, 40, 60, 75, 95)
MISSING_TOKENS = {"", "na", "nan", "null", "none"}


def read_observations(path: Path) -> np.ndarray:
    """Read an observation CSV with one row per time and one column per component.

    A header row is skipped when its first field is not numeric.

    Raises:
        ConfigurationError: If the file is unreadable, ragged or has missing values.
    """
    try:
        with open(path, "r", newline="") as f:
            rows = [row for row in csv.reader(f) if row and not row[0].startswith("#")]
    except OSError as exc:
        raise ConfigurationError(f"cannot read observations {path}: {exc}") from exc

    values: List[List[float]] = []
    for line_number, row in enumerate(rows, start=1):
        fields = [field.strip() for field in row]
        if any(field.lower() in MISSING_TOKENS for field in fields):
            raise ConfigurationError(f"{path}: missing value in row {line_number}")
        try:
            values.append([float(field) for field in fields])
        except ValueError:
            if line_number == 1 and not values:
                continue
            raise ConfigurationError(f"{path}: non-numeric value in row {line_number}")
    if not values:
        raise ConfigurationError(f"{path}: no observations")
    if len({len(row) for row in values}) != 1:
        raise ConfigurationError(f"{path}: rows have different numbers of columns")
    data = np.array(values)
    if not np.all(np.isfinite(data)):
        raise ConfigurationError(f"{path}: observations must be finite")
    return data


def write_matrix_csv(path: Path, header: Sequence[str], rows: np.ndarray) -> None:
    """Write a header and rows; floats use repr so they read back exactly."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in np.atleast_2d(rows):
            writer.writerow([repr(float(v)) for v in row])


def coordinate_names(param_dim: int, state_dim: int, times: Sequence[int]) -> List[str]:
    """theta_1.., then z_k per time (z_k_j when states are vectors)."""
    names = [f"theta_{j + 1}" for j in range(param_dim)]
    for k in times:
        if state_dim == 1:
            names.append(f"z_{k}")
        else:
            names.extend(f"z_{k}_{j + 1}" for j in range(state_dim))
    return names


def percentile_table(samples: np.ndarray) -> np.ndarray:
    """(columns, len(PERCENTILES)) percentiles of each sample column."""
    return np.percentile(np.atleast_2d(samples), PERCENTILES, axis=0).T


def write_percentiles_csv(path: Path, names: Sequence[str], samples: np.ndarray) -> None:
    table = percentile_table(samples)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["coordinate"] + [f"p{q}" for q in PERCENTILES])
        for name, row in zip(names, table):
            writer.writerow([name] + [repr(float(v)) for v in row])


def write_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
    logger.debug("wrote %s", path)
