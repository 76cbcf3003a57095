"""Configuration management for lowdim."""

import json
import sys
from pathlib import Path
from typing import Any, Dict, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigurationError


class TemplateSpec(BaseModel):
    """Structure of the maps to fit."""

    degree: int = Field(default=2, ge=1)
    rectifier: Literal["shifted-square", "exp"] = "shifted-square"
    a_basis: Literal["hermite", "linear"] = "hermite"
    b_basis: Literal["hermite-function", "hermite", "linear"] = "hermite-function"
    sparsity: Literal["none", "graph-file", "auto"] = "none"
    graph_file: Optional[Path] = None

    @model_validator(mode="after")
    def _graph_file_present(self) -> "TemplateSpec":
        if self.sparsity == "graph-file" and self.graph_file is None:
            raise ValueError("sparsity 'graph-file' needs graph_file")
        return self


class ReferenceSpec(BaseModel):
    """Discretization of the reference measure."""

    kind: Literal["auto", "gauss-hermite", "monte-carlo"] = "auto"
    order: int = Field(default=10, ge=1)
    samples: int = Field(default=5000, ge=1)


class OptimizerSpec(BaseModel):
    """Quasi-Newton settings for map fitting."""

    method: Literal["bfgs", "newton-cg"] = "bfgs"
    gtol: float = Field(default=1e-6, gt=0.0)
    max_iterations: int = Field(default=500, ge=1)


class ModelSpec(BaseModel):
    """Built-in state-space model and its parameters.

    Linear-Gaussian models read ``F``, ``Q``, ``H``, ``R``, ``mu0`` and
    ``Gamma0``; stochastic-volatility models read optional fixed ``mu`` and
    ``phi`` (static parameters are inferred when they are absent).
    """

    kind: Literal["linear-gaussian", "stochastic-volatility"]
    params: Dict[str, Any] = {}

    @model_validator(mode="after")
    def _check_params(self) -> "ModelSpec":
        if self.kind == "linear-gaussian":
            missing = {"F", "Q", "H", "R", "mu0", "Gamma0"} - set(self.params)
            if missing:
                raise ValueError(f"linear-gaussian model missing {sorted(missing)}")
            for name in ("Q", "R", "Gamma0"):
                matrix = np.atleast_2d(np.asarray(self.params[name], dtype=float))
                if not np.allclose(matrix, matrix.T) or np.any(
                    np.linalg.eigvalsh(matrix) <= 0.0
                ):
                    raise ValueError(f"{name} must be symmetric positive definite")
        return self


class TargetSpec(BaseModel):
    """Entry of the built-in target registry."""

    name: str = "standard-normal"
    dim: Optional[int] = None
    params: Dict[str, Any] = {}


class AssimilationSpec(BaseModel):
    """Options of sequential assimilation."""

    closed_form: bool = False
    fixed_point: bool = False
    halt_on_nonconvergence: bool = False
    regression_samples: int = Field(default=2000, ge=1)


class RunConfig(BaseModel):
    """Main configuration class for lowdim."""

    template: TemplateSpec = TemplateSpec()
    reference: ReferenceSpec = ReferenceSpec()
    optimizer: OptimizerSpec = OptimizerSpec()
    assimilation: AssimilationSpec = AssimilationSpec()
    model: Optional[ModelSpec] = None
    target: TargetSpec = TargetSpec()
    seed: Optional[int] = None
    threads: Optional[int] = Field(default=None, ge=1)
    output_dir: Path = Path("lowdim-output")

    @model_validator(mode="after")
    def _seed_for_monte_carlo(self) -> "RunConfig":
        if self.reference.kind == "monte-carlo" and self.seed is None:
            raise ValueError("a seed is required with a monte-carlo reference")
        return self

    @property
    def effective_seed(self) -> int:
        return 0 if self.seed is None else self.seed

    @classmethod
    def load_from_file(cls, config_path: Optional[Path] = None) -> "RunConfig":
        """Load settings from a TOML or JSON configuration file.

        Args:
            config_path: Path to config file. If None, uses default locations.

        Returns:
            RunConfig instance.

        Raises:
            ConfigurationError: If the file cannot be parsed or validated.
        """
        if config_path is None:
            candidates = [
                Path.home() / ".config" / "lowdim" / "config.toml",
                Path("/etc/lowdim/config.toml"),
                Path.cwd() / "lowdim.toml",
            ]
            for candidate in candidates:
                if candidate.exists():
                    config_path = candidate
                    break

        if config_path and config_path.exists():
            return cls.from_mapping(read_config_mapping(config_path))

        return cls()

    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> "RunConfig":
        try:
            return cls(**data)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc

    def save_to_file(self, config_path: Path) -> None:
        """Save settings to a JSON configuration file.

        Args:
            config_path: Path where to save the config.
        """
        config_path.parent.mkdir(parents=True, exist_ok=True)
        with open(config_path, "w") as f:
            json.dump(self.model_dump(mode="json"), f, indent=2)


def read_config_mapping(config_path: Path) -> Dict[str, Any]:
    """Parse a TOML (``.toml``) or JSON file into a dictionary."""
    try:
        if config_path.suffix == ".toml":
            with open(config_path, "rb") as f:
                return tomllib.load(f)
        with open(config_path, "r") as f:
            return json.load(f)
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read {config_path}: {exc}") from exc
