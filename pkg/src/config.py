# pyright: reportExplicitAny=false
"""Run configuration for privpolar commands."""

from __future__ import annotations

import os
import re
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.errors import ConfigError
from src.oracle.exact import FrozenMode
from src.polar.codec import FrozenPolicy
from src.polar.construction import DEFAULT_BETA, DEFAULT_NUM_SAMPLES, ConstructionMode
from src.polar.timeshare import DEFAULT_EPSILON, DEFAULT_FROZEN_LIMIT
from src.source.model import DistortionMetric, ForwardChannel, JointSource
from src.source.presets import Preset, get_preset
from src.source.region import DEFAULT_GRID_RES, DEFAULT_REFINE_ITERS

OUTPUT_DIR_ENV = "PRIVPOLAR_OUTPUT_DIR"
_ENV_PATTERN = r"\$\{([^}]+)\}"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SourceConfig(_Section):
    """Either a named preset with parameters or an explicit joint pmf Q(x, y)."""

    preset: str | None = None
    params: dict[str, float] = Field(default_factory=dict)
    matrix: list[list[float]] | None = None

    @model_validator(mode="after")
    def exactly_one(self) -> SourceConfig:
        if (self.preset is None) == (self.matrix is None):
            raise ValueError("source needs exactly one of 'preset' or 'matrix'")
        return self


class DistortionKind(str, Enum):
    HAMMING = "hamming"
    MATRIX = "matrix"


class DistortionConfig(_Section):
    kind: DistortionKind = DistortionKind.HAMMING
    q: int | None = Field(
        default=None, description="Reconstruction alphabet size for hamming (default |X|)"
    )
    matrix: list[list[float]] | None = None

    @model_validator(mode="after")
    def matrix_given(self) -> DistortionConfig:
        if self.kind is DistortionKind.MATRIX and self.matrix is None:
            raise ValueError("distortion kind 'matrix' needs 'matrix'")
        return self


class ChannelKind(str, Enum):
    PRESET = "preset"
    EXPLICIT = "explicit"
    REGION = "region"


class ChannelConfig(_Section):
    """Test channel P(x_hat | x, y): the preset's, explicit rows, or a region query."""

    kind: ChannelKind = ChannelKind.PRESET
    matrix: list[list[float]] | None = Field(
        default=None, description="One row per (x, y) pair in row-major order"
    )
    d_max: float | None = None
    delta_min: float | None = None
    grid_res: int = DEFAULT_GRID_RES
    refine_iters: int = DEFAULT_REFINE_ITERS

    @model_validator(mode="after")
    def kind_fields(self) -> ChannelConfig:
        if self.kind is ChannelKind.EXPLICIT and self.matrix is None:
            raise ValueError("channel kind 'explicit' needs 'matrix'")
        if self.kind is ChannelKind.REGION and (self.d_max is None or self.delta_min is None):
            raise ValueError("channel kind 'region' needs 'd_max' and 'delta_min'")
        return self

    @field_validator("grid_res")
    @classmethod
    def validate_grid_res(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"grid_res must be >= 1, got {v}")
        return v


class PolarConfig(_Section):
    n: int = 1024
    beta: float = DEFAULT_BETA
    mode: ConstructionMode = ConstructionMode.RANK
    target_rate: float | None = None
    computable_size: int | None = None
    num_samples: int = DEFAULT_NUM_SAMPLES

    @field_validator("n")
    @classmethod
    def validate_n(cls, v: int) -> int:
        if v < 1 or v & (v - 1):
            raise ValueError(f"n must be a power of two, got {v}")
        return v

    @field_validator("beta")
    @classmethod
    def validate_beta(cls, v: float) -> float:
        if not 0.0 < v < 0.5:
            raise ValueError(f"beta must lie in (0, 1/2), got {v}")
        return v

    @field_validator("target_rate")
    @classmethod
    def validate_target_rate(cls, v: float | None) -> float | None:
        if v is not None and not 0.0 <= v <= 1.0:
            raise ValueError(f"target_rate must lie in [0, 1], got {v}")
        return v


def _default_output_dir() -> Path:
    return Path(os.getenv(OUTPUT_DIR_ENV) or "output")


class RunConfig(_Section):
    """A complete experiment description; unknown keys are rejected at every level."""

    source: SourceConfig
    distortion: DistortionConfig = Field(default_factory=DistortionConfig)
    channel: ChannelConfig = Field(default_factory=ChannelConfig)
    polar: PolarConfig = Field(default_factory=PolarConfig)
    trials: int = Field(default=1000, ge=1)
    frozen_policy: FrozenPolicy = FrozenPolicy.UNIFORM
    frozen_values: list[int] | None = None
    confidence: float = Field(default=0.95, gt=0.0, lt=1.0)
    seed: int = Field(default=0, ge=0)
    oracle_mode: FrozenMode = FrozenMode.UNIFORM
    epsilon: float = Field(default=DEFAULT_EPSILON, ge=0.0)
    frozen_limit: int = Field(default=DEFAULT_FROZEN_LIMIT, ge=1)
    output_dir: Path = Field(default_factory=_default_output_dir)
    per_trial_csv: bool = False

    @model_validator(mode="after")
    def validate_frozen_policy(self) -> RunConfig:
        if self.frozen_policy is FrozenPolicy.FIXED and self.frozen_values is None:
            raise ValueError("frozen_policy 'fixed' needs 'frozen_values'")
        if self.channel.kind is ChannelKind.PRESET and self.source.preset is None:
            raise ValueError("channel kind 'preset' needs a preset source")
        return self

    def preset(self) -> Preset | None:
        if self.source.preset is None:
            return None
        return get_preset(self.source.preset, **self.source.params)

    def build_source(self) -> JointSource:
        preset = self.preset()
        if preset is not None:
            return preset.source
        return JointSource(np.array(self.source.matrix, dtype=np.float64))

    def reconstruction_q(self, src: JointSource) -> int:
        """Alphabet size of X_hat implied by the distortion or channel section."""
        if self.distortion.kind is DistortionKind.MATRIX and self.distortion.matrix:
            return len(self.distortion.matrix[0])
        if self.distortion.q is not None:
            return self.distortion.q
        if self.channel.kind is ChannelKind.EXPLICIT and self.channel.matrix:
            return len(self.channel.matrix[0])
        preset = self.preset()
        if self.channel.kind is ChannelKind.PRESET and preset is not None:
            return preset.channel.q
        return src.nx

    def build_distortion(self, src: JointSource) -> DistortionMetric:
        if self.distortion.kind is DistortionKind.MATRIX:
            return DistortionMetric(np.array(self.distortion.matrix, dtype=np.float64))
        return DistortionMetric.hamming(src.nx, self.reconstruction_q(src))

    def explicit_channel(self, src: JointSource) -> ForwardChannel | None:
        """The channel when it needs no region search, else None."""
        match self.channel.kind:
            case ChannelKind.PRESET:
                preset = self.preset()
                assert preset is not None
                return preset.channel
            case ChannelKind.EXPLICIT:
                rows = np.array(self.channel.matrix, dtype=np.float64)
                if rows.ndim != 2 or rows.shape[0] != src.nx * src.ny:
                    raise ConfigError(
                        f"channel matrix needs {src.nx * src.ny} rows (one per (x, y)), "
                        + f"got shape {rows.shape}"
                    )
                return ForwardChannel(rows.reshape(src.nx, src.ny, -1))
            case ChannelKind.REGION:
                return None

    @classmethod
    def _collect_required_env_vars(cls, data: Any, collected: set[str] | None = None) -> set[str]:
        """Recursively collect all ${VAR_NAME} references from config data."""
        if collected is None:
            collected = set()

        if isinstance(data, dict):
            for v in data.values():
                cls._collect_required_env_vars(v, collected)
        elif isinstance(data, list):
            for item in data:
                cls._collect_required_env_vars(item, collected)
        elif isinstance(data, str):
            collected.update(re.findall(_ENV_PATTERN, data))

        return collected

    @classmethod
    def _substitute_env_vars(cls, data: Any) -> Any:
        """Recursively substitute ${VAR_NAME} with environment variables."""
        if isinstance(data, dict):
            return {k: cls._substitute_env_vars(v) for k, v in data.items()}
        elif isinstance(data, list):
            return [cls._substitute_env_vars(item) for item in data]
        elif isinstance(data, str):
            return re.sub(_ENV_PATTERN, lambda m: os.environ[m.group(1)], data)
        else:
            return data

    @classmethod
    def from_dict(cls, data: Any) -> RunConfig:
        """Validate an already-parsed mapping, converting pydantic errors to ConfigError."""
        if not isinstance(data, dict):
            raise ConfigError("Configuration must be a mapping at the top level")

        missing_vars = sorted(v for v in cls._collect_required_env_vars(data) if v not in os.environ)
        if missing_vars:
            raise ConfigError(
                f"Missing required environment variables: {', '.join(missing_vars)}\n"
                + "Please set these in your .env file or environment."
            )
        try:
            return cls.model_validate(cls._substitute_env_vars(data))
        except ValidationError as e:
            raise ConfigError(f"Invalid configuration:\n{e}") from e

    @classmethod
    def load(cls, config_path: str | Path = "config.yaml") -> RunConfig:
        """Load configuration from a YAML file.

        Note: Assumes environment variables are already loaded (e.g., via load_dotenv()).
        """
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"Configuration file not found: {config_path}")

        with open(path, "r") as f:
            try:
                data: Any = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise ConfigError(f"Could not parse {config_path}: {e}") from e

        return cls.from_dict(data)

    def with_overrides(self, seed: int | None = None) -> RunConfig:
        """Apply command-line overrides."""
        if seed is None:
            return self
        return self.model_copy(update={"seed": seed})
