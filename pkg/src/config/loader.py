"""
Configuration loader using Pydantic v2 settings.

Supports loading from:
- Environment variables (prefix: IP_)
- .env file
- config.toml file

Example environment variables:
    IP_FILTER__P0=0.05
    IP_RANKING__CAPACITY=128
    IP_ANNEAL__TAU=0.95
    IP_CLASSIFIER__THRESHOLD=0.4
    IP_PIPELINE__CONFLICT_THRESHOLD=0.2
    IP_STORAGE__SNAPSHOT_DIRECTORY=/var/lib/intel-prefusion
"""

import math
from pathlib import Path
from typing import Any, Optional, Tuple, Type

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

# Per-K alpha values of the reference annealing runs; any other K uses 0.
ALPHA_BY_CLUSTER_COUNT = {8: 1e-6, 9: 0.0, 10: 3e-7, 11: 3e-8}


def default_alpha(cluster_count: int) -> float:
    """Return the default alpha for a given number of clusters."""
    return ALPHA_BY_CLUSTER_COUNT.get(cluster_count, 0.0)


class FilterConfig(BaseModel):
    """Summarization filter configuration."""

    model_config = ConfigDict(frozen=True)

    p0: float = Field(default=0.01, gt=0.0, lt=1.0, description="Focal elements below p0 are moved to the frame")

    @property
    def focal_bound(self) -> int:
        """Maximum number of focal elements left by the filter."""
        return math.floor(1.0 / self.p0) + 1


class RankingConfig(BaseModel):
    """Uncertainty ranking (DB2) configuration."""

    model_config = ConfigDict(frozen=True)

    capacity: int = Field(default=256, ge=1, description="Number of reports admitted to clustering")
    aging_rate: float = Field(default=0.0, ge=0.0, description="Per-second inflation of |A|, 0 disables aging")


class AnnealConfig(BaseModel):
    """Mean-field annealing defaults, everything but the cluster count."""

    model_config = ConfigDict(frozen=True)

    gamma: float = Field(default=0.5, description="Self-coupling γ")
    alpha: Optional[float] = Field(default=None, ge=0.0, description="Balance term α; unset uses the per-K table")
    epsilon: float = Field(default=0.001, ge=0.0, description="Noise amplitude ε")
    tau: float = Field(default=0.9, gt=0.0, lt=1.0, description="Cooling factor τ")
    inner_tol: float = Field(default=0.01, gt=0.0, description="Fixed-point tolerance of the inner loop")
    saturation: float = Field(default=0.99, gt=0.0, lt=1.0, description="Saturation (1/N)ΣV² ending the outer loop")
    max_outer: int = Field(default=1000, ge=1, description="Cap on temperature steps")
    max_inner: int = Field(default=1000, ge=1, description="Cap on sweeps per temperature")
    seed: int = Field(default=0, ge=0, description="Seed of the PCG64 generator")

    @model_validator(mode="after")
    def validate_tolerances(self) -> "AnnealConfig":
        """The inner tolerance must be reachable before the spins saturate."""
        if self.inner_tol >= 2.0:
            raise ValueError("inner_tol must be below 2, the largest possible per-row change")
        return self

    def for_clusters(self, cluster_count: int, seed: Optional[int] = None) -> "AnnealParams":
        """
        Build the full parameter set for one annealing run.

        Args:
            cluster_count: Number of clusters K.
            seed: Optional seed overriding the configured one.

        Returns:
            AnnealParams with alpha resolved from the per-K table when unset.
        """
        values = self.model_dump()
        values["cluster_count"] = cluster_count
        if values["alpha"] is None:
            values["alpha"] = default_alpha(cluster_count)
        if seed is not None:
            values["seed"] = seed
        return AnnealParams(**values)


class AnnealParams(AnnealConfig):
    """Parameters of one annealing run."""

    cluster_count: int = Field(ge=1, description="Number of clusters K")
    alpha: float = Field(default=0.0, ge=0.0)


class ClassifierConfig(BaseModel):
    """Prototype extraction and fast classification configuration."""

    model_config = ConfigDict(frozen=True)

    proto_count: int = Field(default=3, ge=1, description="Prototypes kept per cluster")
    threshold: float = Field(default=0.5, gt=0.0, le=1.0, description="Rejection threshold on m(e ∉ χ_j)")


class PipelineConfig(BaseModel):
    """Orchestrator configuration."""

    model_config = ConfigDict(frozen=True)

    conflict_threshold: float = Field(default=0.2, gt=0.0, lt=1.0, description="Per-subset conflict threshold")
    initial_q: int = Field(default=2, ge=2, description="Initial number of subsets")
    epoch_every: int = Field(default=64, ge=1, description="Run a clustering epoch every N ingested reports")
    seed: int = Field(default=0, ge=0, description="Base seed; epoch e anneals with seed + e")


class StorageConfig(BaseModel):
    """Snapshot storage configuration."""

    snapshot_directory: Optional[Path] = Field(default=None, description="Directory for DB1/DB2 snapshots")

    @field_validator("snapshot_directory", mode="before")
    @classmethod
    def convert_to_path(cls, v: Any) -> Optional[Path]:
        """Convert string to Path."""
        if isinstance(v, str):
            return Path(v) if v else None
        return v


class LoggingConfig(BaseModel):
    """Logging configuration."""

    level: str = Field(default="INFO", description="Root log level")
    epoch_log: Optional[Path] = Field(default=None, description="File receiving epoch summaries as JSON lines")

    @field_validator("level")
    @classmethod
    def validate_level(cls, v: str) -> str:
        """Validate the level name."""
        level = v.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Unknown log level: {v}")
        return level


class Config(BaseSettings):
    """
    Main application configuration.

    Loads from environment variables (IP_ prefix), .env file, and config.toml.
    """

    model_config = SettingsConfigDict(
        env_prefix="IP_",
        env_nested_delimiter="__",
        env_file=".env",
        env_file_encoding="utf-8",
        toml_file="config.toml",
        extra="ignore",
    )

    filter: FilterConfig = Field(default_factory=FilterConfig)
    ranking: RankingConfig = Field(default_factory=RankingConfig)
    anneal: AnnealConfig = Field(default_factory=AnnealConfig)
    classifier: ClassifierConfig = Field(default_factory=ClassifierConfig)
    pipeline: PipelineConfig = Field(default_factory=PipelineConfig)
    storage: StorageConfig = Field(default_factory=StorageConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        """Customize settings sources to include TOML."""
        return (
            init_settings,
            env_settings,
            dotenv_settings,
            TomlConfigSettingsSource(settings_cls),
        )

    @classmethod
    def load(cls, toml_path: Optional[str | Path] = None) -> "Config":
        """
        Load configuration from all sources.

        Args:
            toml_path: Optional path to TOML config file (defaults to config.toml).

        Returns:
            Loaded Config instance.
        """
        if not toml_path:
            return cls()
        # The TOML source reads its path from model_config; restore it afterwards.
        previous = cls.model_config.get("toml_file")
        cls.model_config["toml_file"] = str(toml_path)
        try:
            return cls()
        finally:
            cls.model_config["toml_file"] = previous
