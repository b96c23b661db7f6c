"""Configuration module."""

from config.loader import (
    Config,
    FilterConfig,
    RankingConfig,
    AnnealConfig,
    AnnealParams,
    ClassifierConfig,
    PipelineConfig,
    StorageConfig,
    LoggingConfig,
    default_alpha,
)

__all__ = [
    "Config",
    "FilterConfig",
    "RankingConfig",
    "AnnealConfig",
    "AnnealParams",
    "ClassifierConfig",
    "PipelineConfig",
    "StorageConfig",
    "LoggingConfig",
    "default_alpha",
]
