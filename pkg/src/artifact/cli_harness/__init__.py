"""Batch driver: configs, experiments, result records, plots and the CLI."""

from .config import ConfigError, ExperimentConfig, default_config, load_config, load_manifest
from .records import ResultRecord

__all__ = ["ConfigError", "ExperimentConfig", "ResultRecord", "default_config", "load_config", "load_manifest"]
