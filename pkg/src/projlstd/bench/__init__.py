"""Experiment harness: configs, estimator sweeps, timing and verification suites."""

from .config import ConfigError, ExperimentConfig, from_dict, load

__all__ = ["ConfigError", "ExperimentConfig", "from_dict", "load"]
