"""Experiment harness: configs, runners, result files and the ``rptlab`` CLI."""
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, derive_seed
from .experiments import replay_row, run_experiment, write_results
from .io import DatasetParseError, load_dataset, write_dataset

__all__ = [
    "EXPERIMENTS",
    "ConfigError",
    "ExperimentConfig",
    "derive_seed",
    "run_experiment",
    "write_results",
    "replay_row",
    "DatasetParseError",
    "load_dataset",
    "write_dataset",
]
