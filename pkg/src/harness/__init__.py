"""
Experiment harness: configs, seeded replicate runs, regret fits and the CLI.
"""

from .config import ExperimentConfig, load_experiment_config, load_harness_defaults, parse_experiment_config
from .experiment import ExperimentRunner, run_cell, run_experiment
from .fitting import FitResult, RegretSeries, fit_regret_exponent

__all__ = [
    "ExperimentConfig",
    "ExperimentRunner",
    "FitResult",
    "RegretSeries",
    "fit_regret_exponent",
    "load_experiment_config",
    "load_harness_defaults",
    "parse_experiment_config",
    "run_cell",
    "run_experiment",
]
