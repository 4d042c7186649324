"""Experiments, configuration, reports and the command line."""

from .config import ExperimentConfig, load_config
from .experiments import EXPERIMENTS, experiment_config, run_experiment
from .report import Assertion, ExperimentReport

__all__ = ["Assertion", "EXPERIMENTS", "ExperimentConfig", "ExperimentReport",
           "experiment_config", "load_config", "run_experiment"]
