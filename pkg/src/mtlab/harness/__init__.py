"""Configuration, experiment registry, persistence and reports."""
from .config import ExperimentConfig, load_config, parse_config, save_config
from .experiments import Check, Report, run_experiment
from .suite import build_suite, verify_all

__all__ = ["ExperimentConfig", "load_config", "parse_config", "save_config", "Check", "Report",
           "run_experiment", "build_suite", "verify_all"]
