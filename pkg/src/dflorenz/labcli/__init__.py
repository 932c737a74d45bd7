from .config import ExperimentConfig, load_config
from .report import ReportBundle, emit
from .suites import run_experiment

__all__ = ["ExperimentConfig", "load_config", "ReportBundle", "emit", "run_experiment"]
