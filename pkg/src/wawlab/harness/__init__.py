"""Configuration, scenario runners and the ``waw-lab`` command line."""
from .config import ConfigError, ExperimentConfig, load_config
from .scenarios import SCENARIOS, run

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "SCENARIOS", "run"]
