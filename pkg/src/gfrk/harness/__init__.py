"""Run configuration, experiment drivers and the command-line front end."""

from gfrk.harness.config import ConfigError, InitialCondition, RunConfig, format_config, load_config, parse_config
from gfrk.harness.experiments import *  # noqa: F401,F403
from gfrk.harness.experiments import __all__ as _experiments_all

__all__ = [
    "ConfigError",
    "InitialCondition",
    "RunConfig",
    "format_config",
    "load_config",
    "parse_config",
    *_experiments_all,
]
