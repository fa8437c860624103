"""Utilities module for logging, configuration and errors."""

from .logging_setup import setup_logging
from .config import load_config, default_config, flatten_config, config_digest
from .errors import (
    LinkSimError, ConfigError, InfeasibleError, ConvergenceError,
    DegenerateDensityError, ReplicationError, SweepError,
)
from .units import db_to_linear, linear_to_db

__all__ = [
    'setup_logging', 'load_config', 'default_config', 'flatten_config', 'config_digest',
    'LinkSimError', 'ConfigError', 'InfeasibleError', 'ConvergenceError',
    'DegenerateDensityError', 'ReplicationError', 'SweepError',
    'db_to_linear', 'linear_to_db',
]
