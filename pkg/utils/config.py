"""
Configuration loading and validation
Reads config.yaml, merges it over the defaults, flattens it to dotted keys
and checks every value before anything is simulated
"""

import copy
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional

import yaml
from loguru import logger

from .errors import ConfigError


SCHEMES = ("static-quantizer", "alg1", "harq-static", "harq-uniform", "alg2")
ACTIONS = ("evaluate", "tune")
TIMINGS = ("same_block", "next_block")

DEFAULT_CONFIG: Dict[str, Any] = {
    'channel': {
        'beta': 0.9,
    },
    'simulation': {
        'seed': 2014,
        'replications': 20,
        'slots': 50000,
        'packets': 50000,
        'workers': 4,
    },
    'rate_adapt': {
        'snr_db': 10.0,
        'timing': 'same_block',
        'initial_rate': 1.0,
        'delta': 0.1,
        'rate_floor': 1.0e-3,
        'quantizer_levels': 2,
        'thresholds': [],
        'search': {
            'rate_min': 0.1,
            'rate_max': 6.0,
            'rate_points': 60,
            'delta_min': 0.01,
            'delta_max': 0.5,
            'delta_points': 50,
            'refinement_rounds': 2,
            'search_slots': 100000,
            'eval_slots': 1000000,
        },
        'quantizer_search': {
            'threshold_max': 8.0,
            'points': 201,
            'refinement_rounds': 3,
            'coordinate_sweeps': 20,
        },
    },
    'harq': {
        'rate': 1.0,
        'max_rounds': 2,
        'outage_target': 0.01,
        'powers_db': [],
        'power_floor': 1.0e-6,
        'power_cap': 1.0e6,
        'independent_packets': True,
        'controller': {
            'initial_power_db': 10.0,
            'd': [0.02, 0.3],
            'd_up': [0.3, 0.5],
        },
        'search': {
            'power_span_db': 10.0,
            'power_points': 25,
            'd_min': 0.05,
            'd_max': 0.95,
            'd_points': 10,
            'd_up_min': 0.05,
            'd_up_max': 20.0,
            'd_up_points': 10,
            'product_budget': 4096,
            'refinement_rounds': 2,
            'sweeps': 3,
            'search_packets': 100000,
            'eval_packets': 1000000,
            'validation_attempts': 3,
        },
        'static_search': {
            'power_span_db': 10.0,
            'power_points': 41,
            'refinement_rounds': 3,
            'mc_packets': 200000,
        },
    },
    'experiment': {
        'scheme': 'alg1',
        'action': 'evaluate',
    },
    'figures': {
        'fig1': {
            'beta': 0.9,
            'snr_db': [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0],
            'next_block': True,
        },
        'fig2': {
            'betas': [0.2, 0.5, 0.8, 0.9, 0.95],
            'snr_db': [4.0, 8.0, 12.0, 16.0],
        },
        'fig3': {
            'beta': 0.9,
            'rate': 1.0,
            'max_rounds': 2,
            'epsilons': [0.1, 0.0316227766, 0.01, 0.00316227766],
        },
    },
    'output': {
        'dir': 'results',
    },
    'logging': {
        'level': 'INFO',
        'log_file': 'logs/linksim.log',
        'max_log_size_mb': 10,
        'backup_count': 5,
    },
}


# Validators ---------------------------------------------------------------

def _real(lo: float = -math.inf, hi: float = math.inf,
          lo_open: bool = False, hi_open: bool = False) -> Callable[[Any], float]:
    def check(value: Any) -> float:
        if isinstance(value, str):
            # YAML 1.1 reads exponents without a dot ("1e-06") as strings
            try:
                value = float(value)
            except ValueError:
                raise ValueError(f"expected a number, got {value!r}") from None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ValueError("must be finite")
        if value < lo or (lo_open and value == lo):
            raise ValueError(f"must be {'>' if lo_open else '>='} {lo}")
        if value > hi or (hi_open and value == hi):
            raise ValueError(f"must be {'<' if hi_open else '<='} {hi}")
        return value
    return check


def _integer(lo: int = 0) -> Callable[[Any], int]:
    def check(value: Any) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError(f"expected an integer, got {value!r}")
        if value < lo:
            raise ValueError(f"must be >= {lo}")
        return value
    return check


def _choice(options) -> Callable[[Any], str]:
    def check(value: Any) -> str:
        if value not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return value
    return check


def _real_list(item: Callable[[Any], float], allow_empty: bool = True) -> Callable[[Any], list]:
    def check(value: Any) -> list:
        if not isinstance(value, (list, tuple)):
            raise ValueError(f"expected a list, got {value!r}")
        if not value and not allow_empty:
            raise ValueError("must not be empty")
        return [item(v) for v in value]
    return check


def _boolean(value: Any) -> bool:
    if not isinstance(value, bool):
        raise ValueError(f"expected true/false, got {value!r}")
    return value


def _text(value: Any) -> str:
    if not isinstance(value, str):
        raise ValueError(f"expected a string, got {value!r}")
    return value


def _optional_text(value: Any) -> Optional[str]:
    return None if value in (None, "") else _text(value)


_probability = _real(0.0, 1.0, lo_open=True, hi_open=True)
_positive = _real(0.0, lo_open=True)
_unit_open = _real(0.0, 1.0, lo_open=True, hi_open=True)

SCHEMA: Dict[str, Callable[[Any], Any]] = {
    'channel.beta': _real(0.0, 1.0),
    'simulation.seed': _integer(0),
    'simulation.replications': _integer(1),
    'simulation.slots': _integer(1),
    'simulation.packets': _integer(1),
    'simulation.workers': _integer(1),
    'rate_adapt.snr_db': _real(-50.0, 80.0),
    'rate_adapt.timing': _choice(TIMINGS),
    'rate_adapt.initial_rate': _positive,
    'rate_adapt.delta': _unit_open,
    'rate_adapt.rate_floor': _positive,
    'rate_adapt.quantizer_levels': _integer(1),
    'rate_adapt.thresholds': _real_list(_real(0.0)),
    'rate_adapt.search.rate_min': _positive,
    'rate_adapt.search.rate_max': _positive,
    'rate_adapt.search.rate_points': _integer(2),
    'rate_adapt.search.delta_min': _unit_open,
    'rate_adapt.search.delta_max': _unit_open,
    'rate_adapt.search.delta_points': _integer(2),
    'rate_adapt.search.refinement_rounds': _integer(0),
    'rate_adapt.search.search_slots': _integer(1),
    'rate_adapt.search.eval_slots': _integer(1),
    'rate_adapt.quantizer_search.threshold_max': _positive,
    'rate_adapt.quantizer_search.points': _integer(2),
    'rate_adapt.quantizer_search.refinement_rounds': _integer(0),
    'rate_adapt.quantizer_search.coordinate_sweeps': _integer(1),
    'harq.rate': _positive,
    'harq.max_rounds': _integer(1),
    'harq.outage_target': _probability,
    'harq.powers_db': _real_list(_real(-100.0, 100.0)),
    'harq.power_floor': _positive,
    'harq.power_cap': _positive,
    'harq.independent_packets': _boolean,
    'harq.controller.initial_power_db': _real(-100.0, 100.0),
    'harq.controller.d': _real_list(_real(0.0, 1.0, hi_open=True), allow_empty=False),
    'harq.controller.d_up': _real_list(_real(0.0), allow_empty=False),
    'harq.search.power_span_db': _positive,
    'harq.search.power_points': _integer(2),
    'harq.search.d_min': _unit_open,
    'harq.search.d_max': _unit_open,
    'harq.search.d_points': _integer(2),
    'harq.search.d_up_min': _positive,
    'harq.search.d_up_max': _positive,
    'harq.search.d_up_points': _integer(2),
    'harq.search.product_budget': _integer(16),
    'harq.search.refinement_rounds': _integer(0),
    'harq.search.sweeps': _integer(1),
    'harq.search.search_packets': _integer(1),
    'harq.search.eval_packets': _integer(1),
    'harq.search.validation_attempts': _integer(1),
    'harq.static_search.power_span_db': _positive,
    'harq.static_search.power_points': _integer(2),
    'harq.static_search.refinement_rounds': _integer(0),
    'harq.static_search.mc_packets': _integer(1),
    'experiment.scheme': _choice(SCHEMES),
    'experiment.action': _choice(ACTIONS),
    'figures.fig1.beta': _real(0.0, 1.0),
    'figures.fig1.snr_db': _real_list(_real(-50.0, 80.0), allow_empty=False),
    'figures.fig1.next_block': _boolean,
    'figures.fig2.betas': _real_list(_real(0.0, 1.0), allow_empty=False),
    'figures.fig2.snr_db': _real_list(_real(-50.0, 80.0), allow_empty=False),
    'figures.fig3.beta': _real(0.0, 1.0),
    'figures.fig3.rate': _positive,
    'figures.fig3.max_rounds': _integer(1),
    'figures.fig3.epsilons': _real_list(_probability, allow_empty=False),
    'output.dir': _text,
    'logging.level': _choice(("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL")),
    'logging.log_file': _optional_text,
    'logging.max_log_size_mb': _integer(1),
    'logging.backup_count': _integer(0),
}


def flatten_config(config: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    """
    Flatten nested sections into dotted keys

    Lists are leaves, so 'harq.controller.d' stays a list.
    """
    flat: Dict[str, Any] = {}
    for key, value in config.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(flatten_config(value, prefix=f"{dotted}."))
        else:
            flat[dotted] = value
    return flat


def unflatten_config(flat: Mapping[str, Any]) -> Dict[str, Any]:
    """Rebuild the nested section layout from dotted keys"""
    nested: Dict[str, Any] = {}
    for dotted, value in flat.items():
        node = nested
        *sections, leaf = dotted.split(".")
        for section in sections:
            node = node.setdefault(section, {})
        node[leaf] = value
    return nested


def validate_config(flat: Mapping[str, Any]) -> Dict[str, Any]:
    """
    Check every dotted key against the schema

    Args:
        flat: Dotted-key configuration

    Returns:
        New dotted-key dictionary with normalized values

    Raises:
        ConfigError: unknown key, wrong type, or value out of range
    """
    unknown = sorted(set(flat) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"Unknown configuration key(s): {', '.join(unknown)}")

    checked = {}
    for key, check in SCHEMA.items():
        try:
            checked[key] = check(flat[key])
        except KeyError:
            raise ConfigError(f"Missing configuration key: {key}") from None
        except ValueError as e:
            raise ConfigError(f"{key}: {e}") from None

    # Cross-field checks
    if checked['rate_adapt.search.rate_min'] >= checked['rate_adapt.search.rate_max']:
        raise ConfigError("rate_adapt.search.rate_min must be below rate_max")
    if checked['rate_adapt.search.delta_min'] >= checked['rate_adapt.search.delta_max']:
        raise ConfigError("rate_adapt.search.delta_min must be below delta_max")
    if checked['harq.search.d_min'] >= checked['harq.search.d_max']:
        raise ConfigError("harq.search.d_min must be below d_max")
    if checked['harq.search.d_up_min'] >= checked['harq.search.d_up_max']:
        raise ConfigError("harq.search.d_up_min must be below d_up_max")
    if checked['harq.power_floor'] >= checked['harq.power_cap']:
        raise ConfigError("harq.power_floor must be below harq.power_cap")

    thresholds = checked['rate_adapt.thresholds']
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ConfigError("rate_adapt.thresholds must be strictly increasing")

    rounds = checked['harq.max_rounds']
    powers = checked['harq.powers_db']
    if powers and len(powers) != rounds:
        raise ConfigError(f"harq.powers_db needs {rounds} entries, got {len(powers)}")

    return checked


def load_config(config_path: Optional[str] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    """
    Load, merge and validate the run configuration

    Args:
        config_path: YAML file (read as JSON when it ends in .json);
            None uses the built-in defaults only
        overrides: Dotted-key values applied last (command-line flags)

    Returns:
        Validated nested configuration dictionary

    Raises:
        ConfigError: unreadable file or invalid content
    """
    flat = flatten_config(DEFAULT_CONFIG)

    if config_path is not None:
        path = Path(config_path)
        try:
            with open(path, 'r') as f:
                # echoed JSON inputs are read back as JSON
                loaded = (json.load(f) if path.suffix.lower() == '.json' else yaml.safe_load(f)) or {}
        except OSError as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"Malformed JSON in {path}: {e}") from None
        except yaml.YAMLError as e:
            raise ConfigError(f"Malformed YAML in {path}: {e}") from None
        if not isinstance(loaded, Mapping):
            raise ConfigError(f"{path} must contain a mapping of sections")
        flat.update(flatten_config(loaded))

    if overrides:
        flat.update({k: v for k, v in overrides.items() if v is not None})

    config = unflatten_config(validate_config(flat))
    logger.debug(f"Configuration loaded from {config_path or 'defaults'}")
    return config


def config_digest(config: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical (sorted, dotted-key) configuration"""
    canonical = json.dumps(flatten_config(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def default_config() -> Dict[str, Any]:
    """Deep copy of the validated defaults, handy for tests and scripts"""
    return copy.deepcopy(unflatten_config(validate_config(flatten_config(DEFAULT_CONFIG))))
