"""
Replicated Monte Carlo runs
Seeds replications as base_seed + i and aggregates them into 95% CIs
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from numbers import Real
from typing import Callable, Dict, List, Mapping, Union

import pandas as pd
from loguru import logger

from utils.errors import ReplicationError
from .stats import EstimateWithCI, mean_ci

Metrics = Union[float, Mapping[str, float]]


@dataclass(frozen=True)
class ExperimentPlan:
    """Seeds, replication count, run length and optional sweep axes"""
    base_seed: int
    replications: int
    slots_or_packets: int
    sweep_axes: Dict[str, List] = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        if self.base_seed < 0:
            raise ValueError("base_seed must be non-negative")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.slots_or_packets < 1:
            raise ValueError("slots_or_packets must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        for name, values in self.sweep_axes.items():
            if len(values) == 0:
                raise ValueError(f"sweep axis '{name}' is empty")

    def seeds(self) -> List[int]:
        return [self.base_seed + i for i in range(self.replications)]


def _run_one(simulation: Callable[[int, int], Metrics], seed: int, size: int) -> Metrics:
    try:
        return simulation(seed, size)
    except Exception as e:
        raise ReplicationError(f"replication failed: {e}", seed=seed) from e


def run_replications(simulation: Callable[[int, int], Metrics], plan: ExperimentPlan) -> pd.DataFrame:
    """
    Raw per-replication outputs, one row per seed in seed order

    Args:
        simulation: f(seed, slots_or_packets) -> number or mapping of metrics
        plan: Experiment plan

    Returns:
        DataFrame indexed by seed

    Raises:
        ReplicationError: first failing replication, with its seed
    """
    seeds = plan.seeds()
    size = plan.slots_or_packets
    if plan.workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            outputs = list(pool.map(lambda s: _run_one(simulation, s, size), seeds))
    else:
        outputs = [_run_one(simulation, s, size) for s in seeds]

    rows = [{'value': o} if isinstance(o, Real) else dict(o) for o in outputs]
    return pd.DataFrame(rows, index=pd.Index(seeds, name='seed'))


def run_replicated(simulation: Callable[[int, int], Metrics],
                   plan: ExperimentPlan) -> Union[EstimateWithCI, Dict[str, EstimateWithCI]]:
    """
    Grand mean and 95% CI over independent replications

    Replication-level means are used (not per-slot variance) because slots
    inside one fading trace are correlated.

    Args:
        simulation: f(seed, slots_or_packets) -> number or mapping of metrics
        plan: Experiment plan

    Returns:
        EstimateWithCI for scalar simulations, dict of them for mappings
    """
    table = run_replications(simulation, plan)
    logger.debug(f"Completed {len(table)} replications from seed {plan.base_seed}")
    estimates = {col: mean_ci(table[col].to_numpy()) for col in table.columns}
    if list(estimates) == ['value']:
        return estimates['value']
    return estimates
