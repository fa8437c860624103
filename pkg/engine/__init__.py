"""Simulation engine: seeding, replication statistics and parameter sweeps."""

from .stats import EstimateWithCI, mean_ci, batch_means, wilson_interval
from .replication import ExperimentPlan, run_replicated, run_replications
from .sweep import SweepResult, run_sweep, sweep_points, point_seed

__all__ = [
    'EstimateWithCI', 'mean_ci', 'batch_means', 'wilson_interval',
    'ExperimentPlan', 'run_replicated', 'run_replications',
    'SweepResult', 'run_sweep', 'sweep_points', 'point_seed',
]
