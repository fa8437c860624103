"""HARQ power adaptation: the RTD chain, static outage-limited power allocation and the reinforcement controller."""

from .chain import (
    HarqConfig, StaticPowerPolicy, HarqChainState, HarqSimResult, decoding_threshold,
    max_achievable_rate, packet_decodes_at, simulate_harq_static, summarize_packets, policy_from_db,
    replicate_harq,
)
from .static_power import (
    stop_probabilities, outage_probability, outage_probability_joint, harq_average_power,
    uniform_power_for_outage, optimize_static_powers, default_power_grid,
)
from .reinforcement import (
    PowerControllerState, alg2_on_decode, alg2_on_failure, run_power_controllers,
    simulate_alg2, evaluate_alg2, tune_alg2, controller_from_policy, search_controllers, default_step_grids,
)

__all__ = [
    'HarqConfig', 'StaticPowerPolicy', 'HarqChainState', 'HarqSimResult', 'decoding_threshold',
    'max_achievable_rate', 'packet_decodes_at', 'simulate_harq_static', 'summarize_packets', 'policy_from_db',
    'replicate_harq',
    'stop_probabilities', 'outage_probability', 'outage_probability_joint', 'harq_average_power',
    'uniform_power_for_outage', 'optimize_static_powers', 'default_power_grid',
    'PowerControllerState', 'alg2_on_decode', 'alg2_on_failure', 'run_power_controllers',
    'simulate_alg2', 'evaluate_alg2', 'tune_alg2', 'controller_from_policy', 'search_controllers',
    'default_step_grids',
]
