"""Rate adaptation: static CSI quantization baselines and the 1-bit reinforcement controller."""

from .quantizer import (
    QuantizerConfig, ThroughputResult, static_throughput, throughput_of_thresholds,
    optimize_static_quantizer, throughput_no_csit, throughput_perfect_csit, no_csit_threshold,
    simulate_static_quantizer, simulate_single_rate,
)
from .reinforcement import (
    Timing, RateControllerState, alg1_feedback, alg1_update, run_rate_controllers,
    simulate_alg1, evaluate_alg1, tune_alg1,
)

__all__ = [
    'QuantizerConfig', 'ThroughputResult', 'static_throughput', 'throughput_of_thresholds',
    'optimize_static_quantizer', 'throughput_no_csit', 'throughput_perfect_csit', 'no_csit_threshold',
    'simulate_static_quantizer', 'simulate_single_rate',
    'Timing', 'RateControllerState', 'alg1_feedback', 'alg1_update', 'run_rate_controllers',
    'simulate_alg1', 'evaluate_alg1', 'tune_alg1',
]
