"""
Scheme dispatch for the simulate / optimize commands
Builds domain objects from the validated configuration and runs one
scheme with one action
"""

from typing import Any, Dict, Optional

import numpy as np
from loguru import logger

from channel.fading import FadingParams, gain_trajectory
from engine.replication import ExperimentPlan, run_replicated
from harq import (
    HarqConfig, PowerControllerState, StaticPowerPolicy, evaluate_alg2, harq_average_power,
    optimize_static_powers, outage_probability, policy_from_db, replicate_harq, simulate_harq_static,
    stop_probabilities, tune_alg2, uniform_power_for_outage,
)
from harq.static_power import default_power_grid
from numerics.search import SearchGrid
from rate_adapt import (
    QuantizerConfig, RateControllerState, Timing, evaluate_alg1, optimize_static_quantizer,
    simulate_static_quantizer, static_throughput, tune_alg1,
)
from utils.config import ACTIONS, SCHEMES
from utils.errors import ConfigError, InfeasibleError
from utils.units import db_to_linear, linear_to_db


# Builders ------------------------------------------------------------------

def fading_params(config: dict, beta: Optional[float] = None, seed: Optional[int] = None) -> FadingParams:
    return FadingParams(beta=config['channel']['beta'] if beta is None else beta,
                        seed=config['simulation']['seed'] if seed is None else seed)


def harq_config(config: dict, rate: Optional[float] = None, max_rounds: Optional[int] = None,
                outage_target: Optional[float] = None) -> HarqConfig:
    section = config['harq']
    return HarqConfig(rate=section['rate'] if rate is None else rate,
                      max_rounds=section['max_rounds'] if max_rounds is None else max_rounds,
                      outage_target=section['outage_target'] if outage_target is None else outage_target)


def rate_grids(config: dict):
    """(initial-rate grid, delta grid) for tuning Algorithm 1"""
    s = config['rate_adapt']['search']
    rounds = s['refinement_rounds']
    return (SearchGrid(s['rate_min'], s['rate_max'], s['rate_points'], refinement_rounds=rounds),
            SearchGrid(s['delta_min'], s['delta_max'], s['delta_points'], refinement_rounds=rounds))


def quantizer_grid(config: dict) -> SearchGrid:
    s = config['rate_adapt']['quantizer_search']
    return SearchGrid(0.0, s['threshold_max'], s['points'], refinement_rounds=s['refinement_rounds'])


def harq_grids(config: dict, center: float):
    """(P_initial grid, d grid, d' grid) for tuning Algorithm 2"""
    s = config['harq']['search']
    rounds = s['refinement_rounds']
    return (default_power_grid(center, s['power_span_db'], s['power_points'], rounds),
            SearchGrid(s['d_min'], s['d_max'], s['d_points'], refinement_rounds=rounds),
            SearchGrid(s['d_up_min'], s['d_up_max'], s['d_up_points'], refinement_rounds=rounds,
                       log_scale=True))


def static_power_grid(config: dict, center: float) -> SearchGrid:
    s = config['harq']['static_search']
    return default_power_grid(center, s['power_span_db'], s['power_points'], s['refinement_rounds'])


def replication_plan(config: dict, total: int, base_seed: int, workers: Optional[int] = None) -> ExperimentPlan:
    """Split `total` slots or packets over the configured replication count"""
    replications = config['simulation']['replications']
    return ExperimentPlan(base_seed=base_seed, replications=replications,
                          slots_or_packets=max(1, total // replications),
                          workers=config['simulation']['workers'] if workers is None else workers)


def rate_controller(config: dict) -> RateControllerState:
    section = config['rate_adapt']
    return RateControllerState(rate=section['initial_rate'], delta=section['delta'],
                               timing=Timing(section['timing']), rate_floor=section['rate_floor'])


def power_controller(config: dict) -> PowerControllerState:
    section = config['harq']
    rounds = section['max_rounds']
    for key in ('d', 'd_up'):
        if len(section['controller'][key]) != rounds:
            raise ConfigError(f"harq.controller.{key} needs {rounds} entries (one per round), "
                              f"got {len(section['controller'][key])}")
    return PowerControllerState(power=float(db_to_linear(section['controller']['initial_power_db'])),
                                d=tuple(section['controller']['d']),
                                d_up=tuple(section['controller']['d_up']),
                                power_floor=section['power_floor'], power_cap=section['power_cap'])


def configured_policy(config: dict) -> StaticPowerPolicy:
    powers_db = config['harq']['powers_db']
    if not powers_db:
        raise ConfigError("harq.powers_db is required to evaluate a static HARQ policy")
    return policy_from_db(powers_db)


# HARQ helpers ------------------------------------------------------------------

def optimized_static_policy(config: dict, params: FadingParams, hconfig: HarqConfig,
                            center: float) -> Optional[StaticPowerPolicy]:
    """Configured static power search around `center`; None when the target is out of reach"""
    section = config['harq']
    try:
        return optimize_static_powers(params, hconfig, static_power_grid(config, center), section['power_cap'],
                                      section['power_floor'], section['static_search']['mc_packets'])
    except InfeasibleError:
        return None


def validate_static_policy(config: dict, params: FadingParams, hconfig: HarqConfig,
                           policy: StaticPowerPolicy, total_packets: int, base_seed: int,
                           workers: Optional[int] = None):
    """Replicated Monte Carlo check of a static policy"""
    independent = config['harq']['independent_packets']

    def one(seed: int, packets: int):
        return simulate_harq_static(params.with_seed(seed), hconfig, policy, packets,
                                    independent_packets=independent)

    plan = replication_plan(config, total_packets, base_seed, workers)
    return replicate_harq(one, plan, hconfig.max_rounds)


def analytic_summary(params: FadingParams, hconfig: HarqConfig, policy: StaticPowerPolicy,
                     mc_packets: int) -> Dict[str, Any]:
    """Stop probabilities, outage and average power of a static policy"""
    stops = stop_probabilities(params, hconfig, policy, mc_packets)
    avg = harq_average_power(stops, policy)
    return {
        'stop_probabilities': stops.tolist(),
        'outage_prob': outage_probability(params, hconfig, policy, mc_packets),
        'avg_power': avg,
        'avg_power_db': float(linear_to_db(avg)),
    }


# Scheme runners ------------------------------------------------------------------

def _run_static_quantizer(config: dict, action: str) -> Dict[str, Any]:
    section = config['rate_adapt']
    power = float(db_to_linear(section['snr_db']))
    if action == 'tune':
        quantizer = optimize_static_quantizer(section['quantizer_levels'], power, quantizer_grid(config),
                                              section['quantizer_search']['coordinate_sweeps'])
    else:
        if not section['thresholds']:
            raise ConfigError("rate_adapt.thresholds is required to evaluate a static quantizer")
        quantizer = QuantizerConfig(thresholds=tuple(section['thresholds']), power=power)

    params = fading_params(config)

    def one(seed: int, slots: int) -> float:
        return simulate_static_quantizer(quantizer, gain_trajectory(params.with_seed(seed), slots)).throughput

    plan = replication_plan(config, config['simulation']['slots'] * config['simulation']['replications'],
                            params.seed)
    estimate = run_replicated(one, plan)
    return {
        'thresholds': list(quantizer.thresholds),
        'rates': quantizer.rates.tolist(),
        'analytic_throughput': static_throughput(quantizer),
        'throughput': estimate.to_dict(),
        'seeds': plan.seeds(),
    }


def _run_alg1(config: dict, action: str) -> Dict[str, Any]:
    section = config['rate_adapt']
    power = float(db_to_linear(section['snr_db']))
    params = fading_params(config)
    if action == 'tune':
        rate_grid, delta_grid = rate_grids(config)
        plan = replication_plan(config, section['search']['eval_slots'], params.seed + 1)
        state, result = tune_alg1(params, power, rate_grid, delta_grid,
                                  search_slots=section['search']['search_slots'], eval_plan=plan,
                                  timing=Timing(section['timing']), rate_floor=section['rate_floor'])
        throughput = {'mean': result.throughput, 'halfwidth_95': result.ci_halfwidth, 'n': plan.replications}
    else:
        state = rate_controller(config)
        plan = replication_plan(config, config['simulation']['slots'] * config['simulation']['replications'],
                                params.seed)
        throughput = evaluate_alg1(params, power, state, plan).to_dict()
    return {
        'initial_rate': state.rate,
        'delta': state.delta,
        'timing': state.timing.value,
        'throughput': throughput,
        'seeds': plan.seeds(),
    }


def _run_harq_static(config: dict, action: str, uniform: bool) -> Dict[str, Any]:
    params = fading_params(config)
    hconfig = harq_config(config)
    section = config['harq']
    mc_packets = section['static_search']['mc_packets']

    if action == 'tune':
        power = uniform_power_for_outage(params, hconfig, section['power_cap'], section['power_floor'], mc_packets)
        if uniform:
            policy = StaticPowerPolicy.uniform(power, hconfig.max_rounds)
        else:
            policy = optimize_static_powers(params, hconfig, static_power_grid(config, power),
                                            section['power_cap'], section['power_floor'], mc_packets)
    else:
        policy = configured_policy(config)
        if uniform:
            policy = StaticPowerPolicy.uniform(policy.powers[0], hconfig.max_rounds)

    total = config['simulation']['packets'] * config['simulation']['replications']
    simulated = validate_static_policy(config, params, hconfig, policy, total, params.seed)
    return {
        'powers_db': linear_to_db(np.asarray(policy.powers)).tolist(),
        'analytic': analytic_summary(params, hconfig, policy, mc_packets),
        'simulated': simulated.to_dict(),
        'seeds': replication_plan(config, total, params.seed).seeds(),
    }


def _run_alg2(config: dict, action: str) -> Dict[str, Any]:
    params = fading_params(config)
    hconfig = harq_config(config)
    section = config['harq']
    if action == 'tune':
        center = uniform_power_for_outage(params, hconfig, section['power_cap'], section['power_floor'],
                                          section['static_search']['mc_packets'])
        power_grid, d_grid, d_up_grid = harq_grids(config, center)
        plan = replication_plan(config, section['search']['eval_packets'], params.seed + 1)
        controller, result = tune_alg2(params, hconfig, power_grid, d_grid, d_up_grid,
                                       search_packets=section['search']['search_packets'], eval_plan=plan,
                                       sweeps=section['search']['sweeps'],
                                       validation_attempts=section['search']['validation_attempts'],
                                       power_floor=section['power_floor'], power_cap=section['power_cap'],
                                       static_policy=optimized_static_policy(config, params, hconfig, center),
                                       product_budget=section['search']['product_budget'])
    else:
        controller = power_controller(config)
        plan = replication_plan(config, config['simulation']['packets'] * config['simulation']['replications'],
                                params.seed)
        result = evaluate_alg2(params, hconfig, controller, plan)
    return {
        'initial_power_db': float(linear_to_db(controller.power)),
        'd': list(controller.d),
        'd_up': list(controller.d_up),
        'simulated': result.to_dict(),
        'seeds': plan.seeds(),
    }


def run_scheme(config: dict, scheme: Optional[str] = None, action: Optional[str] = None) -> Dict[str, Any]:
    """
    Run one scheme with one action

    Args:
        config: Validated configuration
        scheme: One of SCHEMES; None takes experiment.scheme
        action: 'evaluate' or 'tune'; None takes experiment.action

    Returns:
        Result section of the JSON document

    Raises:
        ConfigError: unknown scheme or action, or missing inputs
        InfeasibleError: the outage target cannot be met
    """
    scheme = scheme or config['experiment']['scheme']
    action = action or config['experiment']['action']
    if scheme not in SCHEMES:
        raise ConfigError(f"Unknown scheme '{scheme}' (choose from {', '.join(SCHEMES)})")
    if action not in ACTIONS:
        raise ConfigError(f"Unknown action '{action}' (choose from {', '.join(ACTIONS)})")

    logger.info(f"Running scheme={scheme} action={action}")
    try:
        if scheme == 'static-quantizer':
            return _run_static_quantizer(config, action)
        if scheme == 'alg1':
            return _run_alg1(config, action)
        if scheme in ('harq-static', 'harq-uniform'):
            return _run_harq_static(config, action, uniform=scheme == 'harq-uniform')
        return _run_alg2(config, action)
    except ValueError as e:
        # domain types reject out-of-range values coming from the configuration
        raise ConfigError(str(e)) from e
