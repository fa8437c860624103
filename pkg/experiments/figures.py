"""
Figure tables
Throughput vs SNR, relative gain of the reinforcement rate controller over
the optimized 2-level quantizer, and outage-limited HARQ power vs epsilon
"""

import math
from typing import Any, Dict

import numpy as np
from loguru import logger

from channel.fading import FadingParams
from engine.replication import ExperimentPlan
from engine.stats import EstimateWithCI
from engine.sweep import SweepResult, run_sweep
from harq import (
    StaticPowerPolicy, harq_average_power, optimize_static_powers, stop_probabilities, tune_alg2,
    uniform_power_for_outage,
)
from rate_adapt import (
    Timing, optimize_static_quantizer, static_throughput, throughput_no_csit, throughput_perfect_csit, tune_alg1,
)
from utils.units import db_to_linear, linear_to_db
from .schemes import (
    harq_config, harq_grids, quantizer_grid, rate_grids, replication_plan, static_power_grid,
    validate_static_policy,
)

# dB per unit relative change of a linear quantity
DB_PER_RELATIVE = 10.0 / math.log(10.0)

# validation runs of the static policies draw from their own seed blocks inside a sweep point
UNIFORM_SEED_OFFSET = 10_000
STATIC_SEED_OFFSET = 20_000


def _sweep_plan(config: dict, axes: Dict[str, list]) -> ExperimentPlan:
    sim = config['simulation']
    return ExperimentPlan(base_seed=sim['seed'], replications=sim['replications'],
                          slots_or_packets=sim['slots'], sweep_axes=axes, workers=sim['workers'])


def _static_n2(config: dict, power: float) -> float:
    quantizer = optimize_static_quantizer(2, power, quantizer_grid(config),
                                          config['rate_adapt']['quantizer_search']['coordinate_sweeps'])
    return static_throughput(quantizer)


def _tuned_alg1(config: dict, beta: float, seed: int, power: float, timing: Timing) -> EstimateWithCI:
    """Tuned Algorithm 1 throughput; search on `seed`, evaluation on the seeds after it"""
    search = config['rate_adapt']['search']
    rate_grid, delta_grid = rate_grids(config)
    plan = replication_plan(config, search['eval_slots'], seed + 1, workers=1)
    _, result = tune_alg1(FadingParams(beta=beta, seed=seed), power, rate_grid, delta_grid,
                          search_slots=search['search_slots'], eval_plan=plan, timing=timing,
                          rate_floor=config['rate_adapt']['rate_floor'])
    return EstimateWithCI(mean=result.throughput, halfwidth_95=result.ci_halfwidth, n=plan.replications)


def reproduce_fig1(config: dict) -> SweepResult:
    """
    Throughput vs SNR at one beta

    Columns: snr_db, perfect_csit, no_csit, static_n2, alg1_tuned,
    alg1_tuned_ci and, when enabled, alg1_next_block / alg1_next_block_ci.
    """
    fig = config['figures']['fig1']
    plan = _sweep_plan(config, {'snr_db': fig['snr_db']})

    def evaluate(point: Dict[str, Any], seed: int) -> Dict[str, Any]:
        power = float(db_to_linear(point['snr_db']))
        row = {
            'perfect_csit': throughput_perfect_csit(power),
            'no_csit': throughput_no_csit(power),
            'static_n2': _static_n2(config, power),
            'alg1_tuned': _tuned_alg1(config, fig['beta'], seed, power, Timing.SAME_BLOCK),
        }
        if fig['next_block']:
            row['alg1_next_block'] = _tuned_alg1(config, fig['beta'], seed, power, Timing.NEXT_BLOCK)
        return row

    return run_sweep(plan, evaluate)


def reproduce_fig2(config: dict) -> SweepResult:
    """
    Relative gain delta_pct = 100 (eta - eta_SQ) / eta_SQ of tuned Algorithm 1
    over the optimized 2-level quantizer, per (beta, SNR)
    """
    fig = config['figures']['fig2']
    plan = _sweep_plan(config, {'beta': fig['betas'], 'snr_db': fig['snr_db']})

    def evaluate(point: Dict[str, Any], seed: int) -> Dict[str, Any]:
        power = float(db_to_linear(point['snr_db']))
        static = _static_n2(config, power)
        tuned = _tuned_alg1(config, point['beta'], seed, power, Timing.SAME_BLOCK)
        return {
            'static_n2': static,
            'alg1_tuned': tuned,
            'delta_pct': EstimateWithCI(mean=100.0 * (tuned.mean - static) / static,
                                        halfwidth_95=100.0 * tuned.halfwidth_95 / static, n=tuned.n),
        }

    return run_sweep(plan, evaluate)


def reproduce_fig3(config: dict) -> SweepResult:
    """
    Outage-limited average power (dB) of uniform, optimized static and
    reinforcement power allocation, per outage target

    Static columns are the closed-form average power; every scheme also
    gets a simulated outage with its CI so the outage target can be checked.
    """
    fig = config['figures']['fig3']
    section = config['harq']
    plan = _sweep_plan(config, {'epsilon': fig['epsilons']})
    mc_packets = section['static_search']['mc_packets']
    eval_packets = section['search']['eval_packets']

    def evaluate(point: Dict[str, Any], seed: int) -> Dict[str, Any]:
        params = FadingParams(beta=fig['beta'], seed=seed)
        hconfig = harq_config(config, rate=fig['rate'], max_rounds=fig['max_rounds'],
                              outage_target=point['epsilon'])

        uniform_p = uniform_power_for_outage(params, hconfig, section['power_cap'], section['power_floor'],
                                             mc_packets)
        uniform = StaticPowerPolicy.uniform(uniform_p, hconfig.max_rounds)
        static = optimize_static_powers(params, hconfig, static_power_grid(config, uniform_p),
                                        section['power_cap'], section['power_floor'], mc_packets)
        static_avg = harq_average_power(stop_probabilities(params, hconfig, static, mc_packets), static)

        power_grid, d_grid, d_up_grid = harq_grids(config, uniform_p)
        alg2_plan = replication_plan(config, eval_packets, seed + 1, workers=1)
        controller, alg2 = tune_alg2(params, hconfig, power_grid, d_grid, d_up_grid,
                                     search_packets=section['search']['search_packets'], eval_plan=alg2_plan,
                                     sweeps=section['search']['sweeps'],
                                     validation_attempts=section['search']['validation_attempts'],
                                     power_floor=section['power_floor'], power_cap=section['power_cap'],
                                     static_policy=static, product_budget=section['search']['product_budget'])

        uniform_sim = validate_static_policy(config, params, hconfig, uniform, eval_packets,
                                             seed + UNIFORM_SEED_OFFSET, workers=1)
        static_sim = validate_static_policy(config, params, hconfig, static, eval_packets,
                                            seed + STATIC_SEED_OFFSET, workers=1)

        uniform_db = float(linear_to_db(uniform_p))
        static_db = float(linear_to_db(static_avg))
        return {
            'uniform_db': uniform_db,
            'static_opt_db': static_db,
            'static_p1_db': float(linear_to_db(static.powers[0])),
            'static_pM_db': float(linear_to_db(static.powers[-1])),
            'alg2_db': EstimateWithCI(mean=alg2.avg_power_db,
                                      halfwidth_95=DB_PER_RELATIVE * alg2.avg_power_ci / alg2.avg_power,
                                      n=alg2_plan.replications),
            'alg2_initial_db': float(linear_to_db(controller.power)),
            'saving_vs_uniform_db': uniform_db - alg2.avg_power_db,
            'saving_vs_static_db': static_db - alg2.avg_power_db,
            'uniform_outage': EstimateWithCI(uniform_sim.outage_prob, uniform_sim.outage_ci, uniform_sim.packets),
            'static_outage': EstimateWithCI(static_sim.outage_prob, static_sim.outage_ci, static_sim.packets),
            'alg2_outage': EstimateWithCI(alg2.outage_prob, alg2.outage_ci, alg2.packets),
        }

    result = run_sweep(plan, evaluate)
    if 'saving_vs_uniform_db' in result.table:
        logger.info("Fig. 3 savings (dB): " + ", ".join(
            f"eps={e:g}: {s:.2f}" for e, s in zip(result.table['epsilon'], result.table['saving_vs_uniform_db'])
            if np.isfinite(s)))
    return result


FIGURES = {
    'fig1': reproduce_fig1,
    'fig2': reproduce_fig2,
    'fig3': reproduce_fig3,
}
