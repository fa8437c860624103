#!/usr/bin/env python3
"""
HARQ Tests - RTD chain, static outage-limited powers and the reinforcement power controller
"""

import math
import sys
from pathlib import Path

# Add project root to Python path
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
from loguru import logger

from channel import FadingParams, gain_trajectory
from engine import ExperimentPlan, wilson_interval
from harq import (
    HarqChainState, HarqConfig, HarqSimResult, PowerControllerState, StaticPowerPolicy, alg2_on_decode,
    alg2_on_failure, controller_from_policy, decoding_threshold, default_power_grid, default_step_grids,
    evaluate_alg2, harq_average_power, max_achievable_rate, optimize_static_powers, outage_probability,
    outage_probability_joint, packet_decodes_at, policy_from_db, run_power_controllers, search_controllers,
    simulate_alg2, simulate_harq_static, stop_probabilities, summarize_packets, tune_alg2,
    uniform_power_for_outage,
)
from numerics import SearchGrid
from utils.errors import InfeasibleError

C = math.expm1(1.0)


def _raises(exc, func, *args, **kwargs) -> bool:
    try:
        func(*args, **kwargs)
    except exc:
        return True
    return False


def test_config_and_policy():
    assert _raises(ValueError, HarqConfig, 0.0, 2)
    assert _raises(ValueError, HarqConfig, 1.0, 0)
    assert _raises(ValueError, HarqConfig, 1.0, 1.5)
    assert _raises(ValueError, HarqConfig, 1.0, 2, 1.0)
    assert math.isclose(HarqConfig(1.0, 2).threshold, C)
    assert math.isclose(decoding_threshold(0.5), math.expm1(0.5))

    assert _raises(ValueError, StaticPowerPolicy, ())
    assert _raises(ValueError, StaticPowerPolicy, (1.0, -2.0))
    policy = StaticPowerPolicy((1.0, 3.0, 5.0))
    assert np.allclose(policy.round_average(), [1.0, 2.0, 3.0])
    assert StaticPowerPolicy.uniform(2.0, 3).powers == (2.0, 2.0, 2.0)
    assert np.allclose(policy_from_db([0.0, 10.0]).powers, [1.0, 10.0])


def test_chain_state_and_decode_rule():
    state = HarqChainState().transmit(0.5, 2.0)
    assert state.accumulated_snr == 1.0 and state.energy_spent == 2.0 and state.round == 1
    state = state.next_round().transmit(1.0, 2.0)
    assert state.round == 2 and state.accumulated_snr == 3.0 and state.energy_spent == 4.0
    assert _raises(ValueError, HarqChainState().transmit, -1.0, 1.0)

    assert packet_decodes_at(1, 0.0, 2.0, 1.0)
    assert not packet_decodes_at(1, 0.0, 1.5, 1.0)
    assert _raises(ValueError, packet_decodes_at, 2, 2.0, 1.0, 1.0)
    assert math.isclose(float(max_achievable_rate(C, 2)), 0.5)


def test_sim_result_validation():
    assert _raises(ValueError, HarqSimResult, 1.0, 0.0, 0.0, 0.0, 10, [0.5, 0.4], 1.0)
    assert _raises(ValueError, HarqSimResult, 1.0, 0.3, 0.0, 0.0, 10, [0.8, 0.2], 1.0)
    ok = HarqSimResult(10.0, 0.1, 0.0, 0.0, 10, [0.8, 0.2], 5.0)
    assert math.isclose(ok.avg_power_db, 10.0)
    assert ok.to_dict()['stop_histogram'] == [0.8, 0.2]


def test_summarize_packets():
    result = summarize_packets(np.array([1, 2, 2, 1]), np.array([False, True, False, False]),
                               np.array([1.0, 3.0, 3.0, 1.0]), rounds=2, batches=1)
    assert result.avg_power == 1.25
    assert np.allclose(result.stop_histogram, [0.5, 0.5])
    assert result.outage_prob == 0.25
    assert math.isclose(result.energy_per_slot, 8.0 / 6.0)


def test_single_round_closed_forms():
    params = FadingParams(beta=0.9, seed=1)
    config = HarqConfig(1.0, 1, 0.01)
    policy = StaticPowerPolicy((10.0,))
    assert math.isclose(outage_probability(params, config, policy), 1 - math.exp(-C / 10.0), rel_tol=1e-12)
    assert np.array_equal(stop_probabilities(params, config, policy), [1.0])

    power = uniform_power_for_outage(params, config)
    assert math.isclose(power, C / -math.log1p(-0.01), rel_tol=1e-12)
    assert optimize_static_powers(params, config).powers == (power,)
    assert _raises(InfeasibleError, uniform_power_for_outage, params, HarqConfig(1.0, 1, 0.001), power_cap=1.0)


def test_two_round_outage_independent_fading():
    params = FadingParams(beta=0.0, seed=1)
    config = HarqConfig(1.0, 2)
    p1, p2 = 4.0, 9.0
    policy = StaticPowerPolicy((p1, p2))
    # sum of two independent exponentials with different scales
    exact = 1 - (p1 * math.exp(-C / p1) - p2 * math.exp(-C / p2)) / (p1 - p2)
    assert abs(outage_probability(params, config, policy) - exact) < 1e-9
    assert np.allclose(stop_probabilities(params, config, policy),
                       [math.exp(-C / p1), 1 - math.exp(-C / p1)], rtol=1e-12)


def test_two_round_outage_correlated_matches_joint_integral():
    config = HarqConfig(1.0, 2)
    for beta in (0.5, 0.9):
        params = FadingParams(beta=beta, seed=1)
        policy = StaticPowerPolicy((5.0, 12.0))
        one_d = outage_probability(params, config, policy)
        two_d = outage_probability_joint(params, config, policy)
        assert abs(one_d - two_d) < 1e-6, f"beta={beta}: {one_d} vs {two_d}"
    assert _raises(ValueError, outage_probability_joint, params, HarqConfig(1.0, 3),
                   StaticPowerPolicy((1.0, 1.0, 1.0)))


def test_independent_packets_match_analysis():
    params = FadingParams(beta=0.9, seed=7)
    config = HarqConfig(1.0, 2)
    policy = StaticPowerPolicy((6.0, 10.0))
    sim = simulate_harq_static(params, config, policy, 200000, independent_packets=True)

    outage = outage_probability(params, config, policy)
    assert abs(sim.outage_prob - outage) < max(4 * sim.outage_ci, 1e-3)
    stops = stop_probabilities(params, config, policy)
    assert abs(sim.stop_histogram[0] - stops[0]) < 0.005
    avg = harq_average_power(stops, policy)
    assert math.isclose(avg, 6.0 * stops[0] + 8.0 * stops[1])
    assert abs(sim.avg_power - avg) < max(4 * sim.avg_power_ci, 0.01)


def test_static_trace_columns():
    params = FadingParams(beta=0.9, seed=3)
    config = HarqConfig(1.0, 2)
    sim = simulate_harq_static(params, config, StaticPowerPolicy((3.0, 3.0)), 500, record_trace=True)
    trace = sim.trace
    assert list(trace.columns) == ['packet', 'start_slot', 'stop_round', 'outage', 'energy']
    # back-to-back packets: each one starts where the previous stopped
    starts = trace['start_slot'].to_numpy()
    assert np.array_equal(starts[1:], starts[:-1] + trace['stop_round'].to_numpy()[:-1])
    assert _raises(ValueError, simulate_harq_static, params, config, StaticPowerPolicy((1.0,)), 10)


def test_frozen_controller_reproduces_static_policy():
    params = FadingParams(beta=0.9, seed=13)
    config = HarqConfig(1.0, 2)
    static = simulate_harq_static(params, config, StaticPowerPolicy((5.0, 5.0)), 5000)
    frozen = PowerControllerState(power=5.0, d=(0.0, 0.0), d_up=(0.0, 0.0))
    alg2 = simulate_alg2(params, config, frozen, 5000)
    assert np.array_equal(static.stop_histogram, alg2.stop_histogram)
    assert static.outage_prob == alg2.outage_prob
    assert math.isclose(static.avg_power, alg2.avg_power, rel_tol=1e-12)
    assert math.isclose(static.energy_per_slot, alg2.energy_per_slot, rel_tol=1e-12)


def test_controller_updates():
    state = PowerControllerState(power=2.0, d=(0.1, 0.1), d_up=(0.2, 0.3))
    assert math.isclose(alg2_on_decode(state, 1).power, 1.8)
    unit = PowerControllerState(power=1.0, d=(0.1, 0.1), d_up=(0.2, 0.3))
    assert math.isclose(alg2_on_failure(unit, 1).power, 1.2)
    # NACK at round 1 then ACK at round 2
    composed = alg2_on_decode(alg2_on_failure(unit, 1), 2)
    assert math.isclose(composed.power, 1.08)
    assert _raises(ValueError, alg2_on_decode, state, 3)

    capped = PowerControllerState(power=1e6, d=(0.1,), d_up=(0.5,))
    assert alg2_on_failure(capped, 1).power == 1e6
    floored = PowerControllerState(power=1e-6, d=(0.5,), d_up=(0.5,))
    assert alg2_on_decode(floored, 1).power == 1e-6

    assert _raises(ValueError, PowerControllerState, 1.0, (1.0,), (0.1,))
    assert _raises(ValueError, PowerControllerState, 1.0, (0.1,), (-0.1,))
    assert _raises(ValueError, PowerControllerState, 1.0, (0.1, 0.1), (0.1,))
    assert _raises(ValueError, PowerControllerState, 2e6, (0.1,), (0.1,))


def test_alg2_trace_matches_kernel():
    params = FadingParams(beta=0.9, seed=29)
    config = HarqConfig(1.0, 2)
    controller = PowerControllerState(power=4.0, d=(0.05, 0.1), d_up=(0.3, 0.4))
    fast = simulate_alg2(params, config, controller, 2000)
    slow = simulate_alg2(params, config, controller, 2000, record_trace=True)
    assert np.array_equal(fast.stop_histogram, slow.stop_histogram)
    assert fast.outage_prob == slow.outage_prob
    assert math.isclose(fast.avg_power, slow.avg_power, rel_tol=1e-9)
    assert math.isclose(fast.energy_per_slot, slow.energy_per_slot, rel_tol=1e-9)
    assert slow.trace['packet'].nunique() == 2000


def test_frozen_channel_power_oscillates_around_need():
    params = FadingParams(beta=1.0, seed=4)
    config = HarqConfig(1.0, 1)
    controller = PowerControllerState(power=1.0, d=(0.1,), d_up=(0.2,))
    result = simulate_alg2(params, config, controller, 2000, record_trace=True)
    gain = result.trace['gain'].iloc[0]
    need = C / gain
    tail = result.trace['power'].to_numpy()[-200:]
    assert np.all(tail >= need * 0.9 * (1 - 1e-9))
    assert np.all(tail < need * 1.2 * (1 + 1e-9))
    # the power alternates between success and failure, never settling
    assert 0.0 < result.outage_prob < 1.0


def test_two_round_optimum_beats_uniform():
    params = FadingParams(beta=0.9, seed=1)
    config = HarqConfig(1.0, 2, 0.05)
    uniform_p = uniform_power_for_outage(params, config)
    uniform = StaticPowerPolicy.uniform(uniform_p, 2)
    assert abs(outage_probability(params, config, uniform) - 0.05) < 1e-8

    grid = default_power_grid(uniform_p, points=11, refinement_rounds=1)
    best = optimize_static_powers(params, config, grid=grid)
    assert best.rounds == 2
    assert outage_probability(params, config, best) <= 0.05 + 1e-8
    best_avg = harq_average_power(stop_probabilities(params, config, best), best)
    uniform_avg = harq_average_power(stop_probabilities(params, config, uniform), uniform)
    assert best_avg <= uniform_avg


def test_three_rounds_on_a_fixed_sample():
    params = FadingParams(beta=0.9, seed=2)
    config = HarqConfig(1.0, 3, 0.05)
    n = 20000
    uniform_p = uniform_power_for_outage(params, config, mc_packets=n)
    uniform = StaticPowerPolicy.uniform(uniform_p, 3)
    assert outage_probability(params, config, uniform, mc_packets=n) <= 0.05 + 5.0 / n
    stops = stop_probabilities(params, config, uniform, mc_packets=n)
    assert stops.size == 3 and math.isclose(stops.sum(), 1.0)

    grid = default_power_grid(uniform_p, points=9, refinement_rounds=1)
    best = optimize_static_powers(params, config, grid=grid, mc_packets=n, sweeps=2)
    assert best.rounds == 3
    assert outage_probability(params, config, best, mc_packets=n) <= 0.05 + 5.0 / n


def test_two_round_outage_at_power_floor():
    params = FadingParams(beta=0.9, seed=0)
    config = HarqConfig(1.0, 2, 0.01)
    # c / P1 is about 1.7e6 here; the integral must not collapse to zero
    assert outage_probability(params, config, StaticPowerPolicy((1e-6, 1e-6))) > 0.999
    assert outage_probability(params, config, StaticPowerPolicy((1e-3, 1.0))) > 0.5

    power = uniform_power_for_outage(params, config)
    assert 1.0 < power < C / -math.log1p(-0.01)
    achieved = outage_probability(params, config, StaticPowerPolicy.uniform(power, 2))
    assert abs(achieved - 0.01) < 1e-6

    grid = default_power_grid(power, points=9, refinement_rounds=1)
    best = optimize_static_powers(params, config, grid=grid)
    assert min(best.powers) > 1e-3
    assert outage_probability(params, config, best) <= 0.01 + 1e-6


def test_controller_replays_static_policy():
    d_grid = SearchGrid(0.05, 0.95, 10)
    d_up_grid = SearchGrid(0.05, 20.0, 10, log_scale=True)
    controller = controller_from_policy(StaticPowerPolicy((2.0, 8.0)), d_grid, d_up_grid)
    assert controller.power == 2.0
    assert np.allclose(controller.d, [0.05, 0.75])
    assert np.allclose(controller.d_up, [3.0, 0.05])
    # NACK at round 1 lifts P1 to P2, ACK at round 2 brings it back
    raised = alg2_on_failure(controller, 1)
    assert math.isclose(raised.power, 8.0)
    assert math.isclose(alg2_on_decode(raised, 2).power, 2.0)

    clipped = controller_from_policy(StaticPowerPolicy((1.0, 100.0)), d_grid, d_up_grid)
    assert clipped.d_up[0] == 20.0 and clipped.d[1] == 0.95

    # with a target, first-round ACKs pull the power down as much as outages push it up
    balanced = controller_from_policy(StaticPowerPolicy((2.0, 8.0)), d_grid, d_up_grid,
                                      outage_target=0.01, first_round_ack=0.8)
    drift = 0.8 * math.log1p(-balanced.d[0]) + 0.01 * (math.log(4.0) + math.log(1.05))
    assert abs(drift) < 1e-12
    assert 0.0 < balanced.d[0] < 0.05 and balanced.d[1:] == controller.d[1:]

    d_grid, d_up_grid = default_step_grids()
    assert d_up_grid.log_scale and d_up_grid.upper > 10.0 and d_grid.upper > 0.9


def test_search_never_worse_than_its_start():
    params = FadingParams(beta=0.9, seed=60)
    config = HarqConfig(1.0, 2, 0.1)
    packets = 3000
    gains = gain_trajectory(params, packets * 2)
    center = uniform_power_for_outage(params, config)
    # zero step sizes freeze the power, so the start replays a generous uniform policy
    d_grid = SearchGrid(0.0, 0.9, 4)
    d_up_grid = SearchGrid(0.0, 20.0, 4)
    start = controller_from_policy(StaticPowerPolicy.uniform(4.0 * center, 2), d_grid, d_up_grid)
    assert start.d == (0.0, 0.0) and start.d_up == (0.0, 0.0)

    power_grid = default_power_grid(center, points=5, refinement_rounds=0)
    result = search_controllers(gains, config, 0.1, packets, power_grid, d_grid, d_up_grid, sweeps=1,
                                power_floor=1e-6, power_cap=1e6, starts=[start], product_budget=64)
    assert np.isfinite(result.fun)
    assert result.fun <= 4.0 * center * (1 + 1e-9)

    x = np.asarray(result.x)
    run = run_power_controllers(gains, config.rate, x[:1], x[None, 1:3], x[None, 3:5], packets)
    assert math.isclose(run['avg_power'][0], result.fun, rel_tol=1e-9)
    est = wilson_interval(int(run['outages'][0]), packets)
    assert est.mean <= 0.1 + 2.0 * est.halfwidth_95


def test_evaluate_alg2_pools_replications():
    params = FadingParams(beta=0.9, seed=40)
    config = HarqConfig(1.0, 2)
    controller = PowerControllerState(power=5.0, d=(0.05, 0.05), d_up=(0.3, 0.3))
    result = evaluate_alg2(params, config, controller, ExperimentPlan(41, 4, 2000, workers=2))
    assert result.packets == 8000
    assert math.isclose(result.stop_histogram.sum(), 1.0)
    assert result.avg_power > 0 and result.avg_power_ci >= 0


def test_tune_alg2_meets_outage():
    params = FadingParams(beta=0.9, seed=50)
    config = HarqConfig(1.0, 2, 0.1)
    center = uniform_power_for_outage(params, config)
    controller, validated = tune_alg2(
        params, config,
        power_grid=default_power_grid(center, points=5, refinement_rounds=0),
        d_grid=SearchGrid(0.05, 0.9, 3), d_up_grid=SearchGrid(0.05, 20.0, 3, log_scale=True),
        search_packets=3000, eval_plan=ExperimentPlan(51, 5, 3000), sweeps=1,
        static_policy=StaticPowerPolicy.uniform(center, 2), product_budget=16,
    )
    assert controller.rounds == 2
    assert validated.outage_prob <= 0.1 + 3 * validated.outage_ci
    assert _raises(ValueError, tune_alg2, params, config, d_grid=SearchGrid(0.5, 1.0, 3))
    assert _raises(ValueError, tune_alg2, params, config, d_up_grid=SearchGrid(-1.0, 1.0, 3))


def main() -> int:
    logger.info("=" * 60)
    logger.info("HARQ TESTS")
    logger.info("=" * 60)
    failed = 0
    for name, func in sorted(globals().items()):
        if name.startswith("test_") and callable(func):
            try:
                func()
                logger.info(f"✓ {name}")
            except AssertionError as e:
                failed += 1
                logger.error(f"✗ {name}: {e}")
            except Exception as e:
                failed += 1
                logger.error(f"✗ {name}: {type(e).__name__}: {e}")
    logger.info(f"{'✅ ALL PASSED' if not failed else f'❌ {failed} FAILED'}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
