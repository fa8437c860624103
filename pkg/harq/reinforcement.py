"""
Reinforcement-based HARQ power control
The transmitter scales its power down by (1 - d_m) on ACK and up by
(1 + d'_m) on NACK, carrying the power from packet to packet
"""

import math
from dataclasses import dataclass, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from channel.fading import FadingParams, gain_trajectory
from engine.replication import ExperimentPlan
from engine.stats import Z_95, wilson_interval
from numerics.search import SearchGrid, coordinate_search, grid_search
from utils.errors import InfeasibleError
from .chain import (
    HarqChainState, HarqConfig, HarqSimResult, StaticPowerPolicy, packet_decodes_at, replicate_harq,
    summarize_packets,
)
from .static_power import (
    default_power_grid, optimize_static_powers, stop_probabilities, uniform_power_for_outage,
)


@dataclass(frozen=True)
class PowerControllerState:
    """Current power, per-round step sizes d_m (ACK) and d'_m (NACK), and power bounds"""
    power: float
    d: Tuple[float, ...]
    d_up: Tuple[float, ...]
    power_floor: float = 1e-6
    power_cap: float = 1e6

    def __post_init__(self):
        d = tuple(float(v) for v in self.d)
        d_up = tuple(float(v) for v in self.d_up)
        object.__setattr__(self, 'd', d)
        object.__setattr__(self, 'd_up', d_up)
        if len(d) == 0 or len(d) != len(d_up):
            raise ValueError("d and d_up need one entry per round")
        # d_m = 0 is allowed: it freezes the power on ACK
        if not all(0.0 <= v < 1.0 for v in d):
            raise ValueError(f"every d_m must lie in [0, 1), got {d}")
        if not all(v >= 0.0 for v in d_up):
            raise ValueError(f"every d'_m must be non-negative, got {d_up}")
        if not 0 < self.power_floor < self.power_cap:
            raise ValueError("need 0 < power_floor < power_cap")
        if not self.power_floor <= self.power <= self.power_cap:
            raise ValueError(f"power {self.power} outside [{self.power_floor}, {self.power_cap}]")

    @property
    def rounds(self) -> int:
        return len(self.d)

    def clamp(self, power: float) -> float:
        return min(max(power, self.power_floor), self.power_cap)


def alg2_on_decode(state: PowerControllerState, round_m: int) -> PowerControllerState:
    """ACK at round m: P <- (1 - d_m) P, clamped; the next packet starts at round 1"""
    if not 1 <= round_m <= state.rounds:
        raise ValueError(f"round must lie in [1, {state.rounds}], got {round_m}")
    return replace(state, power=state.clamp(state.power * (1.0 - state.d[round_m - 1])))


def alg2_on_failure(state: PowerControllerState, round_m: int) -> PowerControllerState:
    """
    NACK at round m: P <- (1 + d'_m) P, clamped

    The caller retransmits at round m + 1, or declares an outage and starts
    a new packet when m = M.
    """
    if not 1 <= round_m <= state.rounds:
        raise ValueError(f"round must lie in [1, {state.rounds}], got {round_m}")
    return replace(state, power=state.clamp(state.power * (1.0 + state.d_up[round_m - 1])))


def run_power_controllers(gains: np.ndarray, rate: float, powers, d, d_up, packets: int,
                          power_floor: float = 1e-6, power_cap: float = 1e6,
                          batches: int = 20) -> Dict[str, np.ndarray]:
    """
    Run many Algorithm-2 controllers side by side on one gain trajectory

    Every candidate transmits in every slot and sees the same gain there
    (common random numbers). A candidate stops once it has finished
    `packets` packets; the trajectory must hold packets * M slots.

    Args:
        gains: Gain trajectory
        rate: Codeword rate R (npcu)
        powers: Initial powers, shape (C,)
        d: ACK step sizes, shape (C, M)
        d_up: NACK step sizes, shape (C, M)
        packets: Packets per candidate
        power_floor: Lower clamp on the power
        power_cap: Upper clamp on the power
        batches: Batches (by packet index) for the avg-power CI

    Returns:
        Dict of per-candidate arrays: 'avg_power', 'avg_power_ci',
        'energy_per_slot', 'outages', 'stop_counts' (C, M)
    """
    d = np.atleast_2d(np.asarray(d, dtype=float))
    d_up = np.atleast_2d(np.asarray(d_up, dtype=float))
    power = np.clip(np.asarray(powers, dtype=float).copy(), power_floor, power_cap)
    n_cand, rounds = d.shape
    if gains.size < packets * rounds:
        raise ValueError(f"trajectory of {gains.size} slots is shorter than {packets * rounds}")

    idx = np.arange(n_cand)
    round_idx = np.zeros(n_cand, dtype=np.int64)
    acc = np.zeros(n_cand)
    pkt_energy = np.zeros(n_cand)
    done = np.zeros(n_cand, dtype=np.int64)
    outages = np.zeros(n_cand, dtype=np.int64)
    stop_counts = np.zeros((n_cand, rounds), dtype=np.int64)
    total_energy = np.zeros(n_cand)
    total_slots = np.zeros(n_cand, dtype=np.int64)
    sum_avg = np.zeros(n_cand)

    batches = max(1, min(batches, packets))
    batch_len = packets // batches
    batch_sums = np.zeros((batches, n_cand))

    for g in gains[:packets * rounds]:
        active = done < packets
        if not active.any():
            break
        acc = np.where(active, acc + g * power, acc)
        pkt_energy = np.where(active, pkt_energy + power, pkt_energy)
        total_energy += np.where(active, power, 0.0)
        total_slots += active

        decoded = np.log1p(acc) >= rate
        last = round_idx == rounds - 1
        finish = active & (decoded | last)
        outages += active & ~decoded & last

        step = np.where(decoded, 1.0 - d[idx, round_idx], 1.0 + d_up[idx, round_idx])
        power = np.where(active, np.clip(power * step, power_floor, power_cap), power)

        if finish.any():
            per_packet = pkt_energy / (round_idx + 1)
            stop_counts[idx[finish], round_idx[finish]] += 1
            sum_avg += np.where(finish, per_packet, 0.0)
            in_batch = finish & (done < batch_len * batches)
            np.add.at(batch_sums, (done[in_batch] // batch_len, idx[in_batch]), per_packet[in_batch])
            done += finish
            acc = np.where(finish, 0.0, acc)
            pkt_energy = np.where(finish, 0.0, pkt_energy)
        round_idx = np.where(finish, 0, np.where(active, round_idx + 1, round_idx))

    if batches > 1:
        halfwidth = Z_95 * (batch_sums / batch_len).std(axis=0, ddof=1) / np.sqrt(batches)
    else:
        halfwidth = np.zeros(n_cand)
    return {
        'avg_power': sum_avg / packets,
        'avg_power_ci': halfwidth,
        'energy_per_slot': total_energy / np.maximum(total_slots, 1),
        'outages': outages,
        'stop_counts': stop_counts,
    }


def _trace_alg2(gains: np.ndarray, config: HarqConfig, controller: PowerControllerState,
                packets: int) -> pd.DataFrame:
    """Slot-by-slot reference run through the chain state and the ACK/NACK rules"""
    state = controller
    chain = HarqChainState()
    rows = []
    packet = 0
    for t, g in enumerate(gains):
        if packet >= packets:
            break
        sent = state.power
        prev = chain.accumulated_snr
        chain = chain.transmit(g, sent)
        decoded = packet_decodes_at(chain.round, prev, chain.accumulated_snr, config.rate)
        outage = not decoded and chain.round == config.max_rounds
        rows.append({
            'slot': t,
            'packet': packet,
            'round': chain.round,
            'gain': g,
            'power': sent,
            'accumulated_snr': chain.accumulated_snr,
            'decoded': decoded,
            'outage': outage,
        })
        if decoded:
            state = alg2_on_decode(state, chain.round)
        else:
            state = alg2_on_failure(state, chain.round)
        if decoded or outage:
            chain = HarqChainState()
            packet += 1
        else:
            chain = chain.next_round()
    return pd.DataFrame(rows)


def simulate_alg2(params: FadingParams, config: HarqConfig, controller: PowerControllerState,
                  packets: int, record_trace: bool = False, batches: int = 20) -> HarqSimResult:
    """
    Algorithm 2 over one continuous fading trajectory

    The power in force when a round is sent is the power that enters the
    MRC sum and the energy count.

    Args:
        params: Fading correlation and seed
        config: Rate, maximum rounds and outage target
        controller: Initial power and step sizes
        packets: Number of packets
        record_trace: Use the slot-by-slot reference path and attach its trace
        batches: Batches for the avg-power CI

    Returns:
        HarqSimResult
    """
    if packets < 1:
        raise ValueError("packets must be >= 1")
    if controller.rounds != config.max_rounds:
        raise ValueError(f"controller has {controller.rounds} rounds, config expects {config.max_rounds}")
    gains = gain_trajectory(params, packets * config.max_rounds)

    if record_trace:
        trace = _trace_alg2(gains, config, controller, packets)
        ends = trace[trace['decoded'] | trace['outage']]
        energy = trace.groupby('packet')['power'].sum().to_numpy()
        return summarize_packets(ends['round'].to_numpy(), ends['outage'].to_numpy(), energy,
                                 config.max_rounds, batches=batches, trace=trace)

    run = run_power_controllers(gains, config.rate, [controller.power], [controller.d], [controller.d_up],
                                packets, controller.power_floor, controller.power_cap, batches)
    outage = wilson_interval(int(run['outages'][0]), packets)
    return HarqSimResult(
        avg_power=float(run['avg_power'][0]),
        outage_prob=outage.mean,
        avg_power_ci=float(run['avg_power_ci'][0]),
        outage_ci=outage.halfwidth_95,
        packets=packets,
        stop_histogram=run['stop_counts'][0] / packets,
        energy_per_slot=float(run['energy_per_slot'][0]),
    )


def evaluate_alg2(params: FadingParams, config: HarqConfig, controller: PowerControllerState,
                  plan: ExperimentPlan) -> HarqSimResult:
    """Replicated run of a fixed controller; CIs across replications"""
    def one(seed: int, packets: int) -> HarqSimResult:
        return simulate_alg2(params.with_seed(seed), config, controller, packets)

    return replicate_harq(one, plan, config.max_rounds)


def _split(points: np.ndarray, rounds: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Candidate rows (P_initial, d_1..d_M, d'_1..d'_M) into arrays"""
    return points[:, 0], points[:, 1:1 + rounds], points[:, 1 + rounds:1 + 2 * rounds]


def _row(controller: PowerControllerState) -> np.ndarray:
    return np.concatenate([[controller.power], controller.d, controller.d_up])


def controller_from_policy(policy: StaticPowerPolicy, d_grid: SearchGrid, d_up_grid: SearchGrid,
                           outage_target: Optional[float] = None, first_round_ack: float = 1.0,
                           power_floor: float = 1e-6, power_cap: float = 1e6) -> PowerControllerState:
    """
    Controller that follows a static policy along the usual packet path

    A NACK at round m < M moves the power from P_m to P_(m+1) and an ACK at
    round m > 1 brings it back to P_1. d'_M sits at the bottom of its grid.
    With an outage target, d_1 balances the drift: first-round ACKs (rate
    first_round_ack) pull the power down as much as outages at the target
    rate push it up. Without one, d_1 sits at the bottom of its grid too.
    The other step sizes are clipped to their grids.
    """
    powers = np.clip(np.asarray(policy.powers, dtype=float), power_floor, power_cap)
    d = np.clip(1.0 - powers[0] / powers, d_grid.lower, d_grid.upper)
    d_up = np.full(policy.rounds, d_up_grid.lower)
    d_up[:-1] = np.clip(powers[1:] / powers[:-1] - 1.0, d_up_grid.lower, d_up_grid.upper)
    if outage_target is None:
        d[0] = d_grid.lower
    else:
        # an outage NACKs every round
        rise = float(np.sum(np.log1p(d_up)))
        d[0] = min(-math.expm1(-outage_target * rise / max(first_round_ack, 1e-12)), d_grid.upper)
    return PowerControllerState(power=float(powers[0]), d=tuple(d), d_up=tuple(d_up),
                                power_floor=power_floor, power_cap=power_cap)


def _axis_points(rounds: int, budget: int) -> int:
    """Points per step-size axis so that the 2M-dimensional product stays within budget"""
    return max(2, int(budget ** (1.0 / (2 * rounds)) + 1e-9))


def search_controllers(gains: np.ndarray, config: HarqConfig, target: float, packets: int,
                       power_grid: SearchGrid, d_grid: SearchGrid, d_up_grid: SearchGrid, sweeps: int,
                       power_floor: float, power_cap: float,
                       starts: Sequence[PowerControllerState] = (), product_budget: int = 4096):
    """
    Minimum-power controller with outage <= target + 2 CI on one trajectory

    Three stages share the trajectory (common random numbers):

    1. coarse-to-fine product grid over d_1..d_M, d'_1..d'_M with P_initial
       at the centre of its grid
    2. the best of that winner, a conservative scan over P_initial (slow
       decrease, fast increase) and the given starting controllers
    3. coordinate search over all 2M + 1 parameters from the best start

    Returns:
        OptimizeResult of the coordinate search; never worse than the best start

    Raises:
        InfeasibleError: no candidate meets the target
    """
    rounds = config.max_rounds

    def objective(points: np.ndarray) -> np.ndarray:
        p0, d, d_up = _split(points, rounds)
        run = run_power_controllers(gains, config.rate, p0, d, d_up, packets, power_floor, power_cap)
        values = run['avg_power'].copy()
        for i, events in enumerate(run['outages']):
            est = wilson_interval(int(events), packets)
            if est.mean > target + 2.0 * est.halfwidth_95:
                values[i] = np.nan
        return values

    p_center = float(power_grid.values()[power_grid.points // 2])
    axis = _axis_points(rounds, product_budget)
    coarse = ([replace(d_grid, points=min(d_grid.points, axis), refinement_rounds=1)] * rounds
              + [replace(d_up_grid, points=min(d_up_grid.points, axis), refinement_rounds=1)] * rounds)

    def steps_only(points: np.ndarray) -> np.ndarray:
        return objective(np.column_stack([np.full(len(points), p_center), points]))

    candidates = [np.column_stack([power_grid.values(),
                                   np.full((power_grid.points, rounds), d_grid.lower),
                                   np.full((power_grid.points, rounds), d_up_grid.upper)])]
    try:
        product = grid_search(steps_only, coarse, maximize=False, vectorized=True)
        candidates.append(np.concatenate([[p_center], product.x])[None, :])
    except InfeasibleError:
        logger.debug(f"no step-size product point meets outage {target:g} at P={p_center:.4g}")
    candidates.extend(_row(s)[None, :] for s in starts)

    candidates = np.vstack(candidates)
    values = objective(candidates)
    if not np.isfinite(values).any():
        raise InfeasibleError(f"no controller candidate meets outage {target:g}")
    x0 = candidates[int(np.nanargmin(values))]

    grids = [power_grid] + [d_grid] * rounds + [d_up_grid] * rounds
    return coordinate_search(objective, x0, grids, sweeps=sweeps, maximize=False, vectorized=True)


def default_step_grids(refinement_rounds: int = 2) -> Tuple[SearchGrid, SearchGrid]:
    """
    (d grid, d' grid) used when none is given

    d' spans more than a decade on a log scale so that a NACK can lift the
    power by the round-to-round ratios of an optimized static policy, and
    d reaches 0.95 so that a late ACK can bring it back down.
    """
    return (SearchGrid(0.05, 0.95, 10, refinement_rounds=refinement_rounds),
            SearchGrid(0.05, 20.0, 10, refinement_rounds=refinement_rounds, log_scale=True))


def tune_alg2(params: FadingParams, config: HarqConfig, power_grid: Optional[SearchGrid] = None,
              d_grid: Optional[SearchGrid] = None, d_up_grid: Optional[SearchGrid] = None,
              search_packets: int = 100000, eval_plan: Optional[ExperimentPlan] = None,
              sweeps: int = 3, validation_attempts: int = 3, power_floor: float = 1e-6,
              power_cap: float = 1e6, static_policy: Optional[StaticPowerPolicy] = None,
              product_budget: int = 4096) -> Tuple[PowerControllerState, HarqSimResult]:
    """
    Search P_initial, d_m and d'_m for minimum average power under the outage target

    Candidates are scored on one common trajectory (seed from params) and
    count as feasible while their outage is within 2 CI halfwidths of the
    target. The optimized static policy, replayed as a controller, is one
    of the starting points. The winner is re-run on fresh seeds and must
    satisfy outage <= epsilon + 3 CI; otherwise the search repeats against
    a target tightened by 20%.

    Args:
        params: Fading correlation; its seed drives the search trajectory
        config: Rate, maximum rounds and outage target
        power_grid: Grid for P_initial; None means +-10 dB log-spaced around
            the uniform static solution
        d_grid: Grid for every d_m; None means default_step_grids()
        d_up_grid: Grid for every d'_m; None means default_step_grids()
        search_packets: Packets per candidate during the search
        eval_plan: Validation replications; None means 20 x 50000 packets
        sweeps: Coordinate-search passes per zoom round
        validation_attempts: Searches before giving up
        power_floor: Lower clamp on the power
        power_cap: Upper clamp on the power
        static_policy: Static policy to replay as a start; None optimizes one
        product_budget: Largest step-size product grid in the first stage

    Returns:
        (tuned controller, validated HarqSimResult)

    Raises:
        InfeasibleError: no candidate passes the search or the validation
    """
    rounds = config.max_rounds
    eps = config.outage_target
    default_d, default_d_up = default_step_grids()
    d_grid = default_d if d_grid is None else d_grid
    d_up_grid = default_d_up if d_up_grid is None else d_up_grid
    if d_grid.lower < 0 or d_grid.upper >= 1:
        raise ValueError("d grid must stay inside [0, 1)")
    if d_up_grid.lower < 0:
        raise ValueError("d' grid must be non-negative")
    center = None
    if power_grid is None:
        center = uniform_power_for_outage(params, config, power_cap, power_floor)
        power_grid = default_power_grid(center, points=25, refinement_rounds=2)
    if eval_plan is None:
        eval_plan = ExperimentPlan(base_seed=params.seed + 1, replications=20, slots_or_packets=50000)

    if static_policy is None:
        try:
            if center is None:
                center = uniform_power_for_outage(params, config, power_cap, power_floor)
            static_policy = optimize_static_powers(params, config, default_power_grid(center, points=21,
                                                                                      refinement_rounds=2),
                                                   power_cap, power_floor)
        except InfeasibleError:
            logger.warning(f"No static policy meets outage {eps:g}; searching without a replay start")
    first_ack = None
    if static_policy is not None:
        first_ack = float(stop_probabilities(params, config, static_policy)[0])

    gains = gain_trajectory(params, search_packets * rounds)
    target = eps
    for attempt in range(1, validation_attempts + 1):
        starts = []
        if static_policy is not None:
            starts.append(controller_from_policy(static_policy, d_grid, d_up_grid, target, first_ack,
                                                 power_floor, power_cap))
        result = search_controllers(gains, config, target, search_packets, power_grid, d_grid, d_up_grid,
                                    sweeps, power_floor, power_cap, starts, product_budget)
        p0, d, d_up = _split(np.asarray(result.x)[None, :], rounds)
        controller = PowerControllerState(power=float(p0[0]), d=tuple(d[0]), d_up=tuple(d_up[0]),
                                          power_floor=power_floor, power_cap=power_cap)
        validated = evaluate_alg2(params, config, controller, eval_plan)
        logger.info(f"Algorithm 2 attempt {attempt} (beta={params.beta}, eps={eps:g}): "
                    f"P0={controller.power:.4g}, d={np.round(controller.d, 3).tolist()}, "
                    f"d'={np.round(controller.d_up, 3).tolist()}, "
                    f"avg={validated.avg_power_db:.3f} dB, outage={validated.outage_prob:.4g}"
                    f"+-{validated.outage_ci:.2g}")
        if validated.outage_prob <= eps + 3.0 * validated.outage_ci:
            return controller, validated
        target *= 0.8
        logger.warning(f"Validation missed outage {eps:g}; searching again against {target:.4g}")

    raise InfeasibleError(f"Algorithm 2 could not be validated at outage {eps:g} "
                          f"after {validation_attempts} attempts")
