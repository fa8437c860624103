"""
Reinforcement-based rate adaptation with 1-bit feedback
The receiver rewards (alpha = 1) when the channel supports R(1 + delta),
the transmitter scales its rate up or down by delta accordingly
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from channel.fading import FadingParams, gain_trajectory
from engine.replication import ExperimentPlan, run_replicated
from engine.stats import EstimateWithCI, Z_95, batch_means
from numerics.search import SearchGrid, grid_search
from .quantizer import ThroughputResult


class Timing(Enum):
    """When the feedback bit takes effect"""
    SAME_BLOCK = "same_block"   # feedback, update and transmission in one block
    NEXT_BLOCK = "next_block"   # the bit computed in block t drives block t+1


@dataclass(frozen=True)
class RateControllerState:
    """Current rate R, adaptation coefficient delta, timing and rate floor"""
    rate: float
    delta: float
    timing: Timing = Timing.SAME_BLOCK
    rate_floor: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie strictly inside (0, 1), got {self.delta}")
        if not self.rate_floor > 0:
            raise ValueError("rate_floor must be positive")
        if self.rate < self.rate_floor:
            raise ValueError(f"rate {self.rate} is below the floor {self.rate_floor}")
        if not isinstance(self.timing, Timing):
            object.__setattr__(self, 'timing', Timing(self.timing))


def alg1_feedback(g: float, power: float, state: RateControllerState) -> int:
    """
    Receiver side: 1 iff log(1 + gP) > R + delta R (strict)

    Args:
        g: Channel gain of the block
        power: Transmit power (linear)
        state: Controller state holding R and delta
    """
    if g < 0:
        raise ValueError("gain must be non-negative")
    return int(np.log1p(g * power) > state.rate * (1.0 + state.delta))


def alg1_update(state: RateControllerState, alpha: int) -> RateControllerState:
    """Transmitter side: R <- R(1 + delta) on reward, R(1 - delta) otherwise, floored"""
    factor = 1.0 + state.delta if alpha else 1.0 - state.delta
    return replace(state, rate=max(state.rate * factor, state.rate_floor))


def run_rate_controllers(gains: np.ndarray, power: float, rates, deltas, rate_floor: float = 1e-3,
                         timing: Timing = Timing.SAME_BLOCK, batches: int = 20) -> Dict[str, np.ndarray]:
    """
    Run many Algorithm-1 controllers side by side on one gain trajectory

    All candidates see the same channel (common random numbers), which is
    what makes the tuning comparison fair.

    Args:
        gains: Gain trajectory, one entry per slot
        power: Transmit power (linear)
        rates: Initial rates, shape (C,)
        deltas: Adaptation coefficients, shape (C,)
        rate_floor: Lower clamp on R
        timing: Feedback timing mode
        batches: Number of consecutive batches for batch-means CIs

    Returns:
        Dict of per-candidate arrays: 'throughput', 'halfwidth', 'outages',
        'rewarded', 'rewarded_outages', 'final_rate'
    """
    gains = np.asarray(gains, dtype=float)
    slots = gains.size
    rate = np.maximum(np.asarray(rates, dtype=float).copy(), rate_floor)
    delta = np.asarray(deltas, dtype=float)
    up, down = 1.0 + delta, 1.0 - delta

    capacity = np.log1p(gains * power)
    batches = max(1, min(batches, slots))
    batch_len = slots // batches
    batch_sums = np.zeros((batches, rate.size))
    total = np.zeros(rate.size)
    outages = np.zeros(rate.size, dtype=np.int64)
    rewarded = np.zeros(rate.size, dtype=np.int64)
    rewarded_outages = np.zeros(rate.size, dtype=np.int64)
    same_block = timing == Timing.SAME_BLOCK
    alpha = None

    for t in range(slots):
        cap = capacity[t]
        if same_block:
            alpha = cap > rate * up
            rate = np.maximum(np.where(alpha, rate * up, rate * down), rate_floor)
        elif alpha is not None:
            rate = np.maximum(np.where(alpha, rate * up, rate * down), rate_floor)

        decoded = cap > rate
        earned = np.where(decoded, rate, 0.0)
        total += earned
        if t < batch_len * batches:
            batch_sums[t // batch_len] += earned
        outages += ~decoded

        if same_block:
            rewarded += alpha
            rewarded_outages += alpha & ~decoded
        else:
            # feedback for the next block, measured against the rate just used
            alpha = cap > rate * up

    batch_means_ = batch_sums / batch_len
    if batches > 1:
        halfwidth = Z_95 * batch_means_.std(axis=0, ddof=1) / np.sqrt(batches)
    else:
        halfwidth = np.zeros(rate.size)
    return {
        'throughput': total / slots,
        'halfwidth': halfwidth,
        'outages': outages,
        'rewarded': rewarded,
        'rewarded_outages': rewarded_outages,
        'final_rate': rate,
    }


def _trace_alg1(gains: np.ndarray, power: float, initial: RateControllerState) -> pd.DataFrame:
    """Slot-by-slot reference run through alg1_feedback / alg1_update"""
    state = initial
    pending = None
    rows = []
    for t, g in enumerate(gains):
        if initial.timing == Timing.SAME_BLOCK:
            alpha = alg1_feedback(g, power, state)
            state = alg1_update(state, alpha)
        else:
            if pending is not None:
                state = alg1_update(state, pending)
            alpha = alg1_feedback(g, power, state)
            pending = alpha
        decoded = bool(np.log1p(g * power) > state.rate)
        rows.append({
            'slot': t,
            'gain': g,
            'alpha': alpha,
            'rate': state.rate,
            'decoded': decoded,
            'earned': state.rate if decoded else 0.0,
        })
    return pd.DataFrame(rows)


def simulate_alg1(params: FadingParams, power: float, initial: RateControllerState, slots: int,
                  record_trace: bool = False, batches: int = 20) -> ThroughputResult:
    """
    Throughput of Algorithm 1 over one continuous fading trajectory

    Args:
        params: Fading correlation and seed
        power: Transmit power (linear)
        initial: Initial controller state (R, delta, timing, floor)
        slots: Number of codeword slots
        record_trace: Also return the per-slot trace (slow reference path)
        batches: Batches for the batch-means CI

    Returns:
        ThroughputResult (trace attached when requested)
    """
    if slots < 1:
        raise ValueError("slots must be >= 1")
    gains = gain_trajectory(params, slots)

    if record_trace:
        trace = _trace_alg1(gains, power, initial)
        estimate = batch_means(trace['earned'].to_numpy(), batches)
        return ThroughputResult(throughput=estimate.mean, ci_halfwidth=estimate.halfwidth_95,
                                slots=slots, outage_rate=float(1.0 - trace['decoded'].mean()),
                                trace=trace)

    run = run_rate_controllers(gains, power, [initial.rate], [initial.delta],
                               rate_floor=initial.rate_floor, timing=initial.timing, batches=batches)
    return ThroughputResult(throughput=float(run['throughput'][0]),
                            ci_halfwidth=float(run['halfwidth'][0]),
                            slots=slots, outage_rate=float(run['outages'][0] / slots))


def evaluate_alg1(params: FadingParams, power: float, state: RateControllerState,
                  plan: ExperimentPlan) -> EstimateWithCI:
    """Replicated throughput of a fixed controller (seeds from the plan)"""
    def one(seed: int, slots: int) -> float:
        return simulate_alg1(params.with_seed(seed), power, state, slots).throughput

    return run_replicated(one, plan)


def tune_alg1(params: FadingParams, power: float, rate_grid: SearchGrid, delta_grid: SearchGrid,
              search_slots: int = 100000, eval_plan: ExperimentPlan = None,
              timing: Timing = Timing.SAME_BLOCK,
              rate_floor: float = 1e-3) -> Tuple[RateControllerState, ThroughputResult]:
    """
    Exhaustive search for the initial rate and delta of Algorithm 1

    The search scores every candidate on one common trajectory (seed from
    params); the winner is re-estimated on fresh seeds from eval_plan.

    Args:
        params: Fading correlation; its seed drives the search trajectory
        power: Transmit power (linear)
        rate_grid: Grid for the initial rate (npcu)
        delta_grid: Grid for delta, inside (0, 1)
        search_slots: Trajectory length during the search
        eval_plan: Replications for the final estimate; None means
            20 replications of 50000 slots seeded after the search seed
        timing: Feedback timing mode
        rate_floor: Lower clamp on R

    Returns:
        (winning controller state, final ThroughputResult)
    """
    if delta_grid.lower <= 0 or delta_grid.upper >= 1:
        raise ValueError("delta grid must stay inside (0, 1)")
    gains = gain_trajectory(params, search_slots)

    def objective(points: np.ndarray) -> np.ndarray:
        run = run_rate_controllers(gains, power, points[:, 0], points[:, 1],
                                   rate_floor=rate_floor, timing=timing)
        return run['throughput']

    result = grid_search(objective, [rate_grid, delta_grid], maximize=True, vectorized=True)
    state = RateControllerState(rate=max(float(result.x[0]), rate_floor), delta=float(result.x[1]),
                                timing=timing, rate_floor=rate_floor)
    logger.info(f"Algorithm 1 tuned at P={power:.4g}, beta={params.beta}: R0={state.rate:.4f}, "
                f"delta={state.delta:.4f}, search throughput={result.fun:.5f}")

    if eval_plan is None:
        eval_plan = ExperimentPlan(base_seed=params.seed + 1, replications=20, slots_or_packets=50000)
    estimate = evaluate_alg1(params, power, state, eval_plan)
    final = ThroughputResult(throughput=max(estimate.mean, 0.0), ci_halfwidth=estimate.halfwidth_95,
                             slots=eval_plan.replications * eval_plan.slots_or_packets)
    return state, final
