"""
Repetition-time-diversity (Type III) HARQ chain with MRC
Configuration and result types, the per-round decode rule, and the Monte Carlo
simulation of a static per-round power policy
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from channel.fading import FadingParams, GaussMarkovChannel, gain_trajectory
from engine.replication import ExperimentPlan, run_replicated
from engine.stats import batch_means, wilson_interval
from utils.units import db_to_linear, linear_to_db


@dataclass(frozen=True)
class HarqConfig:
    """Codeword rate R (npcu), maximum rounds M and outage target epsilon"""
    rate: float
    max_rounds: int
    outage_target: float = 0.01

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"rate must be positive, got {self.rate}")
        if int(self.max_rounds) != self.max_rounds or self.max_rounds < 1:
            raise ValueError(f"max_rounds must be an integer >= 1, got {self.max_rounds}")
        if not 0.0 < self.outage_target < 1.0:
            raise ValueError(f"outage_target must lie in (0, 1), got {self.outage_target}")

    @property
    def threshold(self) -> float:
        """Accumulated SNR needed to decode, e^R - 1"""
        return decoding_threshold(self.rate)


@dataclass(frozen=True)
class StaticPowerPolicy:
    """Per-round transmit powers P_1..P_M (linear)"""
    powers: Tuple[float, ...]

    def __post_init__(self):
        powers = tuple(float(p) for p in self.powers)
        object.__setattr__(self, 'powers', powers)
        if not powers:
            raise ValueError("StaticPowerPolicy needs at least one round")
        if not all(np.isfinite(p) and p > 0 for p in powers):
            raise ValueError(f"powers must be positive and finite, got {powers}")

    @classmethod
    def uniform(cls, power: float, rounds: int) -> "StaticPowerPolicy":
        return cls(powers=(power,) * rounds)

    @property
    def rounds(self) -> int:
        return len(self.powers)

    def round_average(self) -> np.ndarray:
        """Average power of a packet that stops at round m, (1/m) sum_{n<=m} P_n"""
        p = np.asarray(self.powers)
        return np.cumsum(p) / np.arange(1, p.size + 1)


@dataclass(frozen=True)
class HarqChainState:
    """Round index, MRC-accumulated SNR and energy of the packet in flight"""
    round: int = 1
    accumulated_snr: float = 0.0
    energy_spent: float = 0.0

    def transmit(self, gain: float, power: float) -> "HarqChainState":
        """Add one received copy to the MRC sum"""
        if gain < 0 or power < 0:
            raise ValueError("gain and power must be non-negative")
        return HarqChainState(round=self.round, accumulated_snr=self.accumulated_snr + gain * power,
                              energy_spent=self.energy_spent + power)

    def next_round(self) -> "HarqChainState":
        return HarqChainState(round=self.round + 1, accumulated_snr=self.accumulated_snr,
                              energy_spent=self.energy_spent)


@dataclass
class HarqSimResult:
    """
    Outcome of a HARQ Monte Carlo run

    avg_power is the packet average of each packet's own average power,
    which equals sum_m (1/m sum_{n<=m} P_n) Pr(A_m) for a static policy.
    energy_per_slot is total energy over total slots. stop_histogram[m-1]
    is the fraction of packets whose transmission stopped at round m; a
    packet that reaches round M stops there whether or not it decodes.
    """
    avg_power: float
    outage_prob: float
    avg_power_ci: float
    outage_ci: float
    packets: int
    stop_histogram: np.ndarray
    energy_per_slot: float
    trace: Optional[pd.DataFrame] = field(default=None, repr=False)

    def __post_init__(self):
        hist = np.asarray(self.stop_histogram, dtype=float)
        self.stop_histogram = hist
        if abs(hist.sum() - 1.0) > 1e-9:
            raise ValueError(f"stop_histogram must sum to 1, got {hist.sum()}")
        if not 0.0 <= self.outage_prob <= hist[-1] + 1e-12:
            raise ValueError("outage_prob must lie in [0, Pr(A_M)]")

    @property
    def avg_power_db(self) -> float:
        return float(linear_to_db(self.avg_power))

    def to_dict(self) -> dict:
        return {
            'avg_power': self.avg_power,
            'avg_power_db': self.avg_power_db,
            'avg_power_ci': self.avg_power_ci,
            'energy_per_slot': self.energy_per_slot,
            'outage_prob': self.outage_prob,
            'outage_ci': self.outage_ci,
            'packets': self.packets,
            'stop_histogram': self.stop_histogram.tolist(),
        }


def decoding_threshold(rate: float) -> float:
    """e^R - 1, the accumulated SNR at which a rate-R codeword decodes"""
    return float(np.expm1(rate))


def max_achievable_rate(accumulated_snr, rounds: int):
    """Rate per channel use after m rounds of repetition, log(1 + x) / m"""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    return np.log1p(accumulated_snr) / rounds


def packet_decodes_at(round_m: int, accumulated_snr_prev: float, accumulated_snr_now: float,
                      rate: float) -> bool:
    """
    Decode test at the end of round m: log(1 + sum g(n) P_n) >= R

    The "not before" half of the condition is the caller's sequencing: the
    chain stops at the first round that passes.
    """
    if accumulated_snr_now < accumulated_snr_prev:
        raise ValueError("MRC sum cannot decrease within a packet")
    return bool(np.log1p(accumulated_snr_now) >= rate)


def summarize_packets(stop_round: np.ndarray, outage: np.ndarray, energy: np.ndarray,
                      rounds: int, batches: int = 20,
                      trace: Optional[pd.DataFrame] = None) -> HarqSimResult:
    """
    Fold per-packet outcomes into a HarqSimResult

    Args:
        stop_round: Round (1-based) at which each packet stopped
        outage: Whether each packet ended in outage
        energy: Energy each packet spent (sum of its round powers)
        rounds: Maximum rounds M
        batches: Batches for the avg-power CI (packets are correlated in time)
    """
    stop_round = np.asarray(stop_round)
    packets = stop_round.size
    per_packet = np.asarray(energy, dtype=float) / stop_round
    power = batch_means(per_packet, batches)
    outage_est = wilson_interval(int(np.count_nonzero(outage)), packets)
    hist = np.bincount(stop_round - 1, minlength=rounds)[:rounds] / packets
    return HarqSimResult(
        avg_power=power.mean,
        outage_prob=outage_est.mean,
        avg_power_ci=power.halfwidth_95,
        outage_ci=outage_est.halfwidth_95,
        packets=packets,
        stop_histogram=hist,
        energy_per_slot=float(np.sum(energy) / np.sum(stop_round)),
        trace=trace,
    )


def stop_rounds(gains: np.ndarray, powers: np.ndarray, rate: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Stop round and outage flag for packets whose rounds see gains[:, m]

    Args:
        gains: Array (starts, M), the gain of each round
        powers: Per-round powers, shape (M,)

    Returns:
        (0-based stop round, outage flag)
    """
    acc = np.cumsum(gains * powers, axis=1)
    decoded = np.log1p(acc) >= rate
    any_decoded = decoded.any(axis=1)
    stop = np.where(any_decoded, np.argmax(decoded, axis=1), powers.size - 1)
    return stop, ~any_decoded


def _chain_starts(stop: np.ndarray, packets: int) -> np.ndarray:
    """Start slot of each packet when packets follow each other back to back"""
    starts = np.empty(packets, dtype=np.int64)
    s = 0
    for k in range(packets):
        starts[k] = s
        s += int(stop[s]) + 1
    return starts


def simulate_harq_static(params: FadingParams, config: HarqConfig, policy: StaticPowerPolicy,
                         packets: int, independent_packets: bool = False,
                         record_trace: bool = False, batches: int = 20) -> HarqSimResult:
    """
    Monte Carlo run of RTD HARQ with a fixed per-round power policy

    Each round occupies one fading slot. By default packets follow each
    other over one continuous trajectory. With independent_packets every
    packet draws its own stationary M-slot trajectory, which is the model
    behind the closed-form stop and outage probabilities.

    Args:
        params: Fading correlation and seed
        config: Rate, maximum rounds and outage target
        policy: Powers P_1..P_M
        packets: Number of packets
        independent_packets: Start every packet on a fresh stationary draw
        record_trace: Attach a per-packet DataFrame
        batches: Batches for the avg-power CI

    Returns:
        HarqSimResult
    """
    if packets < 1:
        raise ValueError("packets must be >= 1")
    if policy.rounds != config.max_rounds:
        raise ValueError(f"policy has {policy.rounds} rounds, config expects {config.max_rounds}")

    rounds = config.max_rounds
    powers = np.asarray(policy.powers)

    if independent_packets:
        gains = GaussMarkovChannel(params).block_gains(packets, rounds)
        stop, outage = stop_rounds(gains, powers, config.rate)
        starts = None
    else:
        trajectory = gain_trajectory(params, packets * rounds + rounds - 1)
        # rounds of a packet starting at slot s see trajectory[s:s+M]
        windows = np.lib.stride_tricks.sliding_window_view(trajectory, rounds)
        stop_all, outage_all = stop_rounds(windows, powers, config.rate)
        starts = _chain_starts(stop_all, packets)
        stop, outage = stop_all[starts], outage_all[starts]

    energy = np.cumsum(powers)[stop]
    trace = None
    if record_trace:
        trace = pd.DataFrame({
            'packet': np.arange(packets),
            'start_slot': starts if starts is not None else np.arange(packets) * rounds,
            'stop_round': stop + 1,
            'outage': outage,
            'energy': energy,
        })

    result = summarize_packets(stop + 1, outage, energy, rounds, batches=batches, trace=trace)
    logger.debug(f"Static HARQ (beta={params.beta}, powers={np.round(powers, 4).tolist()}): "
                 f"avg_power={result.avg_power:.4g}, outage={result.outage_prob:.4g} over {packets} packets")
    return result


def policy_from_db(powers_db: Sequence[float]) -> StaticPowerPolicy:
    """Build a policy from per-round powers given in dB"""
    return StaticPowerPolicy(powers=tuple(np.atleast_1d(db_to_linear(np.asarray(powers_db, dtype=float)))))


def replicate_harq(simulation: Callable[[int, int], HarqSimResult], plan: ExperimentPlan,
                   rounds: int) -> HarqSimResult:
    """
    Run a HARQ simulation on every seed of the plan and pool the results

    CIs come from the spread across replications.

    Args:
        simulation: f(seed, packets) -> HarqSimResult
        plan: Seeds, replication count and packets per replication
        rounds: Maximum rounds M
    """
    def one(seed: int, packets: int) -> Dict[str, float]:
        result = simulation(seed, packets)
        metrics = {
            'avg_power': result.avg_power,
            'outage_prob': result.outage_prob,
            'energy_per_slot': result.energy_per_slot,
        }
        metrics.update({f'stop_{m + 1}': float(p) for m, p in enumerate(result.stop_histogram)})
        return metrics

    est = run_replicated(one, plan)
    hist = np.array([est[f'stop_{m + 1}'].mean for m in range(rounds)])
    hist = hist / hist.sum()
    return HarqSimResult(
        avg_power=est['avg_power'].mean,
        outage_prob=min(est['outage_prob'].mean, hist[-1]),
        avg_power_ci=est['avg_power'].halfwidth_95,
        outage_ci=est['outage_prob'].halfwidth_95,
        packets=plan.replications * plan.slots_or_packets,
        stop_histogram=hist,
        energy_per_slot=est['energy_per_slot'].mean,
    )
