"""
Outage-limited static power allocation for RTD HARQ
Stop probabilities, outage probability and average power of a fixed policy,
and the minimum-average-power policy meeting an outage target
"""

import math
from typing import Optional

import numpy as np
from loguru import logger

from channel.distributions import conditional_gain_cdf, gain_ccdf, gain_cdf, joint_gain_pdf
from channel.fading import FadingParams, GaussMarkovChannel
from numerics.quadrature import bisect, quadrature_1d, quadrature_2d
from numerics.search import SearchGrid, coordinate_search, grid_search
from utils.errors import InfeasibleError
from utils.units import linear_to_db
from .chain import HarqConfig, StaticPowerPolicy, stop_rounds

# Default Monte Carlo sample for M > 2
MC_PACKETS = 200_000

# e^-x below this point is under 2e-22; integrals over the first gain stop here
GAIN_TAIL = 50.0


def _check(config: HarqConfig, policy: StaticPowerPolicy):
    if policy.rounds != config.max_rounds:
        raise ValueError(f"policy has {policy.rounds} rounds, config expects {config.max_rounds}")


def _packet_gains(params: FadingParams, rounds: int, mc_packets: int) -> np.ndarray:
    """Independent stationary M-slot trajectories, one per packet"""
    return GaussMarkovChannel(params).block_gains(mc_packets, rounds)


def stop_probabilities(params: FadingParams, config: HarqConfig, policy: StaticPowerPolicy,
                       mc_packets: int = MC_PACKETS) -> np.ndarray:
    """
    Pr(A_m), m = 1..M: transmission stops at the end of round m

    A_M is "round M was reached", so Pr(A_M) = Pr(round M-1 still undecoded).
    Exact for M <= 2; Monte Carlo over independent packets otherwise.

    Args:
        params: Fading correlation (seed used by the Monte Carlo branch)
        config: Rate and maximum rounds
        policy: Powers P_1..P_M
        mc_packets: Sample size for M > 2

    Returns:
        Array of M probabilities summing to 1
    """
    _check(config, policy)
    rounds = config.max_rounds
    if rounds == 1:
        return np.array([1.0])
    if rounds == 2:
        first = float(gain_ccdf(config.threshold / policy.powers[0]))
        return np.array([first, 1.0 - first])

    stop, _ = stop_rounds(_packet_gains(params, rounds, mc_packets), np.asarray(policy.powers), config.rate)
    return np.bincount(stop, minlength=rounds)[:rounds] / mc_packets


def outage_probability(params: FadingParams, config: HarqConfig, policy: StaticPowerPolicy,
                       mc_packets: int = MC_PACKETS) -> float:
    """
    Pr(log(1 + sum_{n<=M} g(n) P_n) < R)

    M = 1 is closed form. M = 2 integrates the marginal of g(1) against the
    conditional law of g(2):

        int_0^(c/P1) e^-x Pr(g(2) < (c - x P1) / P2 | g(1) = x) dx,  c = e^R - 1

    Larger M falls back to Monte Carlo over independent packets.
    """
    _check(config, policy)
    c = config.threshold
    p = policy.powers
    if config.max_rounds == 1:
        return float(gain_cdf(c / p[0]))
    if config.max_rounds == 2:
        def integrand(x: float) -> float:
            return math.exp(-x) * float(conditional_gain_cdf(max(c - x * p[0], 0.0) / p[1], x, params.beta))

        upper = min(c / p[0], GAIN_TAIL)
        return min(max(quadrature_1d(integrand, 0.0, upper), 0.0), 1.0)

    _, outage = stop_rounds(_packet_gains(params, config.max_rounds, mc_packets), np.asarray(p), config.rate)
    return float(np.mean(outage))


def outage_probability_joint(params: FadingParams, config: HarqConfig, policy: StaticPowerPolicy) -> float:
    """
    Two-round outage as a 2-D integral of the joint gain pdf over
    g(1) P1 + g(2) P2 < c; the independent cross-check of outage_probability
    """
    _check(config, policy)
    if config.max_rounds != 2:
        raise ValueError("joint-pdf outage is defined for two rounds")
    c = config.threshold
    p1, p2 = policy.powers
    return quadrature_2d(lambda x, y: float(joint_gain_pdf(x, y, params.beta)),
                         0.0, min(c / p1, GAIN_TAIL), lambda x: 0.0,
                         lambda x: min((c - x * p1) / p2, 4.0 * GAIN_TAIL))


def harq_average_power(stop_probs, policy: StaticPowerPolicy) -> float:
    """Average power sum_m (1/m sum_{n<=m} P_n) Pr(A_m)"""
    stop_probs = np.asarray(stop_probs, dtype=float)
    if stop_probs.size != policy.rounds:
        raise ValueError("one stop probability per round expected")
    return float(np.dot(policy.round_average(), stop_probs))


def uniform_power_for_outage(params: FadingParams, config: HarqConfig, power_cap: float = 1e6,
                             power_floor: float = 1e-6, mc_packets: int = MC_PACKETS) -> float:
    """
    Common power P = P_1 = ... = P_M meeting the outage target

    Raises:
        InfeasibleError: outage target missed even at power_cap
    """
    c, eps, rounds = config.threshold, config.outage_target, config.max_rounds
    if rounds == 1:
        power = c / -math.log1p(-eps)
        if power > power_cap:
            raise InfeasibleError(f"outage {eps} needs P={power:.4g} above the cap {power_cap:.4g}")
        return power

    if rounds > 2:
        gains = _packet_gains(params, rounds, mc_packets)
        # the packet needs P >= c / sum(g); outage is the fraction above P
        need = c / np.maximum(gains.sum(axis=1), np.finfo(float).tiny)
        power = float(np.quantile(need, 1.0 - eps, method='higher'))
        if power > power_cap:
            raise InfeasibleError(f"outage {eps} needs P={power:.4g} above the cap {power_cap:.4g}")
        return max(power, power_floor)

    def excess(log_p: float) -> float:
        p = math.exp(log_p)
        return outage_probability(params, config, StaticPowerPolicy.uniform(p, rounds)) - eps

    lo, hi = math.log(power_floor), math.log(power_cap)
    if excess(hi) > 0:
        raise InfeasibleError(f"outage {eps} unreachable with uniform power up to {power_cap:.4g}")
    if excess(lo) <= 0:
        return power_floor
    return math.exp(bisect(excess, lo, hi, tol=1e-10))


def _second_power(params: FadingParams, config: HarqConfig, p1: float,
                  power_cap: float, power_floor: float) -> Optional[float]:
    """P2 meeting the outage target for a given P1, None when unreachable"""
    eps = config.outage_target

    def excess(log_p2: float) -> float:
        policy = StaticPowerPolicy(powers=(p1, math.exp(log_p2)))
        return outage_probability(params, config, policy) - eps

    lo, hi = math.log(power_floor), math.log(power_cap)
    if excess(hi) > 0:
        return None
    if excess(lo) <= 0:
        return power_floor
    return math.exp(bisect(excess, lo, hi, tol=1e-10))


def default_power_grid(center: float, span_db: float = 10.0, points: int = 41,
                       refinement_rounds: int = 3) -> SearchGrid:
    """Log-spaced grid of +-span_db around a power"""
    factor = 10.0 ** (span_db / 10.0)
    return SearchGrid(lower=center / factor, upper=center * factor, points=points,
                      refinement_rounds=refinement_rounds, log_scale=True)


def optimize_static_powers(params: FadingParams, config: HarqConfig, grid: Optional[SearchGrid] = None,
                           power_cap: float = 1e6, power_floor: float = 1e-6,
                           mc_packets: int = MC_PACKETS, sweeps: int = 3) -> StaticPowerPolicy:
    """
    Minimum-average-power static policy meeting the outage target

    M = 1 is closed form. For M = 2 each grid value of P1 is paired with the
    P2 that puts the outage exactly at the target (bisection, outage falls
    strictly with P2), and the average power picks the best P1. For M > 2
    P_1..P_(M-1) are coordinate-searched over one fixed Monte Carlo sample,
    P_M taken as the smallest power meeting the target on that sample.
    The uniform policy is always a candidate.

    Args:
        params: Fading correlation (seed drives the Monte Carlo sample)
        config: Rate, maximum rounds and outage target
        grid: Search grid for each free power; None centres +-10 dB on the
            uniform solution
        power_cap: Largest admissible power
        power_floor: Smallest admissible power
        mc_packets: Monte Carlo sample size for M > 2
        sweeps: Coordinate-search passes per zoom round (M > 2)

    Returns:
        Optimized StaticPowerPolicy

    Raises:
        InfeasibleError: the target cannot be met below power_cap
    """
    rounds = config.max_rounds
    uniform_p = uniform_power_for_outage(params, config, power_cap, power_floor, mc_packets)
    uniform = StaticPowerPolicy.uniform(uniform_p, rounds)
    if rounds == 1:
        return uniform
    if grid is None:
        grid = default_power_grid(uniform_p)

    if rounds == 2:
        def objective(point) -> float:
            p1 = float(point[0])
            p2 = _second_power(params, config, p1, power_cap, power_floor)
            if p2 is None:
                return math.nan
            policy = StaticPowerPolicy(powers=(p1, p2))
            return harq_average_power(stop_probabilities(params, config, policy), policy)

        result = grid_search(objective, [grid], maximize=False)
        best = StaticPowerPolicy(powers=(float(result.x[0]),
                                         _second_power(params, config, float(result.x[0]),
                                                       power_cap, power_floor)))
        best_value = result.fun
        uniform_value = harq_average_power(stop_probabilities(params, config, uniform), uniform)
    else:
        gains = _packet_gains(params, rounds, mc_packets)
        c, eps = config.threshold, config.outage_target

        def last_power(head: np.ndarray) -> np.ndarray:
            # smallest P_M meeting the target for each candidate row of P_1..P_(M-1)
            partial = np.einsum('km,cm->ck', gains[:, :-1], head)
            need = np.clip(c - partial, 0.0, None) / np.maximum(gains[:, -1], np.finfo(float).tiny)
            return np.maximum(np.quantile(need, 1.0 - eps, axis=1, method='higher'), power_floor)

        def average(points: np.ndarray) -> np.ndarray:
            tail = last_power(points)
            values = np.empty(len(points))
            for i, (head, p_m) in enumerate(zip(points, tail)):
                powers = np.append(head, p_m)
                stop, _ = stop_rounds(gains, powers, config.rate)
                values[i] = np.mean(np.cumsum(powers)[stop] / (stop + 1))
            return np.where(tail <= power_cap, values, np.nan)

        result = coordinate_search(average, [uniform_p] * (rounds - 1), [grid] * (rounds - 1),
                                   sweeps=sweeps, maximize=False, vectorized=True)
        head = np.asarray(result.x)
        best = StaticPowerPolicy(powers=tuple(head) + (float(last_power(head[None, :])[0]),))
        best_value = result.fun
        uniform_value = float(average(np.full((1, rounds - 1), uniform_p))[0])

    if not best_value < uniform_value:
        best, best_value = uniform, uniform_value
    logger.info(f"Static HARQ powers (M={rounds}, eps={config.outage_target:g}, beta={params.beta}): "
                f"{np.round(linear_to_db(best.powers), 3).tolist()} dB, "
                f"avg={float(linear_to_db(best_value)):.3f} dB "
                f"(uniform {float(linear_to_db(uniform_value)):.3f} dB)")
    return best
