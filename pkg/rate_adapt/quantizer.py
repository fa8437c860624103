"""
Static CSI quantization baselines
Throughput of an N-region quantizer, its optimization, and the no-CSIT /
perfect-CSIT closed forms
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from engine.stats import batch_means
from numerics.search import SearchGrid, grid_search, coordinate_search
from numerics.special import lambert_w, scaled_exp_integral_e1


@dataclass(frozen=True)
class QuantizerConfig:
    """
    Quantization thresholds g~_1 < ... < g~_N and transmit power P

    Region i sends rate r_i = log(1 + g~_i P); g~_(N+1) is +inf.
    """
    thresholds: Tuple[float, ...]
    power: float

    def __post_init__(self):
        thresholds = tuple(float(t) for t in self.thresholds)
        object.__setattr__(self, 'thresholds', thresholds)
        if not thresholds:
            raise ValueError("QuantizerConfig needs at least one threshold")
        if thresholds[0] < 0:
            raise ValueError("thresholds must be non-negative")
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError("thresholds must be strictly increasing")
        if not self.power > 0:
            raise ValueError("power must be positive")

    @property
    def levels(self) -> int:
        return len(self.thresholds)

    @property
    def rates(self) -> np.ndarray:
        """Rates r_i in npcu"""
        return np.log1p(np.asarray(self.thresholds) * self.power)


@dataclass
class ThroughputResult:
    """Throughput in npcu with a 95% CI halfwidth (0 for closed forms)"""
    throughput: float
    ci_halfwidth: float = 0.0
    slots: int = 0
    outage_rate: Optional[float] = None
    trace: Optional[pd.DataFrame] = field(default=None, repr=False)

    def __post_init__(self):
        if self.throughput < 0:
            raise ValueError("throughput must be non-negative")
        if self.ci_halfwidth < 0:
            raise ValueError("ci_halfwidth must be non-negative")

    def to_dict(self) -> dict:
        return {
            'throughput': self.throughput,
            'ci_halfwidth': self.ci_halfwidth,
            'slots': self.slots,
            'outage_rate': self.outage_rate,
        }


def throughput_of_thresholds(thresholds: np.ndarray, power: float) -> np.ndarray:
    """
    Vectorized static-quantizer throughput

    Args:
        thresholds: Array [..., N] of ordered thresholds
        power: Transmit power (linear)

    Returns:
        Throughput per row, sum_n log(1 + g~_n P)(exp(-g~_n) - exp(-g~_(n+1)))
    """
    t = np.asarray(thresholds, dtype=float)
    upper = np.exp(-t)
    # the last region is [g~_N, inf)
    nxt = np.concatenate([upper[..., 1:], np.zeros(t.shape[:-1] + (1,))], axis=-1)
    return np.sum(np.log1p(t * power) * (upper - nxt), axis=-1)


def static_throughput(config: QuantizerConfig) -> float:
    """Analytic throughput of a static quantizer over Rayleigh fading"""
    return float(throughput_of_thresholds(np.asarray(config.thresholds), config.power))


def no_csit_threshold(power: float) -> float:
    """Optimal single threshold (e^W(P) - 1) / P"""
    if not power > 0:
        raise ValueError("power must be positive")
    return float(np.expm1(lambert_w(power)) / power)


def throughput_no_csit(power: float) -> float:
    """
    Best single-rate throughput without CSIT: W(P) exp(-(e^W(P) - 1) / P)

    Args:
        power: Transmit power (linear), P > 0
    """
    if not power > 0:
        raise ValueError("power must be positive")
    w = float(lambert_w(power))
    return w * float(np.exp(-np.expm1(w) / power))


def throughput_perfect_csit(power: float) -> float:
    """
    Ergodic capacity with perfect CSIT: int_0^inf exp(-g) log(1 + gP) dg

    Equal to exp(1/P) E1(1/P).
    """
    if not power > 0:
        raise ValueError("power must be positive")
    return float(scaled_exp_integral_e1(1.0 / power))


def _quantile_start(levels: int) -> np.ndarray:
    """Equal-probability thresholds used to seed the coordinate search"""
    n = np.arange(1, levels + 1)
    return -np.log1p(-n / (levels + 1.0))


def optimize_static_quantizer(levels: int, power: float, grid: SearchGrid,
                              coordinate_sweeps: int = 20) -> QuantizerConfig:
    """
    Thresholds maximizing the static-quantizer throughput

    N <= 2 uses the full (refined) product grid; larger N uses coordinate
    search started from equal-probability thresholds, since the product grid
    grows exponentially.

    Args:
        levels: Number of quantization regions N >= 1
        power: Transmit power (linear)
        grid: Threshold grid (range, points, refinement rounds)
        coordinate_sweeps: Passes per refinement round for N > 2

    Returns:
        Optimized QuantizerConfig
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")

    def objective(points: np.ndarray) -> np.ndarray:
        return throughput_of_thresholds(points, power)

    def ordered(points: np.ndarray) -> np.ndarray:
        return np.all(np.diff(points, axis=1) > 0, axis=1)

    if levels <= 2:
        result = grid_search(objective, [grid] * levels, feasibility=ordered,
                             maximize=True, vectorized=True)
    else:
        start = np.minimum(_quantile_start(levels), grid.upper * (1 - 1e-9))
        start = np.maximum.accumulate(start)

        def neighbours(i: int, x: np.ndarray):
            lo = x[i - 1] if i > 0 else grid.lower
            hi = x[i + 1] if i < levels - 1 else grid.upper
            return lo, hi

        result = coordinate_search(objective, start, [grid] * levels, sweeps=coordinate_sweeps,
                                   maximize=True, vectorized=True, feasibility=ordered,
                                   bounds=neighbours)

    config = QuantizerConfig(thresholds=tuple(result.x), power=power)
    logger.debug(f"Static quantizer N={levels}, P={power:.4g}: throughput={result.fun:.6f} "
                 f"({result.nfev} evaluations)")
    return config


def simulate_static_quantizer(config: QuantizerConfig, gains: np.ndarray,
                              batches: int = 20) -> ThroughputResult:
    """
    Monte Carlo throughput of the static quantizer over a gain sequence

    The receiver reports the region of g; the transmitter sends that
    region's rate, which is decoded iff log(1 + gP) >= r_i.
    """
    gains = np.asarray(gains, dtype=float)
    rates = config.rates
    region = np.searchsorted(np.asarray(config.thresholds), gains, side='right') - 1
    # below g~_1 the transmitter still sends r_1, and it fails
    sent = rates[np.maximum(region, 0)]
    decoded = np.log1p(gains * config.power) >= sent
    earned = np.where(decoded, sent, 0.0)
    estimate = batch_means(earned, batches)
    return ThroughputResult(throughput=estimate.mean, ci_halfwidth=estimate.halfwidth_95,
                            slots=gains.size, outage_rate=float(1.0 - decoded.mean()))


def simulate_single_rate(rate: float, power: float, gains: Sequence[float],
                         batches: int = 20) -> ThroughputResult:
    """Monte Carlo throughput of a fixed rate (the open-loop scheme)"""
    gains = np.asarray(gains, dtype=float)
    decoded = np.log1p(gains * power) >= rate
    estimate = batch_means(np.where(decoded, rate, 0.0), batches)
    return ThroughputResult(throughput=estimate.mean, ci_halfwidth=estimate.halfwidth_95,
                            slots=gains.size, outage_rate=float(1.0 - decoded.mean()))
