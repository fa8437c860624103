"""
Estimates with 95% confidence intervals
Replication means, batch means for correlated traces, Wilson intervals for rates
"""

from dataclasses import dataclass, asdict
from typing import Dict, Sequence

import numpy as np
from loguru import logger
from scipy import stats

Z_95 = float(stats.norm.ppf(0.975))


@dataclass(frozen=True)
class EstimateWithCI:
    """Mean with a symmetric 95% confidence halfwidth"""
    mean: float
    halfwidth_95: float
    n: int

    def __post_init__(self):
        if self.halfwidth_95 < 0:
            raise ValueError("halfwidth_95 must be non-negative")

    @property
    def lower(self) -> float:
        return self.mean - self.halfwidth_95

    @property
    def upper(self) -> float:
        return self.mean + self.halfwidth_95

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def mean_ci(samples: Sequence[float]) -> EstimateWithCI:
    """
    Normal-approximation 95% CI over independent samples

    Args:
        samples: Independent observations (e.g. one mean per replication)

    Returns:
        EstimateWithCI; the halfwidth is 0 for a single sample
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("mean_ci needs at least one sample")
    if x.size == 1:
        logger.warning("Confidence interval from a single sample - halfwidth reported as 0")
        return EstimateWithCI(mean=float(x[0]), halfwidth_95=0.0, n=1)
    halfwidth = Z_95 * float(np.std(x, ddof=1)) / np.sqrt(x.size)
    return EstimateWithCI(mean=float(np.mean(x)), halfwidth_95=halfwidth, n=int(x.size))


def batch_means(trace: Sequence[float], batches: int = 20) -> EstimateWithCI:
    """
    Batch-means CI for one correlated trace

    The trace is cut into consecutive, equally sized batches whose means are
    treated as independent.

    Args:
        trace: Per-slot (or per-packet) observations in time order
        batches: Number of batches

    Returns:
        EstimateWithCI with n = len(trace)
    """
    x = np.asarray(trace, dtype=float)
    if x.size == 0:
        raise ValueError("batch_means needs a non-empty trace")
    batches = max(1, min(batches, x.size))
    size = x.size // batches
    if batches == 1 or size == 0:
        return EstimateWithCI(mean=float(np.mean(x)), halfwidth_95=0.0, n=int(x.size))
    means = x[:size * batches].reshape(batches, size).mean(axis=1)
    halfwidth = Z_95 * float(np.std(means, ddof=1)) / np.sqrt(batches)
    return EstimateWithCI(mean=float(np.mean(x)), halfwidth_95=halfwidth, n=int(x.size))


def wilson_interval(events: int, trials: int) -> EstimateWithCI:
    """
    Wilson score interval for a probability such as outage

    The returned mean is the empirical rate; the halfwidth is the larger of
    its distances to the Wilson bounds, so the symmetric interval covers
    the Wilson one.
    """
    if trials < 1:
        raise ValueError("wilson_interval needs at least one trial")
    ci = stats.binomtest(int(events), int(trials)).proportion_ci(confidence_level=0.95, method="wilson")
    rate = events / trials
    halfwidth = max(rate - ci.low, ci.high - rate)
    return EstimateWithCI(mean=float(rate), halfwidth_95=float(halfwidth), n=int(trials))
