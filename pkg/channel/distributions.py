"""
Analytical gain distributions of the Gauss-Markov Rayleigh channel
Marginal (unit-mean exponential), joint pdf of consecutive gains, and the
conditional cdf of the next gain given the current one
"""

import numpy as np
from scipy import stats

from numerics.special import bessel_i0e
from utils.errors import DegenerateDensityError


def _non_negative(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError(f"{name} must be non-negative")
    return x


def marginal_gain_pdf(x):
    """Stationary pdf of g = |h|^2: exp(-x) for x >= 0"""
    x = _non_negative(x, "x")
    return np.exp(-x)


def gain_cdf(x):
    """Stationary cdf of the channel gain: 1 - exp(-x)"""
    x = _non_negative(x, "x")
    return -np.expm1(-x)


def gain_ccdf(x):
    """Pr(g > x) = exp(-x)"""
    x = _non_negative(x, "x")
    return np.exp(-x)


def joint_gain_pdf(x, y, beta: float):
    """
    Joint pdf of the gains of two consecutive slots

    Evaluated in log space with the scaled Bessel function so that large
    arguments do not overflow.

    Args:
        x: Gain at slot t
        y: Gain at slot t+1
        beta: Correlation factor, 0 <= beta < 1

    Returns:
        f(x, y)

    Raises:
        DegenerateDensityError: beta = 1 (the gains are equal almost surely)
    """
    if beta >= 1.0:
        raise DegenerateDensityError("joint gain pdf does not exist for beta = 1")
    if beta < 0.0:
        raise ValueError("beta must be non-negative")
    x = _non_negative(x, "x")
    y = _non_negative(y, "y")

    s = 1.0 - beta ** 2
    z = 2.0 * beta * np.sqrt(x * y) / s
    log_pdf = -np.log(s) - (x + y) / s + np.log(bessel_i0e(z)) + z
    return np.exp(log_pdf)


def conditional_gain_cdf(y, x, beta: float):
    """
    Pr(g(t+1) <= y | g(t) = x)

    2 g(t+1) / (1 - beta^2) given g(t) = x is non-central chi-square with two
    degrees of freedom and non-centrality 2 beta^2 x / (1 - beta^2).

    Args:
        y: Threshold on the next gain
        x: Current gain
        beta: Correlation factor in [0, 1]
    """
    y = _non_negative(y, "y")
    x = _non_negative(x, "x")
    if beta >= 1.0:
        return (x <= y).astype(float)
    if beta == 0.0:
        return gain_cdf(y)
    s = 1.0 - beta ** 2
    return stats.ncx2.cdf(2.0 * y / s, df=2, nc=2.0 * beta ** 2 * x / s)
