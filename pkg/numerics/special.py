"""
Special functions for the closed-form throughput and density expressions
Thin, domain-checked wrappers around scipy.special
"""

import numpy as np
from scipy import special


def bessel_i0(x):
    """
    Zeroth-order modified Bessel function of the first kind

    Args:
        x: Non-negative argument (scalar or array)

    Returns:
        I0(x)
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("bessel_i0 is only defined here for x >= 0")
    return special.i0(x)


def bessel_i0e(x):
    """Exponentially scaled I0: exp(-x) * I0(x), safe for large x"""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("bessel_i0e is only defined here for x >= 0")
    return special.i0e(x)


def lambert_w(x):
    """
    Principal branch of the Lambert W function for x >= 0

    Args:
        x: Non-negative argument (scalar or array)

    Returns:
        w such that w * exp(w) = x
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("lambert_w: negative arguments are not supported")
    w = special.lambertw(x, k=0, tol=1e-14)
    return np.real(w)


def exp_integral_e1(x):
    """
    Exponential integral E1(x) = int_x^inf exp(-u)/u du

    Equals -Ei(-x) for x > 0.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("exp_integral_e1 requires x > 0")
    return special.exp1(x)


# exp(x) overflows beyond this; switch to the confluent hypergeometric form
_SCALED_E1_SWITCH = 700.0


def scaled_exp_integral_e1(x):
    """
    exp(x) * E1(x) without overflow

    For large x this is Tricomi's U(1, 1, x).
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("scaled_exp_integral_e1 requires x > 0")
    small = np.minimum(x, _SCALED_E1_SWITCH)
    direct = np.exp(small) * special.exp1(small)
    return np.where(x <= _SCALED_E1_SWITCH, direct, special.hyperu(1.0, 1.0, x))
