"""
Quadrature and root bracketing helpers
Wrap scipy so that non-convergence surfaces as a ConvergenceError
"""

import math
from typing import Callable

from scipy import integrate, optimize

from utils.errors import ConvergenceError


def quadrature_1d(f: Callable[[float], float], a: float, b: float,
                  tol: float = 1e-10, limit: int = 200) -> float:
    """
    Adaptive 1-D integral of f over (a, b); b may be +inf

    Args:
        f: Integrand
        a: Lower limit
        b: Upper limit (math.inf allowed)
        tol: Absolute tolerance
        limit: Subinterval budget

    Returns:
        Integral estimate

    Raises:
        ConvergenceError: estimated error above tol after the budget is spent
    """
    out = integrate.quad(f, a, b, epsabs=tol, epsrel=min(tol, 1e-10), limit=limit, full_output=1)
    value, abserr = out[0], out[1]
    # A fourth element is the quadpack warning message
    if len(out) > 3 and abserr > tol:
        raise ConvergenceError(f"quad did not converge: {out[3]}", estimate=value, abserr=abserr)
    return value


def quadrature_2d(f: Callable[[float, float], float], x_lo: float, x_hi: float,
                  y_lo: Callable[[float], float], y_hi: Callable[[float], float],
                  tol: float = 1e-9) -> float:
    """
    2-D integral of f(x, y) with y-limits depending on x

    Args:
        f: Integrand in (x, y) order
        x_lo, x_hi: Outer limits
        y_lo, y_hi: Inner limits as functions of x

    Returns:
        Integral estimate
    """
    # dblquad wants the inner variable first
    value, abserr = integrate.dblquad(lambda y, x: f(x, y), x_lo, x_hi, y_lo, y_hi,
                                      epsabs=tol, epsrel=tol)
    if not math.isfinite(value) or abserr > 100 * tol:
        raise ConvergenceError("dblquad did not converge", estimate=value, abserr=abserr)
    return value


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12,
           max_iter: int = 200) -> float:
    """
    Root of a monotone function on a sign-changing bracket

    Args:
        f: Function with f(lo) and f(hi) of opposite signs
        lo, hi: Bracket
        tol: Width of the final bracket

    Returns:
        Root estimate

    Raises:
        ValueError: bracket does not change sign
    """
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        raise ValueError(f"bisect: f({lo})={f_lo:.3g} and f({hi})={f_hi:.3g} have the same sign")
    return optimize.bisect(f, lo, hi, xtol=tol, maxiter=max_iter)
