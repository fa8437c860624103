"""Numerics module: special functions, quadrature, root finding and grid search."""

from .special import (
    bessel_i0, bessel_i0e, lambert_w, exp_integral_e1, scaled_exp_integral_e1,
)
from .quadrature import quadrature_1d, quadrature_2d, bisect
from .search import SearchGrid, grid_search, coordinate_search

__all__ = [
    'bessel_i0', 'bessel_i0e', 'lambert_w', 'exp_integral_e1', 'scaled_exp_integral_e1',
    'quadrature_1d', 'quadrature_2d', 'bisect',
    'SearchGrid', 'grid_search', 'coordinate_search',
]
