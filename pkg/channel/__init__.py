"""Channel module: Gauss-Markov Rayleigh block fading and its gain distributions."""

from .fading import FadingParams, ChannelState, GaussMarkovChannel, gain_trajectory
from .distributions import (
    marginal_gain_pdf, gain_cdf, gain_ccdf, joint_gain_pdf, conditional_gain_cdf,
)

__all__ = [
    'FadingParams', 'ChannelState', 'GaussMarkovChannel', 'gain_trajectory',
    'marginal_gain_pdf', 'gain_cdf', 'gain_ccdf', 'joint_gain_pdf', 'conditional_gain_cdf',
]
