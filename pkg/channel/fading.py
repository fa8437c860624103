"""
Gauss-Markov Rayleigh block-fading generator
One complex coefficient per codeword slot, h(t+1) = beta h(t) + sqrt(1 - beta^2) eps
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from loguru import logger
from scipy.signal import lfilter


@dataclass(frozen=True)
class FadingParams:
    """Correlation factor and seed of one fading stream"""
    beta: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")

    def with_seed(self, seed: int) -> "FadingParams":
        """Same correlation, different stream"""
        return FadingParams(beta=self.beta, seed=seed)


@dataclass(frozen=True)
class ChannelState:
    """Fading coefficient at slot t; the gain is always derived from h"""
    h: complex
    t: int = 0

    @property
    def g(self) -> float:
        return self.h.real ** 2 + self.h.imag ** 2


def _complex_normal(rng: np.random.Generator, size=None):
    """CN(0, 1) samples: independent real and imaginary parts of variance 1/2"""
    shape = (2,) if size is None else (size, 2)
    z = rng.standard_normal(shape) / np.sqrt(2.0)
    return z[..., 0] + 1j * z[..., 1]


class GaussMarkovChannel:
    """
    Temporally-correlated Rayleigh block-fading generator

    The generator owns its numpy Generator, so two channels built from the
    same FadingParams produce identical trajectories. Single steps and bulk
    trajectories draw innovations in the same order.
    """

    def __init__(self, params: FadingParams):
        """
        Initialize generator

        Args:
            params: Correlation factor and seed
        """
        self.params = params
        self.rng = np.random.default_rng(params.seed)
        self._innovation_scale = np.sqrt(1.0 - params.beta ** 2)

    def init_state(self) -> ChannelState:
        """Draw h(0) from the stationary CN(0, 1) law (no burn-in needed)"""
        return ChannelState(h=complex(_complex_normal(self.rng)), t=0)

    def step(self, state: ChannelState) -> ChannelState:
        """Advance one codeword slot"""
        eps = complex(_complex_normal(self.rng))
        h = self.params.beta * state.h + self._innovation_scale * eps
        return ChannelState(h=h, t=state.t + 1)

    def coefficients(self, slots: int, state: ChannelState = None) -> Tuple[np.ndarray, ChannelState]:
        """
        Bulk trajectory of fading coefficients

        Args:
            slots: Number of slots to produce
            state: Last state already consumed; None starts a fresh stationary draw

        Returns:
            (h[slots], state of the last produced slot)
        """
        if slots < 1:
            raise ValueError("slots must be >= 1")

        if state is None:
            h0 = complex(_complex_normal(self.rng))
            eps = _complex_normal(self.rng, slots - 1)
            first, start_t = np.array([h0]), 0
            if slots == 1:
                return first, ChannelState(h=h0, t=0)
            zi = np.array([self.params.beta * h0])
            tail, _ = lfilter([self._innovation_scale], [1.0, -self.params.beta], eps, zi=zi)
            h = np.concatenate([first, tail])
        else:
            eps = _complex_normal(self.rng, slots)
            zi = np.array([self.params.beta * state.h])
            h, _ = lfilter([self._innovation_scale], [1.0, -self.params.beta], eps, zi=zi)
            start_t = state.t + 1

        last = ChannelState(h=complex(h[-1]), t=start_t + slots - 1)
        return h, last

    def gains(self, slots: int, state: ChannelState = None) -> Tuple[np.ndarray, ChannelState]:
        """Bulk trajectory of channel gains g = |h|^2"""
        h, last = self.coefficients(slots, state)
        return np.abs(h) ** 2, last

    def block_gains(self, blocks: int, length: int) -> np.ndarray:
        """
        Independent short trajectories, each started from the stationary law

        Args:
            blocks: Number of independent trajectories
            length: Slots per trajectory

        Returns:
            Gains of shape (blocks, length); rows are mutually independent
        """
        if blocks < 1 or length < 1:
            raise ValueError("blocks and length must be >= 1")
        h = np.empty((blocks, length), dtype=complex)
        h[:, 0] = _complex_normal(self.rng, blocks)
        for m in range(1, length):
            h[:, m] = self.params.beta * h[:, m - 1] + self._innovation_scale * _complex_normal(self.rng, blocks)
        return np.abs(h) ** 2


def gain_trajectory(params: FadingParams, slots: int) -> np.ndarray:
    """Convenience: a fresh stationary gain trajectory of the given length"""
    gains, _ = GaussMarkovChannel(params).gains(slots)
    logger.debug(f"Generated {slots} gains (beta={params.beta}, seed={params.seed})")
    return gains
