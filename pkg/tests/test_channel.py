#!/usr/bin/env python3
"""
Channel Tests - Gauss-Markov generator and gain distributions
Checks stationarity, correlation, determinism and the analytic densities
"""

import math
import sys
from pathlib import Path

# Add project root to Python path
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
from loguru import logger
from scipy import integrate, stats

from channel import (
    FadingParams, GaussMarkovChannel, conditional_gain_cdf, gain_ccdf, gain_cdf,
    gain_trajectory, joint_gain_pdf, marginal_gain_pdf,
)
from utils.errors import DegenerateDensityError


def _raises(exc, func, *args, **kwargs) -> bool:
    try:
        func(*args, **kwargs)
    except exc:
        return True
    return False


def test_params_validation():
    assert _raises(ValueError, FadingParams, beta=1.2)
    assert _raises(ValueError, FadingParams, beta=-0.1)
    assert _raises(ValueError, FadingParams, beta=0.5, seed=-1)
    assert FadingParams(beta=0.9, seed=3).with_seed(7) == FadingParams(beta=0.9, seed=7)


def test_same_seed_same_trajectory():
    a = gain_trajectory(FadingParams(beta=0.9, seed=11), 1000)
    b = gain_trajectory(FadingParams(beta=0.9, seed=11), 1000)
    c = gain_trajectory(FadingParams(beta=0.9, seed=12), 1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_longer_trajectory_extends_shorter():
    params = FadingParams(beta=0.8, seed=5)
    short = gain_trajectory(params, 500)
    long = gain_trajectory(params, 2000)
    assert np.array_equal(short, long[:500])


def test_step_matches_bulk():
    params = FadingParams(beta=0.7, seed=21)
    channel = GaussMarkovChannel(params)
    state = channel.init_state()
    stepped = [state.g]
    for _ in range(199):
        state = channel.step(state)
        stepped.append(state.g)
    assert state.t == 199

    bulk, last = GaussMarkovChannel(params).gains(200)
    assert np.allclose(stepped, bulk, rtol=1e-12, atol=1e-14)
    assert last.t == 199


def test_stationary_marginal():
    for beta in (0.0, 0.5, 0.9):
        g = gain_trajectory(FadingParams(beta=beta, seed=100), 200000)
        assert abs(g.mean() - 1.0) < 0.03, f"beta={beta}: mean {g.mean()}"
        # thinning makes the samples close to independent
        ks = stats.kstest(g[::50], 'expon').statistic
        assert ks < 0.035, f"beta={beta}: KS {ks}"


def test_lag_one_correlation():
    for beta in (0.0, 0.5, 0.9):
        h, _ = GaussMarkovChannel(FadingParams(beta=beta, seed=8)).coefficients(200000)
        rho = np.corrcoef(h.real[:-1], h.real[1:])[0, 1]
        assert abs(rho - beta) < 0.02, f"beta={beta}: lag-1 correlation {rho}"


def test_beta_one_is_frozen():
    g = gain_trajectory(FadingParams(beta=1.0, seed=2), 50)
    assert np.allclose(g, g[0])


def test_block_gains_shape():
    blocks = GaussMarkovChannel(FadingParams(beta=0.9, seed=1)).block_gains(40000, 3)
    assert blocks.shape == (40000, 3)
    assert np.all(np.abs(blocks.mean(axis=0) - 1.0) < 0.03)
    rho = np.corrcoef(blocks[:, 0], blocks[:, 1])[0, 1]
    # correlation of consecutive gains is beta^2
    assert abs(rho - 0.81) < 0.02


def test_marginal_distribution():
    total, _ = integrate.quad(lambda x: float(marginal_gain_pdf(x)), 0, math.inf)
    assert abs(total - 1.0) < 1e-9
    assert math.isclose(float(gain_cdf(1.0)), 1.0 - math.exp(-1.0), rel_tol=1e-14)
    assert math.isclose(float(gain_cdf(1.0)) + float(gain_ccdf(1.0)), 1.0, rel_tol=1e-14)
    assert _raises(ValueError, gain_cdf, -0.5)
    assert _raises(ValueError, marginal_gain_pdf, -1.0)


def test_joint_pdf():
    assert math.isclose(float(joint_gain_pdf(0.3, 1.7, 0.0)), math.exp(-2.0), rel_tol=1e-12)
    assert _raises(DegenerateDensityError, joint_gain_pdf, 1.0, 1.0, 1.0)
    # beta = 1 is still a ValueError to callers that only expect that
    assert _raises(ValueError, joint_gain_pdf, 1.0, 1.0, 1.0)
    assert np.isfinite(joint_gain_pdf(400.0, 400.0, 0.99))

    # integrating out the second gain leaves the marginal
    for beta in (0.5, 0.9):
        x = 0.8
        marginal, _ = integrate.quad(lambda y: float(joint_gain_pdf(x, y, beta)), 0, math.inf, limit=200)
        assert abs(marginal - math.exp(-x)) < 1e-7, f"beta={beta}: {marginal}"


def test_conditional_cdf():
    y = np.linspace(0.0, 5.0, 11)
    assert np.allclose(conditional_gain_cdf(y, 2.0, 0.0), gain_cdf(y))
    values = conditional_gain_cdf(y, 1.0, 0.8)
    assert np.all(np.diff(values) >= 0)
    assert float(conditional_gain_cdf(60.0, 1.0, 0.8)) > 1 - 1e-12

    # agrees with the joint pdf divided by the marginal
    x, yy, beta = 0.7, 1.2, 0.8
    partial, _ = integrate.quad(lambda t: float(joint_gain_pdf(x, t, beta)), 0, yy)
    assert abs(partial / math.exp(-x) - float(conditional_gain_cdf(yy, x, beta))) < 1e-7

    assert float(conditional_gain_cdf(1.0, 1.5, 1.0)) == 0.0
    assert float(conditional_gain_cdf(2.0, 1.5, 1.0)) == 1.0


def main() -> int:
    logger.info("=" * 60)
    logger.info("CHANNEL TESTS")
    logger.info("=" * 60)
    failed = 0
    for name, func in sorted(globals().items()):
        if name.startswith("test_") and callable(func):
            try:
                func()
                logger.info(f"✓ {name}")
            except AssertionError as e:
                failed += 1
                logger.error(f"✗ {name}: {e}")
            except Exception as e:
                failed += 1
                logger.error(f"✗ {name}: {type(e).__name__}: {e}")
    logger.info(f"{'✅ ALL PASSED' if not failed else f'❌ {failed} FAILED'}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
