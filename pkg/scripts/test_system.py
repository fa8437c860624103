"""
Test Script - Verify the installation
Run this to check your setup before long simulations
"""

import sys
from pathlib import Path

from loguru import logger

sys.path.insert(0, str(Path(__file__).parent.parent))


def test_imports():
    """Test that all required modules can be imported"""
    logger.info("Testing imports...")

    ok = True
    for module, package in [('numpy', 'numpy'), ('scipy', 'scipy'), ('pandas', 'pandas'),
                            ('yaml', 'pyyaml'), ('click', 'click'), ('dotenv', 'python-dotenv')]:
        try:
            __import__(module)
            logger.info(f"✓ {package}")
        except ImportError:
            logger.error(f"✗ {package} - Install with: pip install {package}")
            ok = False

    try:
        import numpy
        major, minor = (int(v) for v in numpy.__version__.split('.')[:2])
        if (major, minor) < (1, 22):
            logger.error(f"✗ numpy {numpy.__version__} is too old (quantile method= needs 1.22)")
            ok = False
    except ImportError:
        pass
    return ok


def test_configuration():
    """Test configuration file"""
    logger.info("\nTesting configuration...")

    config_path = Path(__file__).parent.parent / "config.yaml"
    if not config_path.exists():
        logger.error("✗ config.yaml not found")
        return False

    try:
        from utils.config import load_config

        config = load_config(str(config_path))
        logger.info("✓ config.yaml loaded and validated")
        for section in ('channel', 'simulation', 'rate_adapt', 'harq', 'figures'):
            logger.info(f"  ✓ {section} section present")
        logger.info(f"  beta={config['channel']['beta']}, seed={config['simulation']['seed']}, "
                    f"replications={config['simulation']['replications']}")
        return True

    except Exception as e:
        logger.error(f"✗ Error loading config: {e}")
        return False


def test_channel_module():
    """Short fading trajectory"""
    logger.info("\nTesting channel module...")

    try:
        from channel import FadingParams, gain_trajectory

        g = gain_trajectory(FadingParams(beta=0.9, seed=1), 10000)
        logger.info(f"✓ Gauss-Markov channel (mean gain over 10000 slots: {g.mean():.3f})")
        return True
    except Exception as e:
        logger.error(f"✗ Channel module failed: {e}")
        return False


def test_rate_adapt_module():
    """Closed forms and a short Algorithm 1 run"""
    logger.info("\nTesting rate adaptation module...")

    try:
        from channel import FadingParams
        from rate_adapt import RateControllerState, simulate_alg1, throughput_no_csit, throughput_perfect_csit

        logger.info(f"✓ Closed forms at 10 dB: no-CSIT {throughput_no_csit(10.0):.4f}, "
                    f"perfect-CSIT {throughput_perfect_csit(10.0):.4f} npcu")
        result = simulate_alg1(FadingParams(beta=0.9, seed=1), 10.0, RateControllerState(1.0, 0.1), 5000)
        logger.info(f"✓ Algorithm 1 ({result.throughput:.4f} npcu over 5000 slots)")
        return True
    except Exception as e:
        logger.error(f"✗ Rate adaptation module failed: {e}")
        return False


def test_harq_module():
    """Outage integral and a short Algorithm 2 run"""
    logger.info("\nTesting HARQ module...")

    try:
        from channel import FadingParams
        from harq import HarqConfig, PowerControllerState, StaticPowerPolicy, outage_probability, simulate_alg2

        params = FadingParams(beta=0.9, seed=1)
        config = HarqConfig(rate=1.0, max_rounds=2)
        outage = outage_probability(params, config, StaticPowerPolicy((10.0, 10.0)))
        logger.info(f"✓ Two-round outage at 10 dB: {outage:.4g}")
        result = simulate_alg2(params, config, PowerControllerState(10.0, (0.05, 0.1), (0.3, 0.5)), 5000)
        logger.info(f"✓ Algorithm 2 ({result.avg_power_db:.2f} dB, outage {result.outage_prob:.4g})")
        return True
    except Exception as e:
        logger.error(f"✗ HARQ module failed: {e}")
        return False


def main():
    """Run all tests"""
    logger.info("=" * 60)
    logger.info("LINKSIM - System Test")
    logger.info("=" * 60)

    results = [
        test_imports(),
        test_configuration(),
        test_channel_module(),
        test_rate_adapt_module(),
        test_harq_module(),
    ]

    logger.info("\n" + "=" * 60)
    logger.info("Test complete!" if all(results) else "Test finished with errors")
    logger.info("=" * 60)
    logger.info("\nNext steps:")
    logger.info("1. Fix any errors shown above")
    logger.info("2. Run the unit tests: python tests/test_harq.py (or pytest tests/)")
    logger.info("3. Try a scheme: python main.py simulate --scheme alg1 --slots 20000")
    logger.info("4. Reproduce a figure: python main.py reproduce-fig3")
    logger.info("5. Check the acceptance suite: python scripts/acceptance.py")
    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
