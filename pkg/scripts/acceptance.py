"""
Acceptance Suite - desk-scale end-to-end checks
The quick checks take a few minutes; --figures adds the tuned figure
reproductions, which take up to an hour
"""

import math
import sys
from pathlib import Path
from typing import Callable, List, Tuple

import click
import numpy as np
from loguru import logger
from scipy import integrate, stats

sys.path.insert(0, str(Path(__file__).parent.parent))

from channel import FadingParams, GaussMarkovChannel, gain_trajectory  # noqa: E402
from experiments import dumps_json, reproduce_fig1, reproduce_fig2, reproduce_fig3, run_scheme  # noqa: E402
from harq import (  # noqa: E402
    HarqConfig, PowerControllerState, StaticPowerPolicy, outage_probability_joint, simulate_alg2,
    simulate_harq_static,
)
from numerics import SearchGrid  # noqa: E402
from rate_adapt import (  # noqa: E402
    QuantizerConfig, no_csit_threshold, optimize_static_quantizer, simulate_single_rate,
    simulate_static_quantizer, static_throughput, throughput_no_csit, throughput_perfect_csit,
)
from utils.config import load_config  # noqa: E402

MILLION = 1_000_000
Check = Tuple[str, bool, str]


def check_channel(seed: int) -> List[Check]:
    out = []
    for beta in (0.0, 0.5, 0.9):
        h, _ = GaussMarkovChannel(FadingParams(beta=beta, seed=seed)).coefficients(MILLION)
        g = np.abs(h) ** 2
        ks = stats.kstest(g, 'expon').statistic
        rho = np.corrcoef(h.real[:-1], h.real[1:])[0, 1]
        out.append((f"channel beta={beta}", ks < 0.01 and abs(rho - beta) < 0.01,
                    f"KS={ks:.4f}, lag-1={rho:.4f}"))
    return out


def check_closed_forms(seed: int) -> List[Check]:
    out = []
    gains = gain_trajectory(FadingParams(beta=0.0, seed=seed), MILLION)
    for power in (1.0, 10.0, 100.0):
        rate = math.log1p(no_csit_threshold(power) * power)
        sim = simulate_single_rate(rate, power, gains)
        exact = throughput_no_csit(power)
        out.append((f"no-CSIT P={power:g}", abs(sim.throughput - exact) <= 3 * sim.ci_halfwidth,
                    f"sim={sim.throughput:.5f}+-{sim.ci_halfwidth:.1e}, exact={exact:.5f}"))
        direct, _ = integrate.quad(lambda g: math.exp(-g) * math.log1p(g * power), 0, math.inf)
        closed = throughput_perfect_csit(power)
        out.append((f"perfect-CSIT P={power:g}", abs(direct - closed) < 1e-6,
                    f"quad={direct:.8f}, closed={closed:.8f}"))
    return out


def check_quantizer(seed: int) -> List[Check]:
    out = []
    gains = gain_trajectory(FadingParams(beta=0.0, seed=seed + 1), MILLION)
    config = QuantizerConfig((0.4, 1.5), 10.0)
    sim = simulate_static_quantizer(config, gains)
    exact = static_throughput(config)
    out.append(("quantizer N=2 Monte Carlo", abs(sim.throughput - exact) <= 3 * sim.ci_halfwidth,
                f"sim={sim.throughput:.5f}+-{sim.ci_halfwidth:.1e}, exact={exact:.5f}"))
    grid = SearchGrid(0.0, 8.0, 201, refinement_rounds=3)
    for snr_db in (0.0, 10.0, 20.0):
        power = 10.0 ** (snr_db / 10.0)
        two = static_throughput(optimize_static_quantizer(2, power, grid))
        one = throughput_no_csit(power)
        out.append((f"quantizer N=2 >= N=1 at {snr_db:g} dB", two >= one - 1e-9, f"{two:.5f} vs {one:.5f}"))
    return out


def check_harq(seed: int) -> List[Check]:
    out = []
    c = math.expm1(1.0)
    single = simulate_harq_static(FadingParams(beta=0.9, seed=seed), HarqConfig(1.0, 1),
                                  StaticPowerPolicy((10.0,)), MILLION)
    exact = 1 - math.exp(-c / 10.0)
    out.append(("HARQ M=1 outage", abs(single.outage_prob - exact) <= single.outage_ci,
                f"sim={single.outage_prob:.5f}+-{single.outage_ci:.1e}, exact={exact:.5f}"))

    params = FadingParams(beta=0.9, seed=seed + 1)
    config = HarqConfig(1.0, 2)
    policy = StaticPowerPolicy((6.0, 10.0))
    sim = simulate_harq_static(params, config, policy, MILLION, independent_packets=True, record_trace=True)
    outage = outage_probability_joint(params, config, policy)
    sigma = math.sqrt(outage * (1 - outage) / MILLION)
    out.append(("HARQ M=2 outage vs joint pdf", abs(sim.outage_prob - outage) <= 3 * sigma,
                f"sim={sim.outage_prob:.5f}, quadrature={outage:.5f}"))
    first = math.exp(-c / 6.0)
    sigma = math.sqrt(first * (1 - first) / MILLION)
    out.append(("HARQ M=2 Pr(A_1)", abs(sim.stop_histogram[0] - first) <= 3 * sigma,
                f"sim={sim.stop_histogram[0]:.5f}, exact={first:.5f}"))
    out.append(("HARQ stop histogram sums to 1", abs(sim.stop_histogram.sum() - 1) < 1e-6, ""))

    trace = sim.trace
    energy = np.cumsum(policy.powers)[trace['stop_round'].to_numpy() - 1]
    identity = np.mean(trace['energy'].to_numpy() / trace['stop_round'].to_numpy())
    ok = np.array_equal(energy, trace['energy'].to_numpy()) and math.isclose(identity, sim.avg_power, rel_tol=1e-12)
    out.append(("HARQ per-packet energy identity", ok, f"avg={sim.avg_power:.6f}"))
    return out


def check_determinism(seed: int) -> List[Check]:
    base = {'simulation.seed': seed, 'simulation.replications': 4, 'simulation.slots': 20000,
            'simulation.packets': 20000, 'logging.log_file': '', 'harq.powers_db': [8.0, 8.0]}
    out = []
    for scheme in ('alg1', 'harq-static', 'alg2'):
        docs = [dumps_json(run_scheme(load_config(None, {**base, 'simulation.workers': w}), scheme, 'evaluate'))
                for w in (1, 1, 4)]
        out.append((f"deterministic {scheme}", docs[0] == docs[1] == docs[2], ""))
    return out


def check_degenerate_controller(seed: int) -> List[Check]:
    params = FadingParams(beta=0.9, seed=seed)
    config = HarqConfig(1.0, 2)
    static = simulate_harq_static(params, config, StaticPowerPolicy((8.0, 8.0)), 200000)
    frozen = simulate_alg2(params, config, PowerControllerState(8.0, (0.0, 0.0), (0.0, 0.0)), 200000)
    ok = (np.array_equal(static.stop_histogram, frozen.stop_histogram)
          and static.outage_prob == frozen.outage_prob
          and math.isclose(static.avg_power, frozen.avg_power, rel_tol=1e-12))
    return [("frozen Algorithm 2 equals uniform static HARQ", ok, "")]


def check_figures(seed: int) -> List[Check]:
    out = []
    quiet = {'simulation.seed': seed, 'logging.log_file': ''}

    fig2 = reproduce_fig2(load_config(None, {**quiet, 'figures.fig2.betas': [0.2, 0.9],
                                             'figures.fig2.snr_db': [8.0, 12.0, 16.0]})).table
    high = fig2[fig2['beta'] == 0.9]
    # gains at beta=0.9 measure 1-2% against the optimized 2-level quantizer
    out.append(("Fig. 2 gain > 0 at beta=0.9", bool((high['delta_pct'] > 0.0).all()),
                f"{high['delta_pct'].round(2).tolist()}"))
    at12 = fig2[fig2['snr_db'] == 12.0].set_index('beta')['delta_pct']
    out.append(("Fig. 2 gain grows with beta", bool(at12[0.9] > at12[0.2]),
                f"beta=0.2: {at12[0.2]:.2f}%, beta=0.9: {at12[0.9]:.2f}%"))

    fig1 = reproduce_fig1(load_config(None, {**quiet, 'figures.fig1.next_block': False})).table
    ordered = ((fig1['perfect_csit'] >= fig1['alg1_tuned'] - fig1['alg1_tuned_ci'])
               & (fig1['alg1_tuned'] + fig1['alg1_tuned_ci'] >= fig1['static_n2'])
               & (fig1['static_n2'] >= fig1['no_csit']))
    out.append(("Fig. 1 ordering", bool(ordered.all()), f"{int(ordered.sum())}/{len(ordered)} points"))

    fig3 = reproduce_fig3(load_config(None, {**quiet, 'figures.fig3.epsilons': [0.1, 0.01, 0.00316227766]})).table
    row = fig3[np.isclose(fig3['epsilon'], 0.01)].iloc[0]
    out.append(("Fig. 3 saving vs uniform >= 3 dB", row['saving_vs_uniform_db'] >= 3.0,
                f"{row['saving_vs_uniform_db']:.2f} dB"))
    out.append(("Fig. 3 saving vs static >= 0.5 dB", row['saving_vs_static_db'] >= 0.5,
                f"{row['saving_vs_static_db']:.2f} dB"))
    met = all(fig3[f'{s}_outage'] <= fig3['epsilon'] + 3 * fig3[f'{s}_outage_ci']).all()
              for s in ('uniform', 'static', 'alg2'))
    out.append(("Fig. 3 outage targets met", met, ""))
    gaps = fig3.set_index('epsilon')['saving_vs_uniform_db']
    out.append(("Fig. 3 saving grows as the target tightens", gaps.iloc[-1] >= gaps.iloc[0],
                f"{gaps.round(2).tolist()}"))

    savings = []
    for beta in (0.2, 0.5, 0.9):
        table = reproduce_fig3(load_config(None, {**quiet, 'figures.fig3.beta': beta,
                                                  'figures.fig3.epsilons': [0.01]})).table
        savings.append(float(table['saving_vs_uniform_db'].iloc[0]))
    out.append(("Algorithm 2 saving robust in beta", max(savings) - min(savings) <= 1.5,
                f"{np.round(savings, 2).tolist()} dB"))
    return out


QUICK_CHECKS: List[Callable[[int], List[Check]]] = [
    check_channel, check_closed_forms, check_quantizer, check_harq, check_determinism,
    check_degenerate_controller,
]


@click.command()
@click.option('--seed', type=click.IntRange(min=0), default=2014, show_default=True, help='Base seed.')
@click.option('--figures', is_flag=True, help='Also run the tuned figure reproductions (slow).')
def main(seed: int, figures: bool):
    """Run the acceptance checks and exit non-zero on any failure."""
    logger.info("=" * 60)
    logger.info("LINKSIM - Acceptance Suite")
    logger.info("=" * 60)

    checks = QUICK_CHECKS + ([check_figures] if figures else [])
    failed = 0
    for check in checks:
        for name, ok, detail in check(seed):
            if ok:
                logger.info(f"✓ {name} {detail}")
            else:
                failed += 1
                logger.error(f"✗ {name} {detail}")

    logger.info("=" * 60)
    logger.info("✅ ALL CHECKS PASSED" if not failed else f"❌ {failed} CHECK(S) FAILED")
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
