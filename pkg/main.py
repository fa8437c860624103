"""
linksim Main Entry Point
Reinforcement link adaptation over correlated Rayleigh block fading:
scheme runs and figure reproduction from the command line
"""

import sys
import time
from pathlib import Path
from typing import Any, Dict, Optional

import click
from dotenv import load_dotenv
from loguru import logger

from experiments import FIGURES, dumps_json, run_scheme, write_figure, write_json
from utils.config import SCHEMES, config_digest, flatten_config, load_config
from utils.errors import LinkSimError
from utils.logging_setup import setup_logging

# Exit status when a figure sweep finished with failed points
EXIT_PARTIAL = 4

# Read from the working directory when --config is not given
DEFAULT_CONFIG_FILE = "config.yaml"


def _overrides(**values: Any) -> Dict[str, Any]:
    """Command-line flags as dotted configuration keys"""
    keys = {
        'seed': 'simulation.seed',
        'workers': 'simulation.workers',
        'slots': 'simulation.slots',
        'packets': 'simulation.packets',
        'out': 'output.dir',
        'scheme': 'experiment.scheme',
    }
    return {keys[name]: value for name, value in values.items() if value is not None}


def resolve_config(config_path: Optional[str], **flags: Any) -> dict:
    """
    Load the configuration with command-line flags applied

    --slots and --packets also set the evaluation lengths of tuned runs and
    figure sweeps (per replication, so the totals scale with the
    replication count).
    """
    overrides = _overrides(**flags)
    config = load_config(config_path, overrides)
    replications = config['simulation']['replications']
    run_lengths = {}
    if flags.get('slots') is not None:
        run_lengths['rate_adapt.search.eval_slots'] = flags['slots'] * replications
    if flags.get('packets') is not None:
        run_lengths['harq.search.eval_packets'] = flags['packets'] * replications
    if run_lengths:
        config = load_config(config_path, {**overrides, **run_lengths})
    return config


def _prepare(ctx: click.Context, **flags: Any) -> dict:
    config = resolve_config(ctx.obj['config_path'], **flags)
    setup_logging(config)
    return config


def common_options(func):
    """Flags shared by every subcommand"""
    options = [
        click.option('--seed', type=click.IntRange(min=0), envvar='LINKSIM_SEED',
                     help='Base seed (falls back to $LINKSIM_SEED, then the config).'),
        click.option('--workers', type=click.IntRange(min=1), help='Worker threads for replications and sweeps.'),
        click.option('--out', type=click.Path(file_okay=False), help='Output directory.'),
        click.option('--slots', type=click.IntRange(min=1),
                     help='Slots per replication, also for tuned and figure evaluations.'),
        click.option('--packets', type=click.IntRange(min=1),
                     help='Packets per replication, also for tuned and figure evaluations.'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
              help=f'Path to configuration file, YAML or JSON (default: ./{DEFAULT_CONFIG_FILE} if present).')
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[str]):
    """linksim - reinforcement link adaptation simulator"""
    ctx.ensure_object(dict)
    if config_path is None and Path(DEFAULT_CONFIG_FILE).is_file():
        config_path = DEFAULT_CONFIG_FILE
    ctx.obj['config_path'] = config_path


def _run_document(ctx: click.Context, action: str, scheme: Optional[str], out: Optional[str], **flags) -> None:
    config = _prepare(ctx, scheme=scheme, out=out, **flags)
    scheme = config['experiment']['scheme']
    started = time.perf_counter()
    results = run_scheme(config, scheme, action)
    document = {
        'command': ctx.info_name,
        'scheme': scheme,
        'action': action,
        'inputs': flatten_config(config),
        'config_sha256': config_digest(config),
        'results': results,
        'wall_time_s': round(time.perf_counter() - started, 3),
    }
    if out is not None:
        write_json(document, Path(out) / f"{scheme}-{action}.json")
    sys.stdout.write(dumps_json(document))


@cli.command()
@click.option('--scheme', type=click.Choice(SCHEMES), help='Scheme to run (default: experiment.scheme).')
@common_options
@click.pass_context
def simulate(ctx, scheme, out, **flags):
    """Evaluate a scheme with the parameters given in the configuration."""
    _run_document(ctx, 'evaluate', scheme, out, **flags)


@cli.command()
@click.option('--scheme', type=click.Choice(SCHEMES), help='Scheme to run (default: experiment.scheme).')
@common_options
@click.pass_context
def optimize(ctx, scheme, out, **flags):
    """Tune a scheme's parameters, then evaluate the winner."""
    _run_document(ctx, 'tune', scheme, out, **flags)


def _figure_command(name: str):
    @common_options
    @click.pass_context
    def command(ctx, out, **flags):
        config = _prepare(ctx, out=out, **flags)
        logger.info("=" * 60)
        logger.info(f"Reproducing {name}")
        logger.info("=" * 60)
        result = FIGURES[name](config)
        write_figure(name, result.table, config, Path(config['output']['dir']))
        if result.partial:
            logger.error(f"{name}: {len(result.failures)} sweep point(s) failed")
            ctx.exit(EXIT_PARTIAL)

    command.__doc__ = f"Write the {name} table (CSV) and its metadata sidecar."
    return cli.command(name=f"reproduce-{name}")(command)


for _name in FIGURES:
    _figure_command(_name)


def main(argv=None) -> int:
    """Main entry point; returns the process exit status"""
    load_dotenv()
    try:
        status = cli.main(args=argv, prog_name='linksim', standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Abort:
        logger.warning("Interrupted")
        return 1
    except LinkSimError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception:
        logger.exception("Unexpected failure")
        return 1
    return status if isinstance(status, int) else 0


if __name__ == "__main__":
    sys.exit(main())
