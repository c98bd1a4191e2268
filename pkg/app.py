import os

import click

from config import Config, get_config
from controllers.session_harness import (
    load_config,
    parse_override,
    recompute_summary,
    run_protocol,
    run_sweep,
    validation_report,
)
from utils.exceptions import ConfigValidationError
from utils.metrics import summary_json

SEED = click.IntRange(0, 2 ** 64 - 1)


def config_option(f):
    return click.option('--config', 'config_path', default=Config.DEFAULT_RUN_CONFIG, show_default=True,
                        type=click.Path(exists=True, dir_okay=False),
                        help='RunConfig JSON file')(f)


def _set_quiet(ctx, param, value):
    if value:
        get_config().init_logging(True)


def quiet_option(f):
    return click.option('--quiet', is_flag=True, expose_value=False, callback=_set_quiet,
                        help='Only log warnings and errors')(f)


def _load(config_path, seed):
    try:
        return load_config(config_path, seed)
    except ConfigValidationError as e:
        _report_violations(e.violations)
    except (TypeError, OSError) as e:
        click.echo(f"Error: {e}", err=True)
    raise SystemExit(1)


def _report_violations(violations):
    click.echo(f"Configuration has {len(violations)} problem(s):", err=True)
    for v in violations:
        click.echo(f"  - {v}", err=True)


def _finish(result):
    if result['success']:
        return
    if result.get('violations'):
        _report_violations(result['violations'])
    else:
        click.echo(f"Error: {result['error']}", err=True)
    raise SystemExit(1)


@click.group()
@click.option('--quiet', is_flag=True, help='Only log warnings and errors')
def cli(quiet):
    """Adaptive assist-as-needed gait training simulator.

    --quiet is accepted before or after the command name.
    """
    get_config().init_logging(quiet)


@cli.command()
@quiet_option
@config_option
@click.option('--seed', type=SEED, default=None, help='Override the config seed')
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None, help='Run directory')
def run(config_path, seed, out_dir):
    """Simulate one protocol run."""
    config = _load(config_path, seed)
    result = run_protocol(config, out_dir)
    _finish(result)
    data = result['data']
    click.echo(f"{data['strides']} strides written to {data['run_dir']} ({data['processing_time']} s)")


@cli.command()
@quiet_option
@config_option
@click.option('--seed', type=SEED, default=None, help='Override the config seed')
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None, help='Sweep directory')
@click.option('--set', 'settings', multiple=True, required=True,
              help='Override values, e.g. --set subject.l_h=0,0.1 (repeatable)')
@click.option('--workers', type=click.IntRange(1), default=None, help='Parallel cells')
def sweep(config_path, seed, out_dir, settings, workers):
    """Run the cartesian product of parameter overrides."""
    config = _load(config_path, seed)
    try:
        overrides = [parse_override(s) for s in settings]
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint='--set')
    result = run_sweep(config, overrides, out_dir, workers)
    _finish(result)
    click.echo(f"{result['data']['cells']} cells written, index at {result['data']['index']}")


@cli.command()
@quiet_option
@click.option('--out', 'out_dir', required=True, type=click.Path(exists=True, file_okay=False),
              help='Run directory holding strides.csv and config.json')
def metrics(out_dir):
    """Recompute the summary of an existing run and print it."""
    try:
        summary = recompute_summary(out_dir)
    except (OSError, ValueError) as e:
        click.echo(f"Error: {e}", err=True)
        raise SystemExit(1)
    click.echo(summary_json(summary))


@cli.command()
@quiet_option
@config_option
@click.option('--seed', type=SEED, default=None, help='Override the config seed')
def validate(config_path, seed):
    """Check a configuration without simulating."""
    config = _load(config_path, seed)
    report = validation_report(config)
    if report['violations']:
        _report_violations(report['violations'])
        raise SystemExit(1)
    estimate = report['estimate']
    click.echo(f"{os.path.basename(config_path)}: OK")
    click.echo(f"{estimate['estimated_text']} of walking, {estimate['aan_strides']} of them assisted")


if __name__ == '__main__':
    cli()
