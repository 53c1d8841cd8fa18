"""Command-line harness.

``perp run <config> [--seed N] [--workers N] [--out DIR]`` runs one
experiment and writes CSV + JSON reports; ``perp validate`` checks a
config without simulating; ``perp list-experiments`` prints the kinds.

Exit codes: 0 success, 2 validation failure, 3 runtime/model error.
Environment overrides: PERP_SEED and PERP_WORKERS (command-line flags win).
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click

from .config import EXPERIMENT_KINDS, ConfigError, parse_config
from .errors import PerpsimError
from .experiments import run_experiment
from .report import write_report

EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _load_config(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        click.echo(f"error: cannot read config: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    try:
        return parse_config(text)
    except ConfigError as exc:
        click.echo(f"invalid config ({len(exc.errors)} problem(s)):", err=True)
        for e in exc.errors:
            click.echo(f"  - {e}", err=True)
        sys.exit(EXIT_VALIDATION)


def _env_int(name: str):
    raw = os.environ.get(name)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        click.echo(f"error: {name} must be an integer, got {raw!r}", err=True)
        sys.exit(EXIT_VALIDATION)


@click.group()
def main():
    """Simulation lab for perpetuities and stochastic difference equations."""


@main.command()
@click.argument("config_file", type=click.Path())
@click.option("--seed", type=int, default=None, help="Override run.seed.")
@click.option("--workers", type=int, default=None,
              help="Override run.workers.")
@click.option("--out", type=click.Path(), default="reports",
              help="Output directory for CSV/JSON reports.")
def run(config_file, seed, workers, out):
    """Run the experiment described by CONFIG_FILE."""
    cfg = _load_config(config_file)
    if seed is None:
        seed = _env_int("PERP_SEED")
    if workers is None:
        workers = _env_int("PERP_WORKERS")
    if seed is not None:
        cfg.seed = seed
    if workers is not None:
        if workers < 1:
            click.echo("error: workers must be >= 1", err=True)
            sys.exit(EXIT_VALIDATION)
        cfg.workers = workers
    try:
        report = run_experiment(cfg)
    except PerpsimError as exc:
        click.echo(f"runtime error [{type(exc).__name__}]: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    csv_path, json_path = write_report(report, Path(out))
    click.echo(f"wrote {csv_path}")
    click.echo(f"wrote {json_path}")


@main.command()
@click.argument("config_file", type=click.Path())
def validate(config_file):
    """Validate CONFIG_FILE without running anything."""
    cfg = _load_config(config_file)
    click.echo(f"ok: {cfg.kind} experiment {cfg.experiment_id!r} "
               f"(seed={cfg.seed}, workers={cfg.workers})")


@main.command("list-experiments")
def list_experiments():
    """List the available experiment kinds."""
    for kind in EXPERIMENT_KINDS:
        click.echo(kind)


if __name__ == "__main__":
    main()
