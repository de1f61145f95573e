"""
Command-line entry point: `selective-oosm run | sweep | theorem1`.
"""

import os
from pathlib import Path
from typing import List, Optional

import click
from dotenv import load_dotenv

from ..errors import ConfigError, OosmError
from ..filters.strategies import FILTER_NAMES
from ..simulation.scenario import ScenarioConfig, load_scenario
from ..utils.file_handler import ReportHandler
from ..utils.logger import setup_logger
from .harness import DEFAULT_FILTERS, SWEEP_C_AVE, complexity_sweep, run_benchmark
from .theorem import DEFAULT_SIGMAS, theorem1_study

WORKERS_ENV = "OOSM_WORKERS"


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise click.BadParameter(f"Expected comma-separated numbers, got {text!r}") from e


def _filter_list(text: str) -> List[str]:
    names = [item.strip() for item in text.split(",") if item.strip()]
    unknown = [n for n in names if n not in FILTER_NAMES]
    if unknown or not names:
        raise click.BadParameter(f"Unknown filters {unknown}; choose from {', '.join(FILTER_NAMES)}")
    return names


def _scenario(config_path: Optional[str], **overrides) -> ScenarioConfig:
    base = load_scenario(config_path) if config_path else ScenarioConfig()
    return base.with_overrides(**overrides)


def _workers(value: Optional[int]) -> int:
    if value is not None:
        return value
    return int(os.getenv(WORKERS_ENV, "1"))


@click.group()
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR (default $OOSM_LOG_LEVEL or INFO)")
@click.option("--log-file", default=None, type=click.Path(), help="Also log to this file")
def cli(log_level, log_file):
    """Selective OOSM particle filtering benchmarks."""
    load_dotenv("config/.env")
    setup_logger(level=log_level, log_file=log_file)


def scenario_options(func):
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="Scenario document (.json or .yaml)"),
        click.option("--seed", type=int, default=None, help="Master seed"),
        click.option("--runs", type=int, default=None, help="Monte-Carlo runs"),
        click.option("--particles", type=int, default=None, help="Particle count N"),
        click.option("--nu", type=float, default=None, help="ESS-ratio escalation threshold"),
        click.option("--workers", type=int, default=None, help="Worker processes (default $OOSM_WORKERS or 1)"),
        click.option("--out", "out_dir", type=click.Path(file_okay=False), default="results", show_default=True),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@cli.command()
@scenario_options
@click.option("--filters", default=",".join(DEFAULT_FILTERS), show_default=True,
              help="Comma-separated subset of " + ",".join(FILTER_NAMES))
@click.option("--c-ave", type=float, default=None, help="Average SEPF-EKS sweeps per step")
@click.option("--no-wall-time", is_flag=True, help="Write 0 for wall time so outputs are byte-stable")
def run(config_path, seed, runs, particles, nu, workers, out_dir, filters, c_ave, no_wall_time):
    """Benchmark filters on the scenario and write rms/stats/errors CSVs."""
    try:
        cfg = _scenario(config_path, seed=seed, n_runs=runs, n_particles=particles, nu=nu, c_ave=c_ave)
        report = run_benchmark(cfg, _filter_list(filters), workers=_workers(workers),
                               record_wall_time=not no_wall_time, out_dir=out_dir)
    except OosmError as e:
        raise click.ClickException(str(e)) from e
    click.echo(report.stats.to_string(index=False))


@cli.command()
@scenario_options
@click.option("--c-ave-list", default=",".join(f"{c:g}" for c in SWEEP_C_AVE), show_default=True,
              help="Comma-separated C_ave values")
@click.option("--filters", default="PF-SEL", show_default=True,
              help="PF-SEL and reference filters from " + ",".join(FILTER_NAMES))
@click.option("--no-wall-time", is_flag=True, help="Write 0 for wall time so sweep.csv is byte-stable")
def sweep(config_path, seed, runs, particles, nu, workers, out_dir, c_ave_list, filters, no_wall_time):
    """Run PF-SEL over a list of C_ave values, plus reference filters, and write sweep.csv."""
    try:
        cfg = _scenario(config_path, seed=seed, n_runs=runs, n_particles=particles, nu=nu)
        frame = complexity_sweep(cfg, _float_list(c_ave_list), workers=_workers(workers), out_dir=out_dir,
                                 filters=_filter_list(filters), record_wall_time=not no_wall_time)
    except OosmError as e:
        raise click.ClickException(str(e)) from e
    click.echo(frame.to_string(index=False))


@cli.command()
@click.option("--systems", type=int, default=20, show_default=True)
@click.option("--state-dim", type=int, default=2, show_default=True)
@click.option("--sensors", type=int, default=2, show_default=True)
@click.option("--window", type=int, default=3, show_default=True)
@click.option("--sigmas", default=",".join(f"{s:g}" for s in DEFAULT_SIGMAS), show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="results", show_default=True)
def theorem1(systems, state_dim, sensors, window, sigmas, seed, out_dir):
    """Compare exact and block-diagonal trace terms and write theorem1.csv."""
    try:
        frame = theorem1_study(systems, state_dim, sensors, window, _float_list(sigmas), seed)
    except ConfigError as e:
        raise click.ClickException(str(e)) from e
    ReportHandler.write_csv(frame, Path(out_dir) / "theorem1.csv")
    click.echo(frame.to_string(index=False))


if __name__ == "__main__":
    cli()
