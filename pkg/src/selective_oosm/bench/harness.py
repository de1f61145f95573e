"""
Monte-Carlo benchmark harness.

Each run draws one scenario realisation (truth and measurement stream)
and feeds it to every requested filter. Filters in a run share one seed,
so any two filters consume identical random draws until their OOSM
handling diverges.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..errors import ConfigError
from ..filters.strategies import FILTER_NAMES, FilterStats, build_filter
from ..simulation.channel import generate_measurements, generate_truth
from ..simulation.scenario import ScenarioConfig
from ..utils.file_handler import ReportHandler
from ..utils.logger import current_level, get_logger, setup_logger
from .metrics import error_quantiles, mean_with_standard_error, position_errors, rms_curve

logger = get_logger(__name__)

DEFAULT_FILTERS = ("PFall", "PFmis", "SEPF-EKS", "PF-GS", "PF-SEL")
SWEEP_C_AVE = (0.0, 0.1, 0.2, 0.4, 0.5, 0.6, 0.78, 1.0, 1.3, 2.0)
SWEEP_STEPS = (10, 20, 30)
SWEEP_COLUMNS = ["c_ave", "filter", "step", "rms_m", "sweeps_per_step", "sweeps_se", "wall_s"]


@dataclass
class RunResult:
    """Everything one Monte-Carlo run produced."""

    run: int
    truth: np.ndarray
    estimates: Dict[str, np.ndarray]
    stats: Dict[str, FilterStats]
    wall: Dict[str, float]
    stream: Dict[str, int]


@dataclass
class RunReport:
    """
    Aggregated benchmark output.

    Attributes:
        rms: Columns step, filter, rms_m
        stats: Columns filter, admitted_frac_groups, admitted_frac_individual,
            garp_frac, sweeps_per_step, wall_s
        errors: Columns step, filter, q25_m, median_m, q75_m
        runs: One record per (run, filter) with raw counters
    """

    config: ScenarioConfig
    filters: List[str]
    rms: pd.DataFrame
    stats: pd.DataFrame
    errors: pd.DataFrame
    runs: List[Dict[str, Any]] = field(default_factory=list)
    errors_by_filter: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def rms_of(self, filter_name: str) -> np.ndarray:
        frame = self.rms[self.rms["filter"] == filter_name].sort_values("step")
        return frame["rms_m"].to_numpy()

    def stat(self, filter_name: str, column: str) -> float:
        return float(self.stats.loc[self.stats["filter"] == filter_name, column].iloc[0])

    def sweeps_standard_error(self, filter_name: str) -> float:
        per_run = [r["sepf_sweeps"] / r["steps"] for r in self.runs if r["filter"] == filter_name and r["steps"]]
        return mean_with_standard_error(per_run)["se"]

    def write(self, out_dir: Union[str, Path]) -> Dict[str, Path]:
        """Write rms.csv, stats.csv, errors.csv and runs.jsonl."""
        out_dir = Path(out_dir)
        paths = {
            "rms": ReportHandler.write_csv(self.rms, out_dir / "rms.csv"),
            "stats": ReportHandler.write_csv(self.stats, out_dir / "stats.csv"),
            "errors": ReportHandler.write_csv(self.errors, out_dir / "errors.csv"),
        }
        ReportHandler.write_jsonl(self.runs, out_dir / "runs.jsonl")
        paths["runs"] = out_dir / "runs.jsonl"
        return paths


def _init_worker(level: str):
    setup_logger(level=level)


def simulate_run(task: Tuple[ScenarioConfig, Sequence[str], int, np.random.SeedSequence]) -> RunResult:
    """
    One Monte-Carlo run: a fresh scenario realisation through every filter.

    Args:
        task: (config, filter names, run index, seed sequence of the run)

    Returns:
        RunResult with (T, 2) position estimates per filter for k = 1…T
    """
    cfg, filters, run, seed = task
    scenario_seed, filter_seed = seed.spawn(2)

    model = cfg.build_model()
    sensors = cfg.build_sensors()
    prior = cfg.build_prior()
    truth = generate_truth(cfg)
    stream = generate_measurements(truth, cfg, np.random.default_rng(scenario_seed), sensors)

    estimates, stats, wall = {}, {}, {}
    for name in filters:
        flt = build_filter(
            name, model, sensors, prior, cfg.n_particles, cfg.max_delay,
            np.random.default_rng(filter_seed),
            selection=cfg.selection_config() if name == "PF-SEL" else None,
        )
        steps = stream.complete_steps() if name == "PFall" else stream.delayed_steps()
        started = time.perf_counter()
        means = flt.run(steps)
        wall[name] = time.perf_counter() - started
        estimates[name] = means[:, :2]
        stats[name] = flt.stats

    logger.debug(f"Run {run} finished")
    return RunResult(
        run=run,
        truth=truth[1:, :2],
        estimates=estimates,
        stats=stats,
        wall=wall,
        stream={
            "generated": stream.generated,
            "delivered": stream.delivered,
            "dropped": stream.dropped,
            "truncated": stream.truncated,
        },
    )


def _check_filters(filters: Iterable[str]) -> List[str]:
    filters = list(filters)
    unknown = [f for f in filters if f not in FILTER_NAMES]
    if unknown or not filters:
        raise ConfigError(f"Unknown or empty filter list {filters}; choose from {', '.join(FILTER_NAMES)}")
    return filters


def _execute(tasks: List[tuple], workers: int) -> List[RunResult]:
    if workers <= 1:
        return [simulate_run(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(current_level(),)) as executor:
        return list(executor.map(simulate_run, tasks))


def run_benchmark(
        cfg: ScenarioConfig,
        filters: Sequence[str] = DEFAULT_FILTERS,
        workers: int = 1,
        record_wall_time: bool = True,
        out_dir: Optional[Union[str, Path]] = None,
) -> RunReport:
    """
    Run cfg.n_runs seeded Monte-Carlo trials of each filter.

    Args:
        cfg: Scenario, including seed, run count and selection parameters
        filters: Subset of FILTER_NAMES
        workers: Worker processes; 1 runs inline
        record_wall_time: Report 0 wall time when False, making every
            output byte-stable
        out_dir: Write the CSV and JSONL outputs here when given

    Returns:
        RunReport

    Raises:
        ConfigError: If a filter name is unknown
    """
    filters = _check_filters(filters)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_runs)
    logger.info(
        f"Benchmarking {', '.join(filters)} over {cfg.n_runs} runs "
        f"(N={cfg.n_particles}, C_ave={cfg.c_ave}, workers={workers})"
    )
    results = _execute([(cfg, filters, i, seed) for i, seed in enumerate(seeds)], workers)
    report = summarize(cfg, filters, results, record_wall_time)

    for name in filters:
        logger.info(
            f"{name}: mean RMS {report.rms_of(name).mean():.2f} m, "
            f"admitted {report.stat(name, 'admitted_frac_individual'):.2%}, "
            f"GARP {report.stat(name, 'garp_frac'):.2%}, "
            f"sweeps/step {report.stat(name, 'sweeps_per_step'):.3f}"
        )
    if out_dir is not None:
        report.write(out_dir)
        logger.info(f"Wrote benchmark outputs to {out_dir}")
    return report


def summarize(cfg: ScenarioConfig, filters: Sequence[str], results: List[RunResult],
              record_wall_time: bool = True) -> RunReport:
    """Reduce per-run results, in run order, into the report tables."""
    truth = results[0].truth
    steps = np.arange(1, truth.shape[0] + 1)
    rms_rows, stat_rows, error_rows, records = [], [], [], []
    errors_by_filter = {}

    for name in filters:
        estimates = np.stack([r.estimates[name] for r in results])
        errors = position_errors(estimates, truth)
        errors_by_filter[name] = errors
        rms = rms_curve(estimates, truth)
        q25, median, q75 = error_quantiles(errors)
        for i, step in enumerate(steps):
            rms_rows.append({"step": int(step), "filter": name, "rms_m": rms[i]})
            error_rows.append({"step": int(step), "filter": name,
                               "q25_m": q25[i], "median_m": median[i], "q75_m": q75[i]})

        total = FilterStats.total(r.stats[name] for r in results)
        wall = float(np.mean([r.wall[name] for r in results])) if record_wall_time else 0.0
        stat_rows.append({
            "filter": name,
            "admitted_frac_groups": total.admitted_frac_groups,
            "admitted_frac_individual": total.admitted_frac_individual,
            "garp_frac": total.garp_frac,
            "sweeps_per_step": total.sweeps_per_step,
            "wall_s": wall,
        })

    for r in results:
        for name in filters:
            records.append({
                "run": r.run,
                "filter": name,
                "n_particles": cfg.n_particles,
                "seed": cfg.seed,
                "c_ave": cfg.c_ave,
                **r.stats[name].to_dict(),
                **r.stream,
            })

    return RunReport(
        config=cfg,
        filters=list(filters),
        rms=pd.DataFrame(rms_rows, columns=["step", "filter", "rms_m"]),
        stats=pd.DataFrame(stat_rows, columns=["filter", "admitted_frac_groups", "admitted_frac_individual",
                                               "garp_frac", "sweeps_per_step", "wall_s"]),
        errors=pd.DataFrame(error_rows, columns=["step", "filter", "q25_m", "median_m", "q75_m"]),
        runs=records,
        errors_by_filter=errors_by_filter,
    )


def complexity_sweep(
        cfg: ScenarioConfig,
        c_ave_list: Sequence[float] = SWEEP_C_AVE,
        steps: Sequence[int] = SWEEP_STEPS,
        workers: int = 1,
        out_dir: Optional[Union[str, Path]] = None,
        filters: Sequence[str] = ("PF-SEL",),
        record_wall_time: bool = True,
) -> pd.DataFrame:
    """
    Trade accuracy against processing cost by varying C_ave.

    PF-SEL is benchmarked once per C_ave. Any other requested filter does
    not depend on C_ave, so it runs once and its rows carry an empty c_ave
    as a reference curve. Every setting reuses cfg.seed, so all rows see
    the same scenarios.

    Args:
        cfg: Base scenario
        c_ave_list: Budgets to sweep
        steps: Steps at which RMS is reported
        workers: Worker processes; 1 runs inline
        out_dir: Write sweep.csv here when given
        filters: PF-SEL and/or reference filters
        record_wall_time: Report 0 wall time when False

    Returns:
        Columns c_ave, filter, step, rms_m, sweeps_per_step, sweeps_se, wall_s

    Raises:
        ConfigError: If a step lies outside 1..duration or a filter is unknown
    """
    filters = _check_filters(filters)
    outside = [int(s) for s in steps if not 1 <= s <= cfg.duration]
    if outside:
        raise ConfigError(f"Sweep steps {outside} outside 1..{cfg.duration}")

    rows = []
    references = [name for name in filters if name != "PF-SEL"]
    if references:
        report = run_benchmark(cfg, references, workers=workers, record_wall_time=record_wall_time)
        for name in references:
            rows.extend(_sweep_rows(report, name, math.nan, steps))
    if "PF-SEL" in filters:
        for c_ave in c_ave_list:
            report = run_benchmark(cfg.with_overrides(c_ave=float(c_ave)), ["PF-SEL"], workers=workers,
                                   record_wall_time=record_wall_time)
            rows.extend(_sweep_rows(report, "PF-SEL", float(c_ave), steps))

    frame = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    if out_dir is not None:
        ReportHandler.write_csv(frame, Path(out_dir) / "sweep.csv")
    return frame


def _sweep_rows(report: RunReport, name: str, c_ave: float, steps: Sequence[int]) -> List[Dict[str, Any]]:
    rms = report.rms_of(name)
    sweeps = report.stat(name, "sweeps_per_step")
    se = report.sweeps_standard_error(name)
    wall = report.stat(name, "wall_s")
    return [
        {"c_ave": c_ave, "filter": name, "step": int(step), "rms_m": rms[step - 1],
         "sweeps_per_step": sweeps, "sweeps_se": se, "wall_s": wall}
        for step in steps
    ]
