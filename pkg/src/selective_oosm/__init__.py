"""
Selective OOSM - particle filtering with cost-constrained processing of
out-of-sequence measurements.
"""

__version__ = "0.1.0"

from .utils.logger import setup_logger, get_logger
from .utils.file_handler import ReportHandler
from .filters.strategies import build_filter, FILTER_NAMES
from .simulation.scenario import ScenarioConfig, load_scenario
from .bench.harness import run_benchmark, complexity_sweep

__all__ = [
    "setup_logger",
    "get_logger",
    "ReportHandler",
    "build_filter",
    "FILTER_NAMES",
    "ScenarioConfig",
    "load_scenario",
    "run_benchmark",
    "complexity_sweep",
]
