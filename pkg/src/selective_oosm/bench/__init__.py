"""Monte-Carlo benchmarks, metrics and the block-diagonal approximation study."""

from .metrics import rms_curve, position_errors, error_quantiles
from .harness import RunReport, run_benchmark, complexity_sweep
from .theorem import theorem1_study

__all__ = ["rms_curve", "position_errors", "error_quantiles", "RunReport", "run_benchmark", "complexity_sweep",
           "theorem1_study"]
