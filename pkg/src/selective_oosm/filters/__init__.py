"""Particle filter core, smoothing, selection and OOSM strategies."""

from .particle import ParticleSet, GaussianSummary, sir_step, effective_sample_size, save_gauss, sample_gaussian
from .window import OosmRecord, OosmBatch, WindowStore
from .smoother import SmoothedWindow, rts_smooth, meas_covariance, cross_covariance, conditional_cross_covariance
from .selection import SelectionConfig, CandidateUtility, UnitCost, LinearCost, calc_gamma
from .strategies import FILTER_NAMES, FilterStats, build_filter, process_garp, process_sepf_eks, process_selective

__all__ = [
    "ParticleSet",
    "GaussianSummary",
    "sir_step",
    "effective_sample_size",
    "save_gauss",
    "sample_gaussian",
    "OosmRecord",
    "OosmBatch",
    "WindowStore",
    "SmoothedWindow",
    "rts_smooth",
    "meas_covariance",
    "cross_covariance",
    "conditional_cross_covariance",
    "SelectionConfig",
    "CandidateUtility",
    "UnitCost",
    "LinearCost",
    "calc_gamma",
    "FILTER_NAMES",
    "FilterStats",
    "build_filter",
    "process_garp",
    "process_sepf_eks",
    "process_selective",
]
