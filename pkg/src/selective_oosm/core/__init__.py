"""Matrix helpers and state-space models."""

from .mat import (
    multiply,
    spd_solve,
    symmetric_eig_extrema,
    spectral_radius_bound_blocks,
    partition_blocks,
    psd_sqrt,
    symmetrize,
)
from .model import (
    StateModel,
    SensorModel,
    CoordinatedTurnModel,
    LinearGaussianModel,
    BearingSensor,
    LinearSensor,
    ct_transition,
    bearing_measure,
    angle_diff,
)

__all__ = [
    "multiply",
    "spd_solve",
    "symmetric_eig_extrema",
    "spectral_radius_bound_blocks",
    "partition_blocks",
    "psd_sqrt",
    "symmetrize",
    "StateModel",
    "SensorModel",
    "CoordinatedTurnModel",
    "LinearGaussianModel",
    "BearingSensor",
    "LinearSensor",
    "ct_transition",
    "bearing_measure",
    "angle_diff",
]
