"""
Selective OOSM processing: measurement utilities, arrival probabilities,
sensor-combination candidates and the cost-constrained admission threshold.

Sensor combinations are bitmasks over the sorted sensor ids: bit i set
means the i-th sensor's measurement is in the combination.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from itertools import groupby
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import numpy as np

from ..core.mat import spd_solve
from ..errors import ConfigError, WindowError
from ..utils.logger import get_logger
from .smoother import CROSS_COVARIANCE_FORMS, SmoothedWindow, meas_covariance
from .window import WindowStore

logger = get_logger(__name__)

DEFAULT_NU = 1.0 / 40.0


class CostModel(ABC):
    """Processing cost C^{I} of one SEPF-EKS sweep over a sensor combination."""

    @abstractmethod
    def cost(self, combo_size: int) -> float:
        ...

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        ...


@dataclass(frozen=True)
class UnitCost(CostModel):
    def cost(self, combo_size: int) -> float:
        return 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "unit"}


@dataclass(frozen=True)
class LinearCost(CostModel):
    """C^{I} = base + per_sensor·|I|."""

    base: float = 1.0
    per_sensor: float = 0.0

    def __post_init__(self):
        if self.base < 0 or self.per_sensor < 0 or self.base + self.per_sensor <= 0:
            raise ConfigError(f"Linear cost needs non-negative terms with a positive total: {self}")

    def cost(self, combo_size: int) -> float:
        return self.base + self.per_sensor * combo_size

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "linear", "base": self.base, "per_sensor": self.per_sensor}


def cost_model_from_dict(data: Dict[str, Any]) -> CostModel:
    kind = str(data.get("kind", "unit")).lower()
    if kind == "unit":
        return UnitCost()
    if kind == "linear":
        return LinearCost(float(data.get("base", 1.0)), float(data.get("per_sensor", 0.0)))
    raise ConfigError(f"Unknown cost model kind: {kind!r}")


@dataclass
class SelectionConfig:
    """
    Parameters of the selective filter.

    Attributes:
        c_ave: Average SEPF-EKS sweeps allowed per step
        nu: ESS-ratio threshold below which a reweighting escalates to a rerun
        p_osm: Probability that a measurement reaches the fusion centre
        max_delay: Maximum delay ℓ in steps
        cost_model: Cost of processing a sensor combination
        cross_form: State-measurement cross-covariance used in utilities,
            "conditional" (C_τᵀHᵀ) or "propagated" (F_{k,τ} R̃_τ Hᵀ)
    """

    c_ave: float = 0.6
    nu: float = DEFAULT_NU
    p_osm: float = 0.7
    max_delay: int = 5
    cost_model: CostModel = field(default_factory=UnitCost)
    cross_form: str = "conditional"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.c_ave >= 0:
            raise ConfigError(f"c_ave must be non-negative, got {self.c_ave}")
        if not 0 <= self.nu <= 1:
            raise ConfigError(f"nu must lie in [0, 1], got {self.nu}")
        if not 0 <= self.p_osm <= 1:
            raise ConfigError(f"p_osm must lie in [0, 1], got {self.p_osm}")
        if self.max_delay < 0:
            raise ConfigError(f"max_delay must be non-negative, got {self.max_delay}")
        if self.cross_form not in CROSS_COVARIANCE_FORMS:
            raise ConfigError(
                f"cross_form must be one of {', '.join(CROSS_COVARIANCE_FORMS)}, got {self.cross_form!r}"
            )


@dataclass(frozen=True)
class CandidateUtility:
    """One (τ, combination) candidate with its utility, arrival probability and cost."""

    step: int
    combo: int
    utility: float
    arrival_prob: float
    cost: float = 1.0

    def __post_init__(self):
        if self.combo <= 0:
            raise ValueError("Candidate combination must be non-empty")
        if self.utility < 0:
            object.__setattr__(self, "utility", 0.0)
        if not 0.0 <= self.arrival_prob <= 1.0:
            raise ValueError(f"Arrival probability {self.arrival_prob} outside [0, 1]")
        if self.cost <= 0:
            raise ValueError(f"Cost must be positive, got {self.cost}")

    @property
    def diminished(self) -> float:
        """R̃ = R / C."""
        return self.utility / self.cost


def combo_members(combo: int, sensor_ids: Sequence[int]) -> List[int]:
    return [sid for i, sid in enumerate(sensor_ids) if combo >> i & 1]


def combo_mask(members: Iterable[int], sensor_ids: Sequence[int]) -> int:
    index = {sid: i for i, sid in enumerate(sensor_ids)}
    mask = 0
    for sid in members:
        mask |= 1 << index[int(sid)]
    return mask


def arrival_prob_single(tau: int, k: int, sensor_id: int, window: WindowStore,
                        p_osm: float, max_delay: int) -> float:
    """
    Probability that the measurement of one sensor taken at τ arrives at k.

    Uses the uniform-delay form p_osm / (ℓ+1−(k−τ)); zero once the
    measurement has arrived.

    Raises:
        WindowError: If τ is not in [k−ℓ, k−1]
    """
    lag = k - tau
    if lag < 1 or lag > max_delay:
        raise WindowError(f"Origin step {tau} is not within {max_delay} steps before {k}")
    if window.has_arrived(sensor_id, tau):
        return 0.0
    return p_osm / (max_delay + 1 - lag)


def arrival_prob_combo(tau: int, k: int, combo: int, sensor_ids: Sequence[int], window: WindowStore,
                       p_osm: float, max_delay: int) -> float:
    """Π_{s∈I} p_s · Π_{j∉I} (1 − p_j)."""
    prob = 1.0
    for i, sid in enumerate(sensor_ids):
        p = arrival_prob_single(tau, k, sid, window, p_osm, max_delay)
        prob *= p if combo >> i & 1 else 1.0 - p
    return prob


def combo_utility(sw: SmoothedWindow, tau: int, members: Sequence[int], cross_form: str = "conditional") -> float:
    """
    tr(R_XY R_YY⁻¹ R_YX) for the stacked measurements of a sensor combination.

    Args:
        sw: Smoothed window at the current step
        tau: Origin step of the combination
        members: Sensor ids in the combination
        cross_form: Key of CROSS_COVARIANCE_FORMS
    """
    R_yy = meas_covariance(sw, tau, members)
    R_xy = CROSS_COVARIANCE_FORMS[cross_form](sw, tau, members)
    return float(np.trace(R_xy @ spd_solve(R_yy, R_xy.T)))


def enumerate_candidates(sw: SmoothedWindow, window: WindowStore, config: SelectionConfig,
                         sensor_ids: Sequence[int]) -> List[CandidateUtility]:
    """
    Every (τ, non-empty combination) pair that could arrive at the current step.
    """
    k = window.current_step
    candidates = []
    for tau in window.measurable_steps():
        for combo in range(1, 1 << len(sensor_ids)):
            members = combo_members(combo, sensor_ids)
            candidates.append(CandidateUtility(
                step=tau,
                combo=combo,
                utility=combo_utility(sw, tau, members, config.cross_form),
                arrival_prob=arrival_prob_combo(tau, k, combo, sensor_ids, window,
                                                config.p_osm, config.max_delay),
                cost=config.cost_model.cost(len(members)),
            ))
    return candidates


def calc_gamma(candidates: Sequence[CandidateUtility], c_ave: float) -> Tuple[float, List[CandidateUtility]]:
    """
    Smallest threshold γ whose expected processing cost fits the budget.

    Candidates are sorted by (R̃ desc, τ asc, combination asc) and the
    expected cost Ψ accumulated; the threshold only moves past a whole run
    of equal R̃ values, so Σ_{R̃ ≥ γ} p·C ≤ C_ave holds with ties.

    Args:
        candidates: Candidate utilities for this step
        c_ave: Budget of expected sweeps per step

    Returns:
        (γ, candidates with R̃ ≥ γ); γ = +inf when nothing fits
    """
    ordered = sorted(candidates, key=lambda c: (-c.diminished, c.step, c.combo))
    gamma = math.inf
    psi = 0.0
    for value, run in groupby(ordered, key=lambda c: c.diminished):
        psi += sum(c.arrival_prob * c.cost for c in run)
        if psi > c_ave:
            break
        gamma = value
    admitted = [c for c in ordered if c.diminished >= gamma]
    return gamma, admitted
