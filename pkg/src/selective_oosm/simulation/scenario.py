"""
Scenario configuration: every constant of a tracking experiment, loadable
from JSON or YAML documents whose keys mirror the field names.
"""

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import yaml

from ..core.model import BearingSensor, CoordinatedTurnModel
from ..errors import ConfigError
from ..filters.particle import GaussianSummary
from ..filters.selection import DEFAULT_NU, SelectionConfig, cost_model_from_dict
from ..utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]


def _default_sensors() -> List[Dict[str, Any]]:
    return [
        {"id": 1, "position": [-200.0, 0.0], "sigma": 0.05},
        {"id": 2, "position": [200.0, 0.0], "sigma": 0.05},
        {"id": 3, "position": [-750.0, 750.0], "sigma": 0.05},
    ]


@dataclass
class ScenarioConfig:
    """
    Constants of one tracking scenario.

    Defaults reproduce the three-sensor bearing-only experiment: a
    clockwise coordinated turn of radius 500 m at 200 km/h observed for
    40 s, measurements reaching the fusion centre with probability 0.7
    after a delay uniform over {0, …, 5} steps.
    """

    duration: int = 40
    sampling_period: float = 1.0
    turn_radius: float = 500.0
    speed_kmh: float = 200.0
    start_position: List[float] = field(default_factory=lambda: [-500.0, 500.0])
    process_noise_diag: List[float] = field(default_factory=lambda: [900.0, 900.0, 100.0, 100.0, 0.01])
    sensors: List[Dict[str, Any]] = field(default_factory=_default_sensors)
    p_osm: float = 0.7
    max_delay: int = 5
    undelayed_always_arrive: bool = False
    prior_mean: List[float] = field(default_factory=lambda: [0.0] * 5)
    prior_cov_diag: List[float] = field(default_factory=lambda: [1e6, 1e6, 900.0, 900.0, 0.01])
    n_particles: int = 2000
    n_runs: int = 200
    seed: int = 20100701
    c_ave: float = 0.6
    nu: float = DEFAULT_NU
    cost_model: Dict[str, Any] = field(default_factory=lambda: {"kind": "unit"})
    cross_form: str = "conditional"

    def __post_init__(self):
        try:
            self.validate()
        except ConfigError:
            raise
        except (TypeError, ValueError, AttributeError) as e:
            raise ConfigError(f"Scenario field has the wrong type: {e}") from e

    @property
    def speed(self) -> float:
        """Target speed in m/s."""
        return self.speed_kmh / 3.6

    @property
    def turn_rate(self) -> float:
        """True turn rate in rad/s; negative is clockwise."""
        return -self.speed / self.turn_radius

    def validate(self):
        """
        Check ranges and shapes.

        Raises:
            ConfigError: On the first invalid field
        """
        if self.duration < 1:
            raise ConfigError(f"duration must be at least 1 step, got {self.duration}")
        if self.sampling_period <= 0:
            raise ConfigError(f"sampling_period must be positive, got {self.sampling_period}")
        if self.turn_radius <= 0 or self.speed_kmh <= 0:
            raise ConfigError("turn_radius and speed_kmh must be positive")
        if len(self.start_position) != 2:
            raise ConfigError(f"start_position needs two coordinates, got {self.start_position}")
        for name in ("process_noise_diag", "prior_cov_diag"):
            values = getattr(self, name)
            if len(values) != 5 or any(v <= 0 for v in values):
                raise ConfigError(f"{name} needs five positive variances, got {values}")
        if len(self.prior_mean) != 5:
            raise ConfigError(f"prior_mean needs five entries, got {self.prior_mean}")
        if not self.sensors:
            raise ConfigError("At least one sensor is required")
        ids = [s.get("id") for s in self.sensors]
        if len(set(ids)) != len(ids) or any(i is None for i in ids):
            raise ConfigError(f"Sensor ids must be present and unique, got {ids}")
        for sensor in self.sensors:
            if float(sensor.get("sigma", 0)) <= 0 or len(sensor.get("position", ())) != 2:
                raise ConfigError(f"Sensor {sensor.get('id')} needs a 2-D position and positive sigma")
        if not 0 <= self.p_osm <= 1:
            raise ConfigError(f"p_osm must lie in [0, 1], got {self.p_osm}")
        if self.max_delay < 0:
            raise ConfigError(f"max_delay must be non-negative, got {self.max_delay}")
        if self.n_particles < 1 or self.n_runs < 1:
            raise ConfigError("n_particles and n_runs must be positive")
        if self.c_ave < 0:
            raise ConfigError(f"c_ave must be non-negative, got {self.c_ave}")
        if not 0 <= self.nu <= 1:
            raise ConfigError(f"nu must lie in [0, 1], got {self.nu}")
        cost_model_from_dict(self.cost_model)
        self.selection_config()

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown scenario keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def with_overrides(self, **overrides) -> "ScenarioConfig":
        """Copy with the non-None overrides applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def build_model(self) -> CoordinatedTurnModel:
        return CoordinatedTurnModel(np.diag(self.process_noise_diag), self.sampling_period)

    def build_sensors(self) -> List[BearingSensor]:
        return [
            BearingSensor(int(s["id"]), s["position"], float(s["sigma"]))
            for s in sorted(self.sensors, key=lambda s: int(s["id"]))
        ]

    def build_prior(self) -> GaussianSummary:
        return GaussianSummary(np.asarray(self.prior_mean, dtype=float), np.diag(self.prior_cov_diag))

    def selection_config(self) -> SelectionConfig:
        return SelectionConfig(
            c_ave=self.c_ave,
            nu=self.nu,
            p_osm=self.p_osm,
            max_delay=self.max_delay,
            cost_model=cost_model_from_dict(self.cost_model),
            cross_form=self.cross_form,
        )


def load_scenario(filepath: PathLike) -> ScenarioConfig:
    """
    Read a scenario document.

    Args:
        filepath: .json, .yaml or .yml file

    Returns:
        Validated ScenarioConfig

    Raises:
        ConfigError: If the file cannot be parsed or holds invalid values
    """
    filepath = Path(filepath)
    try:
        with open(filepath, "r", encoding="utf-8") as f:
            if filepath.suffix.lower() in (".yaml", ".yml"):
                data = yaml.safe_load(f) or {}
            else:
                data = json.load(f)
    except (OSError, json.JSONDecodeError, yaml.YAMLError) as e:
        logger.error(f"Error reading scenario {filepath}: {e}")
        raise ConfigError(f"Cannot read scenario {filepath}: {e}") from e

    if not isinstance(data, dict):
        raise ConfigError(f"Scenario {filepath} must hold a mapping, got {type(data).__name__}")
    config = ScenarioConfig.from_dict(data)
    logger.info(f"Loaded scenario from {filepath}")
    return config
