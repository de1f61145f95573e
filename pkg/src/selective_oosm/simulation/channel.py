"""
Ground truth and measurement synthesis through a lossy delaying channel.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..core.model import SensorModel, ct_map
from ..filters.window import OosmBatch, OosmRecord
from ..utils.logger import get_logger
from .scenario import ScenarioConfig

logger = get_logger(__name__)

Reading = Tuple[int, np.ndarray]


@dataclass
class MeasurementStream:
    """
    What the fusion centre receives, step by step.

    Attributes:
        duration: Last measurement step
        undelayed: Step → (sensor_id, value) pairs taken and received at that step
        batches: Arrival step → OOSM batch
        complete: Step → every generated measurement, before the channel
        generated: Measurements produced by the sensors
        delivered: Measurements that reached the fusion centre
        dropped: Measurements lost, including those arriving after the horizon
        truncated: Delivered-too-late measurements (a subset of dropped)
    """

    duration: int
    undelayed: Dict[int, List[Reading]] = field(default_factory=dict)
    batches: Dict[int, OosmBatch] = field(default_factory=dict)
    complete: Dict[int, List[Reading]] = field(default_factory=dict)
    generated: int = 0
    delivered: int = 0
    dropped: int = 0
    truncated: int = 0

    def undelayed_at(self, k: int) -> List[Reading]:
        return self.undelayed.get(k, [])

    def batch_at(self, k: int) -> OosmBatch:
        return self.batches.get(k, OosmBatch(k))

    def complete_at(self, k: int) -> List[Reading]:
        return self.complete.get(k, [])

    def delayed_steps(self) -> Iterator[Tuple[int, List[Reading], OosmBatch]]:
        """(k, undelayed, batch) triples as a delay-aware filter consumes them."""
        for k in range(1, self.duration + 1):
            yield k, self.undelayed_at(k), self.batch_at(k)

    def complete_steps(self) -> Iterator[Tuple[int, List[Reading], Optional[OosmBatch]]]:
        """(k, all measurements, None) triples for a filter that sees everything on time."""
        for k in range(1, self.duration + 1):
            yield k, self.complete_at(k), None

    def delays(self) -> List[int]:
        """Delays of all delivered measurements, 0 for undelayed ones."""
        out = [0] * sum(len(v) for v in self.undelayed.values())
        out.extend(r.delay for batch in self.batches.values() for r in batch)
        return out


def generate_truth(cfg: ScenarioConfig, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Noise-free coordinated-turn trajectory.

    The target starts at cfg.start_position heading +y and turns at
    cfg.turn_rate, so it stays on a circle of cfg.turn_radius.

    Args:
        cfg: Scenario
        rng: Unused; the trajectory is deterministic

    Returns:
        (duration+1, 5) states for k = 0…duration
    """
    x = np.array([cfg.start_position[0], cfg.start_position[1], 0.0, cfg.speed, cfg.turn_rate])
    truth = [x]
    for _ in range(cfg.duration):
        x = ct_map(x, cfg.sampling_period)
        truth.append(x)
    return np.array(truth)


def generate_measurements(
        truth: np.ndarray,
        cfg: ScenarioConfig,
        rng: np.random.Generator,
        sensors: Optional[Sequence[SensorModel]] = None,
) -> MeasurementStream:
    """
    Measure the truth at k = 1…duration and pass each reading through the channel.

    Per (step, sensor) three draws are made in a fixed order: measurement
    noise, arrival, delay. A reading arrives with probability p_osm (always
    when its delay is 0 and undelayed_always_arrive is set) after a delay
    uniform over {0, …, ℓ}; arrivals after the last step are truncated.

    Args:
        truth: (duration+1, 5) true states
        cfg: Scenario
        rng: Random generator for this run's scenario stream
        sensors: Sensors to use; built from cfg when omitted

    Returns:
        MeasurementStream
    """
    sensors = list(sensors) if sensors is not None else cfg.build_sensors()
    duration = truth.shape[0] - 1
    stream = MeasurementStream(duration)

    for k in range(1, duration + 1):
        for sensor in sensors:
            value = sensor.sample(truth[k], rng)
            arrives = rng.random() < cfg.p_osm
            delay = int(rng.integers(0, cfg.max_delay + 1))
            stream.generated += 1
            stream.complete.setdefault(k, []).append((sensor.sensor_id, value))

            if delay == 0 and cfg.undelayed_always_arrive:
                arrives = True
            if not arrives:
                stream.dropped += 1
                continue
            if k + delay > duration:
                stream.truncated += 1
                stream.dropped += 1
                continue

            stream.delivered += 1
            if delay == 0:
                stream.undelayed.setdefault(k, []).append((sensor.sensor_id, value))
            else:
                arrival = k + delay
                stream.batches.setdefault(arrival, OosmBatch(arrival)).add(
                    OosmRecord(sensor.sensor_id, k, arrival, value)
                )

    logger.debug(
        f"Generated {stream.generated} measurements: {stream.delivered} delivered, "
        f"{stream.dropped} dropped ({stream.truncated} past the horizon)"
    )
    return stream
