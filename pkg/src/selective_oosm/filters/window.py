"""
Out-of-sequence measurement records and the rolling window store.

The window keeps, for the last ℓ+2 steps, the Gaussian summary of the
filtering posterior, the measurements received for that step and which
(sensor, step) pairs have already arrived. A summary is stale when a
measurement stored at or before its step was incorporated by reweighting
later on, so it does not reflect every stored measurement.
"""

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Set, Tuple

import numpy as np

from ..core.model import SensorModel
from ..errors import WindowError
from ..utils.logger import get_logger
from .particle import GaussianSummary, ParticleSet

logger = get_logger(__name__)


@dataclass(frozen=True)
class OosmRecord:
    """
    A measurement acquired at origin_time that reached the fusion centre at arrival_time.
    """

    sensor_id: int
    origin_time: int
    arrival_time: int
    value: np.ndarray = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "value", np.atleast_1d(np.asarray(self.value, dtype=float)))
        if self.arrival_time < self.origin_time:
            raise WindowError(
                f"Measurement from sensor {self.sensor_id} arrives at {self.arrival_time} "
                f"before it was taken at {self.origin_time}"
            )

    @property
    def delay(self) -> int:
        return self.arrival_time - self.origin_time


@dataclass
class OosmBatch:
    """All OOSMs received at one step (Z_k)."""

    arrival_time: int
    records: List[OosmRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[OosmRecord]:
        return iter(self.records)

    def __bool__(self) -> bool:
        return bool(self.records)

    def add(self, record: OosmRecord):
        if record.arrival_time != self.arrival_time:
            raise WindowError(
                f"Record arriving at {record.arrival_time} added to batch for {self.arrival_time}"
            )
        self.records.append(record)

    @property
    def earliest(self) -> int:
        """Smallest origin time τ̃ in the batch."""
        if not self.records:
            raise WindowError(f"Empty batch at {self.arrival_time} has no earliest origin time")
        return min(r.origin_time for r in self.records)

    def groups(self) -> "OrderedDict[int, List[OosmRecord]]":
        """Records grouped by origin time, ascending, sensors sorted within a group."""
        grouped: Dict[int, List[OosmRecord]] = {}
        for record in self.records:
            grouped.setdefault(record.origin_time, []).append(record)
        return OrderedDict(
            (tau, sorted(grouped[tau], key=lambda r: r.sensor_id)) for tau in sorted(grouped)
        )


@dataclass
class WindowSlot:
    step: int
    summary: GaussianSummary
    measurements: Dict[int, np.ndarray] = field(default_factory=dict)
    particles: Optional[ParticleSet] = None


class WindowStore:
    """
    Rolling store Ω_k of per-step summaries and measurements.

    Slots cover [k−ℓ−1, k]; the initial step carries the prior summary and
    no measurements.
    """

    def __init__(self, max_delay: int, initial_step: int = 0, keep_particles: bool = False):
        if max_delay < 0:
            raise WindowError(f"Maximum delay must be non-negative, got {max_delay}")
        self.max_delay = int(max_delay)
        self.initial_step = int(initial_step)
        self.keep_particles = keep_particles
        self._slots: "OrderedDict[int, WindowSlot]" = OrderedDict()
        self._arrived: Set[Tuple[int, int]] = set()
        self._stale: Set[int] = set()

    def __contains__(self, step: int) -> bool:
        return step in self._slots

    def __len__(self) -> int:
        return len(self._slots)

    @property
    def steps(self) -> List[int]:
        return list(self._slots)

    @property
    def current_step(self) -> int:
        if not self._slots:
            raise WindowError("Window is empty")
        return next(reversed(self._slots))

    @property
    def oldest_step(self) -> int:
        if not self._slots:
            raise WindowError("Window is empty")
        return next(iter(self._slots))

    def _slot(self, step: int) -> WindowSlot:
        try:
            return self._slots[step]
        except KeyError:
            raise WindowError(
                f"Step {step} is outside the stored window {self.steps[:1] + self.steps[-1:]}"
            ) from None

    def record(self, step: int, summary: GaussianSummary, measurements=None,
               particles: Optional[ParticleSet] = None):
        """
        Append the slot for a new step and slide the window.

        Args:
            step: Must be one past the current step (or any step if empty)
            summary: Filtering summary at this step
            measurements: Undelayed (sensor_id, value) pairs received at this step
            particles: Resampled particle set, kept only if the store keeps particles
        """
        if self._slots and step != self.current_step + 1:
            raise WindowError(f"Cannot record step {step} after step {self.current_step}")
        slot = WindowSlot(step, summary, particles=particles if self.keep_particles else None)
        self._slots[step] = slot
        for sensor_id, value in measurements or ():
            self.add_measurement(step, sensor_id, value)
        self._evict()

    def _evict(self):
        horizon = self.current_step - self.max_delay - 1
        while self._slots and next(iter(self._slots)) < horizon:
            old, _ = self._slots.popitem(last=False)
            logger.debug(f"Evicted step {old} from window")
        self._arrived = {(s, t) for s, t in self._arrived if t >= horizon}
        self._stale = {t for t in self._stale if t >= horizon}

    def summary(self, step: int) -> GaussianSummary:
        return self._slot(step).summary

    def particles(self, step: int) -> ParticleSet:
        ps = self._slot(step).particles
        if ps is None:
            raise WindowError(f"No particle set stored for step {step}")
        return ps

    def update(self, step: int, summary: GaussianSummary, particles: Optional[ParticleSet] = None):
        """Overwrite the summary (and stored particles) of an existing slot."""
        slot = self._slot(step)
        slot.summary = summary
        if self.keep_particles and particles is not None:
            slot.particles = particles

    def add_measurement(self, step: int, sensor_id: int, value):
        """Store a measurement for later reruns and mark it arrived."""
        self._slot(step).measurements[int(sensor_id)] = np.atleast_1d(np.asarray(value, dtype=float))
        self.mark_arrived(sensor_id, step)

    def add_records(self, records):
        for record in records:
            self.add_measurement(record.origin_time, record.sensor_id, record.value)

    def measurements(self, step: int) -> Dict[int, np.ndarray]:
        return dict(self._slot(step).measurements)

    def measurement_pairs(self, step: int, sensors: Dict[int, SensorModel]) -> List[Tuple[SensorModel, np.ndarray]]:
        """Stored measurements at a step as (sensor, value) pairs in sensor-id order."""
        stored = self._slot(step).measurements
        return [(sensors[sid], stored[sid]) for sid in sorted(stored)]

    def mark_arrived(self, sensor_id: int, step: int):
        self._arrived.add((int(sensor_id), int(step)))

    def has_arrived(self, sensor_id: int, step: int) -> bool:
        return (int(sensor_id), int(step)) in self._arrived

    def smoothing_steps(self) -> List[int]:
        """Steps [k−ℓ, k] that are held in the window."""
        k = self.current_step
        return [t for t in self._slots if t >= k - self.max_delay]

    def measurable_steps(self) -> List[int]:
        """Past steps that can still deliver OOSMs: [max(k−ℓ, initial+1), k−1]."""
        k = self.current_step
        first = max(k - self.max_delay, self.initial_step + 1)
        return [t for t in self._slots if first <= t < k]

    def mark_stale(self, origin: int):
        """Summaries from origin up to the previous step miss a measurement taken at origin."""
        self._stale.update(t for t in range(int(origin), self.current_step) if t in self._slots)

    @property
    def stale_steps(self) -> List[int]:
        return sorted(self._stale)

    def rerun_start(self, earliest: int) -> int:
        """
        Step a rerun restarts from so that it reprocesses every stored
        measurement its summary does not reflect.

        Args:
            earliest: Earliest origin step of the OOSMs being rerun

        Returns:
            The step before the earliest stale summary or OOSM, no older
            than the oldest stored step
        """
        first = min([int(earliest)] + self.stale_steps)
        return max(first - 1, self.oldest_step)

    def clear_stale(self):
        self._stale.clear()
