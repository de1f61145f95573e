"""
OOSM processing strategies and the particle filters built on them.

Every filter runs the same generic step: an SIR update with the undelayed
measurements, a summary saved into the window, then the strategy's
handling of the OOSM batch that arrived at this step.

    PFall     consumes every measurement at its origin step (no delays)
    PFmis     discards OOSMs
    SEPF-EKS  reweights current particles with smoothed OOSM likelihoods
    PF-GS     reruns the filter from the stored Gaussian summary (OOSM-GARP)
    PF-SEL    selective processing with a cost-constrained threshold
    PF-RR     reruns the filter from the stored particle sets
"""

from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Type

import numpy as np
from scipy import stats as sps

from ..core.mat import spd_solve, symmetrize
from ..core.model import SensorModel, StateModel
from ..errors import ConfigError, DegenerateWeightsError, WindowError
from ..utils.logger import get_logger
from .particle import (
    GaussianSummary,
    ParticleSet,
    effective_sample_size,
    initialize,
    reweight,
    sample_gaussian,
    save_gauss,
    sir_step,
)
from .selection import (
    CandidateUtility,
    SelectionConfig,
    calc_gamma,
    combo_mask,
    combo_members,
    combo_utility,
    enumerate_candidates,
)
from .smoother import SmoothedWindow, rts_smooth
from .window import OosmBatch, OosmRecord, WindowStore

logger = get_logger(__name__)

FILTER_NAMES = ("PFall", "PFmis", "SEPF-EKS", "PF-GS", "PF-SEL", "PF-RR")


@dataclass
class FilterStats:
    """Per-run counters; fractions follow from them."""

    steps: int = 0
    groups_arrived: int = 0
    groups_admitted: int = 0
    oosm_arrived: int = 0
    oosm_admitted: int = 0
    oosm_garp: int = 0
    sepf_sweeps: int = 0
    garp_runs: int = 0
    garp_sweeps: int = 0
    escalations: int = 0
    discarded_groups: int = 0
    degenerate_steps: int = 0

    @staticmethod
    def _ratio(num: float, den: float) -> float:
        return float(num) / den if den else 0.0

    @property
    def admitted_frac_groups(self) -> float:
        return self._ratio(self.groups_admitted, self.groups_arrived)

    @property
    def admitted_frac_individual(self) -> float:
        return self._ratio(self.oosm_admitted, self.oosm_arrived)

    @property
    def garp_frac(self) -> float:
        return self._ratio(self.oosm_garp, self.oosm_arrived)

    @property
    def sweeps_per_step(self) -> float:
        return self._ratio(self.sepf_sweeps, self.steps)

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)

    @classmethod
    def total(cls, parts: Iterable["FilterStats"]) -> "FilterStats":
        out = cls()
        for part in parts:
            for key, value in asdict(part).items():
                setattr(out, key, getattr(out, key) + value)
        return out


class RerunResult(NamedTuple):
    particles: ParticleSet
    sweeps: int
    underflows: int


class SepfResult(NamedTuple):
    particles: ParticleSet
    sweeps: int
    incorporated: List[OosmRecord]
    discarded: int


class SelectiveResult(NamedTuple):
    particles: ParticleSet
    admitted_groups: int
    admitted_oosms: int
    sweeps: int
    escalated: bool
    garp_sweeps: int


def _pairs(records: Sequence[OosmRecord], sensors: Dict[int, SensorModel]) -> List[Tuple[SensorModel, np.ndarray]]:
    return [(sensors[r.sensor_id], r.value) for r in records]


def process_garp(
        batch: OosmBatch,
        window: WindowStore,
        model: StateModel,
        sensors: Dict[int, SensorModel],
        n_particles: int,
        rng: np.random.Generator,
        from_particles: bool = False,
) -> RerunResult:
    """
    Rerun the filter from the step before the earliest OOSM.

    The batch is stored at its origin steps first, so the rerun sees every
    measurement received so far. If earlier OOSMs were folded in by
    reweighting, the rerun starts before the earliest stale summary
    instead. Summaries (and stored particle sets) along the rerun are
    overwritten.

    Args:
        batch: OOSMs received at the current step
        window: Window store, updated in place
        model: Dynamics
        sensors: Sensors by id
        n_particles: Particles drawn from the stored summary
        rng: Random generator
        from_particles: Restart from the stored particle set instead of
            sampling the stored Gaussian

    Returns:
        RerunResult with the particle set at the current step

    Raises:
        WindowError: If the restart step is no longer stored
    """
    k = window.current_step
    if batch.earliest - 1 not in window:
        raise WindowError(
            f"Cannot rerun from step {batch.earliest - 1}: window holds {window.oldest_step}..{k}"
        )
    start = window.rerun_start(batch.earliest)

    window.add_records(batch)
    if from_particles:
        ps = window.particles(start).copy()
    else:
        ps = sample_gaussian(window.summary(start), n_particles, rng)

    underflows = 0
    for step in range(start + 1, k + 1):
        ps = sir_step(ps, window.measurement_pairs(step, sensors), model, rng)
        underflows += int(ps.underflow)
        window.update(step, save_gauss(ps), ps)
    window.clear_stale()

    sweeps = k - start
    logger.debug(f"Reran {sweeps} steps from {start} for {len(batch)} OOSMs at {k}")
    return RerunResult(ps, sweeps, underflows)


def condition_on_current(sw: SmoothedWindow, tau: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Condition the smoothed joint Gaussian of (X_τ, X_k) on X_k.

    Returns:
        (gain, Σ_τ) with E[X_τ | X_k = x] = μ̃_τ + gain (x − μ_k) and
        cov(X_τ | X_k) = Σ_τ for every x
    """
    C = sw.cross_covs[tau]
    gain = spd_solve(sw.current.cov, C.T).T
    return gain, symmetrize(sw.covs[tau] - gain @ C.T)


def particle_conditioned_likelihoods(
        sw: SmoothedWindow,
        particles: np.ndarray,
        tau: int,
        measurements: Sequence[Tuple[SensorModel, np.ndarray]],
) -> np.ndarray:
    """
    Log-likelihood of OOSMs taken at τ given each current particle.

    The linearised joint Gaussian of (X_τ, X_k) is conditioned on
    X_k = ξ_i. The conditional mean is affine in the particle and the
    conditional covariance is shared, so one gain serves all particles.

    Args:
        sw: Smoothed window at the current step
        particles: (N, d) current particle locations
        tau: Origin step of the measurements
        measurements: (sensor, value) pairs taken at τ

    Returns:
        (N,) log-likelihoods

    Raises:
        NotPositiveDefiniteError: If R_k cannot be factored
    """
    gain, sigma = condition_on_current(sw, tau)
    means = sw.means[tau] + (np.atleast_2d(particles) - sw.current.mean) @ gain.T

    ids = [sensor.sensor_id for sensor, _ in measurements]
    H = sw.stacked_H(tau, ids)
    S = symmetrize(H @ sigma @ H.T + sw.stacked_noise(ids))
    innovation = np.hstack([
        sensor.residual(np.asarray(value, dtype=float), sensor.measure(means))
        for sensor, value in measurements
    ])
    density = sps.multivariate_normal(mean=np.zeros(S.shape[0]), cov=S)
    return np.atleast_1d(density.logpdf(innovation)).reshape(-1)


def process_sepf_eks(
        batch: OosmBatch,
        sw: SmoothedWindow,
        ps: ParticleSet,
        sensors: Dict[int, SensorModel],
        window: Optional[WindowStore] = None,
        strict: bool = False,
) -> SepfResult:
    """
    Reweight the current particles with every τ-group of the batch.

    Groups are processed in ascending τ. A group whose reweighting
    underflows is discarded (or raises when strict). Particle locations
    are never changed.

    Raises:
        DegenerateWeightsError: If strict and a group drives all weights to zero
    """
    incorporated: List[OosmRecord] = []
    sweeps = discarded = 0
    for tau, records in batch.groups().items():
        updated = reweight(ps, particle_conditioned_likelihoods(sw, ps.particles, tau, _pairs(records, sensors)))
        sweeps += 1
        if updated.underflow:
            if strict:
                raise DegenerateWeightsError(f"OOSMs from step {tau} left no particle with positive weight")
            discarded += 1
            logger.debug(f"Discarded degenerate reweighting for step {tau}")
            continue
        ps = updated
        incorporated.extend(records)

    if window is not None:
        window.add_records(incorporated)
        if incorporated:
            window.mark_stale(min(r.origin_time for r in incorporated))
        for record in batch:
            window.mark_arrived(record.sensor_id, record.origin_time)
    return SepfResult(ps, sweeps, incorporated, discarded)


def process_selective(
        batch: OosmBatch,
        window: WindowStore,
        ps: ParticleSet,
        sw: SmoothedWindow,
        gamma: float,
        utilities: Dict[Tuple[int, int], CandidateUtility],
        config: SelectionConfig,
        model: StateModel,
        sensors: Dict[int, SensorModel],
        n_particles: int,
        rng: np.random.Generator,
) -> SelectiveResult:
    """
    Admit τ-groups whose diminished utility reaches γ and reweight with them.

    A reweighting that leaves ESS below ν times its previous value aborts
    the loop; its changes are dropped and the whole batch is rerun with
    OOSM-GARP instead. With ν = 0 an underflowing group is discarded
    rather than escalated.

    Args:
        batch: OOSMs received at the current step
        window: Window store, updated in place
        ps: Current particle set
        sw: Smoothed window computed before this batch
        gamma: Admission threshold for this step
        utilities: Candidates by (τ, combination) for this step
        config: Selection parameters
        model: Dynamics
        sensors: Sensors by id
        n_particles: Particle count for a rerun
        rng: Random generator

    Returns:
        SelectiveResult with the new particle set and counters
    """
    sensor_ids = sorted(sensors)
    incorporated: List[OosmRecord] = []
    admitted_groups = admitted_oosms = sweeps = 0
    escalate = False

    for tau, records in batch.groups().items():
        combo = combo_mask([r.sensor_id for r in records], sensor_ids)
        candidate = utilities.get((tau, combo))
        if candidate is None:
            members = combo_members(combo, sensor_ids)
            candidate = CandidateUtility(tau, combo, combo_utility(sw, tau, members, config.cross_form), 0.0,
                                         config.cost_model.cost(len(members)))
        if candidate.diminished < gamma:
            continue

        admitted_groups += 1
        admitted_oosms += len(records)
        ess_prior = effective_sample_size(ps)
        updated = reweight(ps, particle_conditioned_likelihoods(sw, ps.particles, tau, _pairs(records, sensors)))
        sweeps += 1
        if updated.underflow:
            if config.nu > 0:
                escalate = True
                break
            logger.debug(f"Discarded degenerate reweighting for step {tau}")
            continue
        if effective_sample_size(updated) < config.nu * ess_prior:
            escalate = True
            break
        ps = updated
        incorporated.extend(records)

    if escalate:
        logger.debug(f"ESS collapse at step {window.current_step}; rerunning {len(batch)} OOSMs")
        rerun = process_garp(batch, window, model, sensors, n_particles, rng)
        return SelectiveResult(rerun.particles, admitted_groups, admitted_oosms, sweeps, True, rerun.sweeps)

    window.add_records(incorporated)
    for record in batch:
        window.mark_arrived(record.sensor_id, record.origin_time)
    if incorporated:
        window.mark_stale(min(r.origin_time for r in incorporated))
        window.update(window.current_step, save_gauss(ps), ps)
    return SelectiveResult(ps, admitted_groups, admitted_oosms, sweeps, False, 0)


class OosmParticleFilter(ABC):
    """
    Generic OOSM particle filter.

    Subclasses decide what happens to the OOSM batch of each step.
    """

    name = ""
    keep_particles = False

    def __init__(
            self,
            model: StateModel,
            sensors: Sequence[SensorModel],
            prior: GaussianSummary,
            n_particles: int,
            max_delay: int,
            rng: np.random.Generator,
            initial_step: int = 0,
    ):
        """
        Initialize the filter and store the initial summary.

        Args:
            model: Dynamics
            sensors: All sensors that may report
            prior: Initial state distribution
            n_particles: Particle count N
            max_delay: Maximum OOSM delay ℓ in steps
            rng: Random generator owned by this filter
            initial_step: Step index of the prior
        """
        if n_particles < 1:
            raise ConfigError(f"Particle count must be positive, got {n_particles}")
        self.model = model
        self.sensors = {s.sensor_id: s for s in sensors}
        self.n_particles = int(n_particles)
        self.rng = rng
        self.stats = FilterStats()
        self.logger = get_logger(__name__)

        self.ps = initialize(prior, self.n_particles, rng)
        self.window = WindowStore(max_delay, initial_step=initial_step, keep_particles=self.keep_particles)
        self.window.record(initial_step, save_gauss(self.ps), particles=self.ps)

    @property
    def estimate(self) -> GaussianSummary:
        """Filtering summary at the current step."""
        return self.window.summary(self.window.current_step)

    def step(self, k: int, undelayed: Sequence[Tuple[int, np.ndarray]],
             batch: Optional[OosmBatch] = None) -> GaussianSummary:
        """
        Generic OOSM filter step.

        Args:
            k: Step index, one past the previous step
            undelayed: (sensor_id, value) pairs taken and received at k
            batch: OOSMs received at k

        Returns:
            Filtering summary at k after OOSM processing
        """
        undelayed = sorted(((int(sid), np.atleast_1d(np.asarray(v, dtype=float))) for sid, v in undelayed),
                           key=lambda item: item[0])
        self.ps = sir_step(self.ps, [(self.sensors[sid], v) for sid, v in undelayed], self.model, self.rng)
        if self.ps.underflow:
            self.stats.degenerate_steps += 1
        self.window.record(k, save_gauss(self.ps), undelayed, particles=self.ps)

        if batch:
            self.stats.groups_arrived += len(batch.groups())
            self.stats.oosm_arrived += len(batch)
            self.process_oosm(batch)
        self.stats.steps += 1
        return self.estimate

    @abstractmethod
    def process_oosm(self, batch: OosmBatch):
        """Handle the OOSM batch received at the current step."""

    def run(self, steps: Iterable[Tuple[int, Sequence[Tuple[int, np.ndarray]], Optional[OosmBatch]]]) -> np.ndarray:
        """
        Run over (k, undelayed, batch) triples.

        Returns:
            (T, state_dim) filtering means, one row per step
        """
        return np.array([self.step(k, undelayed, batch).mean for k, undelayed, batch in steps])


class DiscardFilter(OosmParticleFilter):
    name = "PFmis"

    def process_oosm(self, batch: OosmBatch):
        for record in batch:
            self.window.mark_arrived(record.sensor_id, record.origin_time)


class AllMeasurementsFilter(DiscardFilter):
    """Same loop as PFmis; fed every measurement at its origin step."""

    name = "PFall"


class SepfEksFilter(OosmParticleFilter):
    name = "SEPF-EKS"

    def process_oosm(self, batch: OosmBatch):
        sw = rts_smooth(self.window, self.model, self.sensors)
        result = process_sepf_eks(batch, sw, self.ps, self.sensors, self.window)
        self.ps = result.particles
        self.stats.sepf_sweeps += result.sweeps
        self.stats.groups_admitted += result.sweeps - result.discarded
        self.stats.oosm_admitted += len(result.incorporated)
        self.stats.discarded_groups += result.discarded
        if result.incorporated:
            self.window.update(self.window.current_step, save_gauss(self.ps), self.ps)


class GarpFilter(OosmParticleFilter):
    name = "PF-GS"
    from_particles = False

    def process_oosm(self, batch: OosmBatch):
        rerun = process_garp(batch, self.window, self.model, self.sensors, self.n_particles, self.rng,
                             from_particles=self.from_particles)
        self.ps = rerun.particles
        self.stats.groups_admitted += len(batch.groups())
        self.stats.oosm_admitted += len(batch)
        self.stats.oosm_garp += len(batch)
        self.stats.garp_runs += 1
        self.stats.garp_sweeps += rerun.sweeps
        self.stats.degenerate_steps += rerun.underflows


class RerunFilter(GarpFilter):
    """Full-storage rerun from the particle sets kept in the window."""

    name = "PF-RR"
    keep_particles = True
    from_particles = True


class SelectiveFilter(OosmParticleFilter):
    name = "PF-SEL"

    def __init__(self, *args, selection: Optional[SelectionConfig] = None, **kwargs):
        super().__init__(*args, **kwargs)
        self.selection = selection or SelectionConfig(max_delay=self.window.max_delay)
        self.sensor_ids = sorted(self.sensors)
        self.gammas: List[float] = []

    def process_oosm(self, batch: OosmBatch):
        sw = rts_smooth(self.window, self.model, self.sensors)
        candidates = enumerate_candidates(sw, self.window, self.selection, self.sensor_ids)
        gamma, admitted = calc_gamma(candidates, self.selection.c_ave)
        self.gammas.append(gamma)
        self.logger.debug(
            f"Step {self.window.current_step}: γ={gamma:.6g}, {len(admitted)}/{len(candidates)} candidates admissible"
        )

        result = process_selective(
            batch, self.window, self.ps, sw, gamma,
            {(c.step, c.combo): c for c in candidates},
            self.selection, self.model, self.sensors, self.n_particles, self.rng,
        )
        self.ps = result.particles
        self.stats.groups_admitted += result.admitted_groups
        self.stats.oosm_admitted += result.admitted_oosms
        self.stats.sepf_sweeps += result.sweeps
        if result.escalated:
            self.stats.escalations += 1
            self.stats.garp_runs += 1
            self.stats.garp_sweeps += result.garp_sweeps
            self.stats.oosm_garp += len(batch)


FILTERS: Dict[str, Type[OosmParticleFilter]] = {
    cls.name: cls
    for cls in (AllMeasurementsFilter, DiscardFilter, SepfEksFilter, GarpFilter, SelectiveFilter, RerunFilter)
}


def build_filter(
        name: str,
        model: StateModel,
        sensors: Sequence[SensorModel],
        prior: GaussianSummary,
        n_particles: int,
        max_delay: int,
        rng: np.random.Generator,
        selection: Optional[SelectionConfig] = None,
) -> OosmParticleFilter:
    """
    Construct one of the benchmarked filters by name.

    Raises:
        ConfigError: If the name is unknown
    """
    try:
        cls = FILTERS[name]
    except KeyError:
        raise ConfigError(f"Unknown filter {name!r}; choose from {', '.join(FILTER_NAMES)}") from None
    if cls is SelectiveFilter:
        return cls(model, sensors, prior, n_particles, max_delay, rng, selection=selection)
    return cls(model, sensors, prior, n_particles, max_delay, rng)
