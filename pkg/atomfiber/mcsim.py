"""Monte-Carlo classical trajectories of weak-field seekers in wire-guide potentials.

Particles are independent: they are integrated in fixed-size chunks with
velocity Verlet, each particle drawing from its own counter-based random
stream, so results do not depend on how chunks are spread over threads.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .constants import CODATA, AtomState, magnetic_moment
from .guideprops import GuideSection, section_at
from .layout import GuidePath
from .magnetics import BiasWaveform, CurrentWaveform, FieldModel, WaveformError, grad_abs_field


ALIVE = "alive"
BACKGROUND = "background"
OVER_BARRIER = "over-barrier"
MAJORANA = "majorana"
OUT_OF_DOMAIN = "out-of-domain"
LOSS_CAUSES = (BACKGROUND, OVER_BARRIER, MAJORANA, OUT_OF_DOMAIN)

# force regularization for the quadrupole cusp
FORCE_FLOOR = 1e-9
# stream ids inside each particle's seed sequence
SAMPLING_STREAM = 0
LOSS_STREAM = 1


class EnsembleError(RuntimeError):
    """Initial ensemble could not be drawn."""
    pass


class ScenarioError(ValueError):
    """Inconsistent simulation scenario."""
    pass


def particle_rng(seed: int, pid: int, stream: int = SAMPLING_STREAM) -> np.random.Generator:
    """Independent counter-based generator for one particle and purpose."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(pid), int(stream)])))


@dataclass
class Particle:
    id: int
    position: np.ndarray
    velocity: np.ndarray
    status: str = ALIVE

    @property
    def alive(self) -> bool:
        return self.status == ALIVE


@dataclass(frozen=True)
class EnsembleSpec:
    count: int
    T_transverse: float
    T_longitudinal: float
    center: Optional[Tuple[float, float, float]] = None
    axis: Optional[Tuple[float, float, float]] = None
    longitudinal_sigma: float = 0.5e-3
    seed: int = 0
    energy_cutoff: float = 12.0
    max_candidates: int = 100000

    def __post_init__(self):
        if self.count < 1:
            raise EnsembleError(f"Ensemble count must be >= 1, got {self.count}")
        if not (self.T_transverse > 0 and self.T_longitudinal > 0):
            raise EnsembleError("Ensemble temperatures must be positive")
        if self.longitudinal_sigma < 0:
            raise EnsembleError("longitudinal_sigma must be non-negative")


@dataclass
class Ensemble:
    positions: np.ndarray
    velocities: np.ndarray
    ids: np.ndarray = None
    acceptance: float = 1.0

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        self.velocities = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        if self.ids is None:
            self.ids = np.arange(len(self.positions))
        if self.positions.shape != self.velocities.shape:
            raise EnsembleError("positions and velocities must have the same shape")

    def __len__(self):
        return len(self.positions)


def sample_ensemble(spec: EnsembleSpec, section: GuideSection, state: AtomState,
                    constants=CODATA, path: Optional[GuidePath] = None) -> Ensemble:
    """Maxwell-Boltzmann velocities per axis and Boltzmann-distributed transverse positions.

    Transverse positions come from rejection sampling on the section's local
    potential (harmonic or quadrupole); the longitudinal offset is Gaussian
    with spec.longitudinal_sigma. With a path (and no explicit center/axis),
    each atom is placed in the guide frame at its own arclength, so clouds
    on curved guides follow the centerline.
    """
    mu = magnetic_moment(state, constants)
    lam = np.asarray(section.curvature, dtype=float)
    if np.any(lam <= 0):
        raise EnsembleError(f"Section at s={section.s:g} m is not confining (curvature {lam})")
    kT = constants.kB * spec.T_transverse
    reach = spec.energy_cutoff * kT / mu + section.Bmin
    half_width = np.sqrt(reach ** 2 - section.Bmin ** 2) / np.sqrt(lam)
    sig_t = math.sqrt(constants.kB * spec.T_transverse / state.mass)
    sig_l = math.sqrt(constants.kB * spec.T_longitudinal / state.mass)
    axes = np.asarray(section.axes, dtype=float)
    tangent = np.asarray(spec.axis if spec.axis is not None else section.tangent, dtype=float)
    tangent = tangent / np.linalg.norm(tangent)
    center = np.asarray(spec.center if spec.center is not None else section.position, dtype=float)

    follow = path is not None and spec.center is None and spec.axis is None
    if follow:
        # minimum and principal axes in (in-plane normal, up) coordinates of the station frame
        c0, _, n0, up0 = path.frame_at(section.s)
        rel = section.position - c0
        min_uv = np.array([rel @ n0, rel @ up0])
        axes_uv = np.array([[a @ n0, a @ up0] for a in axes])

    positions = np.empty((spec.count, 3))
    velocities = np.empty((spec.count, 3))
    batch = 64
    drawn = 0
    for pid in range(spec.count):
        rng = particle_rng(spec.seed, pid, SAMPLING_STREAM)
        g = rng.standard_normal(3)
        tries = 0
        while True:
            cand = rng.uniform(-1.0, 1.0, size=(batch, 2)) * half_width
            keep = rng.random(batch) < np.exp(-section.local_potential(cand) / kT)
            hits = np.nonzero(keep)[0]
            if len(hits):
                tries += int(hits[0]) + 1
                offset = cand[hits[0]]
                break
            tries += batch
            if tries > spec.max_candidates:
                raise EnsembleError(
                    f"potential/temperature mismatch: no sample accepted for particle {pid} "
                    f"after {tries} candidates"
                )
        drawn += tries
        along = rng.standard_normal() * spec.longitudinal_sigma
        if follow:
            c, t, n, up = path.frame_at(section.s + along)
            local_axes = axes_uv @ np.vstack([n, up])
            uv = min_uv + offset @ axes_uv
            positions[pid] = c + uv[0] * n + uv[1] * up
            velocities[pid] = sig_t * (g[0] * local_axes[0] + g[1] * local_axes[1]) + sig_l * g[2] * t
        else:
            positions[pid] = center + offset[0] * axes[0] + offset[1] * axes[1] + along * tangent
            velocities[pid] = sig_t * (g[0] * axes[0] + g[1] * axes[1]) + sig_l * g[2] * tangent
    acceptance = spec.count / drawn
    if acceptance < 1e-3:
        raise EnsembleError(f"potential/temperature mismatch: rejection efficiency {acceptance:.2e} < 1e-3")
    return Ensemble(positions=positions, velocities=velocities, acceptance=acceptance)


@dataclass(frozen=True)
class LossConfig:
    """Loss channels. inf disables tau_background and majorana_threshold."""
    tau_background: float = math.inf
    majorana_threshold: float = 1.0
    Bfloor: float = 1e-7
    domain_box: Optional[Tuple[Tuple[float, float, float], Tuple[float, float, float]]] = None
    domain_margin: float = 1e-3
    velocity_cap: float = math.inf
    surface_clearance: Optional[float] = None

    def __post_init__(self):
        if not self.tau_background > 0:
            raise ScenarioError(f"tau_background must be positive, got {self.tau_background:g}")
        if not (0 < self.majorana_threshold <= 1 or math.isinf(self.majorana_threshold)):
            raise ScenarioError(f"Majorana threshold must lie in (0, 1] or be inf, got {self.majorana_threshold:g}")
        if self.Bfloor < 0:
            raise ScenarioError("Bfloor must be non-negative")
        if not self.velocity_cap > 0:
            raise ScenarioError("velocity_cap must be positive")

    @property
    def majorana_enabled(self) -> bool:
        return self.Bfloor > 0 or math.isfinite(self.majorana_threshold)


@dataclass(frozen=True)
class DtPolicy:
    """dt = eta / omega_max unless dt is fixed; modulated fields also cap dt at period/steps_per_period."""
    eta: float = 0.05
    dt: Optional[float] = None
    steps_per_period: int = 32

    def __post_init__(self):
        if not self.eta > 0 or (self.dt is not None and not self.dt > 0):
            raise ScenarioError("dt policy must be positive")

    def resolve(self, omega_max: float, period: Optional[float] = None) -> float:
        if self.dt is not None:
            dt = self.dt
        else:
            if not omega_max > 0:
                raise ScenarioError("Cannot derive a time step: characteristic frequency is zero")
            dt = self.eta / omega_max
        if period is not None:
            dt = min(dt, period / self.steps_per_period)
        return dt


def characteristic_omega(section: GuideSection, state: AtomState, T_transverse: float, constants=CODATA) -> float:
    """Largest transverse frequency, or the quadrupole equivalent mu*g/sqrt(M kB T)."""
    if section.frequencies is not None:
        return max(section.frequencies)
    mu = magnetic_moment(state, constants)
    width = constants.kB * T_transverse / (mu * section.gradient)
    return math.sqrt(mu * section.gradient / (state.mass * width))


class ForceField:
    """|B|, grad|B| and (when defined) the field vector for a potential mode."""

    def __init__(self, model: FieldModel, mode: str = "instantaneous", samples: int = 64):
        if mode not in ("instantaneous", "averaged"):
            raise ScenarioError(f"Unknown potential mode '{mode}'")
        self.model = model
        self.mode = mode
        self._averaged = None
        if mode == "averaged":
            from .topdynamics import AveragedField
            self._averaged = AveragedField(model, samples, floor=FORCE_FLOOR)

    @property
    def time_dependent(self) -> bool:
        return self.mode == "instantaneous" and not self.model.is_static

    def terms(self, points, t: float):
        if self._averaged is not None:
            babs, grad, inside = self._averaged.evaluate(points)
            return babs, grad, None, inside
        B, J, inside = self.model.evaluate(points, t, jacobian=True)
        return np.linalg.norm(B, axis=1), grad_abs_field(B, J, FORCE_FLOOR), B, inside


def _gravity_vector(gravity: bool, plane_normal, constants=CODATA) -> np.ndarray:
    if not gravity:
        return np.zeros(3)
    n = np.asarray(plane_normal, dtype=float)
    return -constants.g * n / np.linalg.norm(n)


def ensemble_energy(force: ForceField, state: AtomState, positions, velocities, t: float = 0.0,
                    gravity: bool = False, plane_normal=(0.0, 0.0, 1.0), constants=CODATA) -> np.ndarray:
    """Kinetic + magnetic (+ gravitational) energy per particle (J)."""
    x = np.atleast_2d(np.asarray(positions, dtype=float))
    v = np.atleast_2d(np.asarray(velocities, dtype=float))
    mu = magnetic_moment(state, constants)
    babs, _, _, _ = force.terms(x, t)
    gvec = _gravity_vector(gravity, plane_normal, constants)
    return 0.5 * state.mass * np.einsum("ij,ij->i", v, v) + mu * babs - state.mass * (x @ gvec)


def verlet_steps(force: ForceField, state: AtomState, positions, velocities, t0: float, dt: float,
                 steps: int, gravity: bool = False, plane_normal=(0.0, 0.0, 1.0), constants=CODATA):
    """Plain velocity Verlet without losses; negative dt integrates backwards."""
    x = np.array(positions, dtype=float, ndmin=2)
    v = np.array(velocities, dtype=float, ndmin=2)
    mu = magnetic_moment(state, constants)
    gvec = _gravity_vector(gravity, plane_normal, constants)
    _, grad, _, _ = force.terms(x, t0)
    a = -mu * grad / state.mass + gvec
    t = t0
    for _ in range(steps):
        v = v + 0.5 * dt * a
        x = x + dt * v
        t = t + dt
        _, grad, _, _ = force.terms(x, t)
        a = -mu * grad / state.mass + gvec
        v = v + 0.5 * dt * a
    return x, v


@dataclass
class Scenario:
    model: FieldModel
    state: AtomState
    ensemble: EnsembleSpec
    total_time: float
    snapshot_times: Sequence[float] = (0.0,)
    path: Optional[GuidePath] = None
    station: Optional[float] = None
    section: Optional[GuideSection] = None
    initial: Optional[Ensemble] = None
    dt_policy: DtPolicy = field(default_factory=DtPolicy)
    losses: LossConfig = field(default_factory=LossConfig)
    potential_mode: str = "instantaneous"
    averaging_samples: int = 64
    omega_max: Optional[float] = None
    gravity: bool = False
    duration_warning: Optional[float] = None
    threads: int = 1
    chunk_size: int = 256

    def validate(self):
        problems = []
        if not self.total_time > 0:
            problems.append(f"total_time must be positive, got {self.total_time:g}")
        for ts in self.snapshot_times:
            if not 0.0 <= ts <= self.total_time:
                problems.append(f"snapshot time {ts:g} s outside [0, {self.total_time:g}] s")
        if self.chunk_size < 1:
            problems.append("chunk_size must be >= 1")
        if self.threads < 1:
            problems.append("threads must be >= 1")
        if self.section is None and self.path is None and self.omega_max is None:
            problems.append("scenario needs a guide section, a guide path or an explicit omega_max")
        if self.initial is None and self.section is None and self.path is None:
            problems.append("scenario needs an initial ensemble, a guide section or a guide path")
        if problems:
            raise ScenarioError("Validation failed:\n" + "\n".join(problems))


@dataclass
class Snapshot:
    t: float
    ids: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    status: np.ndarray

    @property
    def alive_mask(self) -> np.ndarray:
        return self.status == ALIVE

    def particles(self) -> List[Particle]:
        return [Particle(int(i), x.copy(), v.copy(), str(st))
                for i, x, v, st in zip(self.ids, self.positions, self.velocities, self.status)]


@dataclass
class LossEvent:
    id: int
    t: float
    cause: str


@dataclass
class SimulationResult:
    snapshots: List[Snapshot]
    losses: List[LossEvent]
    dt: float
    steps: int
    count: int
    warnings: List[str] = field(default_factory=list)

    def counts_series(self, times: Optional[Sequence[float]] = None) -> Tuple[np.ndarray, np.ndarray]:
        """(t, alive) at every step, or at the given times."""
        if times is None:
            times = np.arange(self.steps + 1) * self.dt
        times = np.asarray(times, dtype=float)
        loss_times = np.sort(np.array([e.t for e in self.losses], dtype=float))
        # a loss at t counts from t onward
        lost = np.searchsorted(loss_times, times * (1.0 + 1e-12), side="right")
        return times, self.count - lost

    def lost_by_cause(self) -> Dict[str, int]:
        counts = {cause: 0 for cause in LOSS_CAUSES}
        for e in self.losses:
            counts[e.cause] += 1
        return counts


def apply_losses(status: np.ndarray, t_now: float, babs_old, babs_new, bvec_old, bvec_new, dt: float,
                 cfg: LossConfig, death_time, moment: float, constants=CODATA) -> np.ndarray:
    """Assign loss causes to the still-alive entries of status (modified in place and returned).

    Majorana: |B| below Bfloor, or the field direction turning faster than
    threshold * Larmor frequency. Background: the particle's exponential clock
    ran out during the step.
    """
    alive = status == ALIVE
    if cfg.majorana_enabled:
        hit = alive & ((babs_new < cfg.Bfloor) | (babs_old < cfg.Bfloor))
        if bvec_old is not None and math.isfinite(cfg.majorana_threshold):
            n_old = bvec_old / np.maximum(babs_old, 1e-300)[:, None]
            n_new = bvec_new / np.maximum(babs_new, 1e-300)[:, None]
            cosang = np.clip(np.einsum("ij,ij->i", n_old, n_new), -1.0, 1.0)
            rate = np.arccos(cosang) / dt
            larmor = moment * np.minimum(babs_old, babs_new) / constants.hbar
            hit |= alive & (rate > cfg.majorana_threshold * larmor)
        status[hit] = MAJORANA
        alive = status == ALIVE
    if death_time is not None:
        status[alive & (death_time <= t_now)] = BACKGROUND
    return status


class _ChunkRunner:
    """Integrates one chunk of particles through the whole schedule."""

    def __init__(self, scenario: Scenario, force: ForceField, dt: float, steps: int,
                 snapshot_steps: Dict[int, List[int]], box, clearance: float, constants=CODATA):
        self.sc = scenario
        self.force = force
        self.dt = dt
        self.steps = steps
        self.snapshot_steps = snapshot_steps
        self.box = box
        self.clearance = clearance
        self.constants = constants
        self.mu = magnetic_moment(scenario.state, constants)
        normal = scenario.path.plane_normal if scenario.path is not None else (0.0, 0.0, 1.0)
        self.normal = np.asarray(normal, dtype=float)
        self.plane = scenario.path.plane_height if scenario.path is not None else 0.0
        self.gvec = _gravity_vector(scenario.gravity, self.normal, constants)

    def run(self, ids, x, v):
        sc, dt, cfg = self.sc, self.dt, self.sc.losses
        n = len(ids)
        status = np.full(n, ALIVE, dtype=object)
        loss_t = np.full(n, math.nan)
        death = None
        if math.isfinite(cfg.tau_background):
            death = np.array([particle_rng(sc.ensemble.seed, pid, LOSS_STREAM).exponential(cfg.tau_background)
                              for pid in ids])
        x = x.copy()
        v = v.copy()
        snaps = {}

        babs, grad, bvec, inside = self.force.terms(x, 0.0)
        a = -self.mu * grad / sc.state.mass + self.gvec
        self._geometry_losses(status, loss_t, x, inside, 0.0)
        self._record(snaps, 0, x, v, status)

        for k in range(1, self.steps + 1):
            t_new = k * dt
            idx = np.nonzero(status == ALIVE)[0]
            if len(idx):
                xa, va, aa = x[idx], v[idx], a[idx]
                vh = va + 0.5 * dt * aa
                xn = xa + dt * vh
                b2, g2, bv2, ins2 = self.force.terms(xn, t_new)
                an = -self.mu * g2 / sc.state.mass + self.gvec
                vn = vh + 0.5 * dt * an

                sub = status[idx].copy()
                sub_t = loss_t[idx].copy()
                jump = np.linalg.norm(vn - va, axis=1)
                bad = ~np.all(np.isfinite(xn), axis=1) | ~np.all(np.isfinite(vn), axis=1) | (jump > cfg.velocity_cap)
                sub[bad] = OUT_OF_DOMAIN
                self._geometry_losses(sub, sub_t, xn, ins2, t_new)
                apply_losses(sub, t_new, babs[idx], b2, None if bvec is None else bvec[idx], bv2, dt, cfg,
                             None if death is None else death[idx], self.mu, self.constants)
                newly = (sub != ALIVE) & (status[idx] == ALIVE)
                sub_t[newly & np.isnan(sub_t)] = t_new

                # lost particles keep their last valid phase-space point
                keep = ~bad
                x[idx[keep]] = xn[keep]
                v[idx[keep]] = vn[keep]
                a[idx] = np.where(keep[:, None], an, aa)
                babs[idx] = np.where(keep, b2, babs[idx])
                if bvec is not None:
                    bvec[idx] = np.where(keep[:, None], bv2, bvec[idx])
                status[idx] = sub
                loss_t[idx] = sub_t
            if k in self.snapshot_steps:
                self._record(snaps, k, x, v, status)
        return ids, snaps, status, loss_t

    def _geometry_losses(self, status, loss_t, x, inside, t):
        alive = status == ALIVE
        height = x @ self.normal - self.plane
        out = inside | (height < self.clearance)
        lo, hi = self.box
        out |= np.any(x < lo, axis=1) | np.any(x > hi, axis=1)
        hit = alive & out
        status[hit] = OVER_BARRIER
        loss_t[hit] = t

    @staticmethod
    def _record(snaps, k, x, v, status):
        snaps[k] = (x.copy(), v.copy(), status.copy())


def _domain_box(scenario: Scenario, ensemble: Ensemble):
    cfg = scenario.losses
    if cfg.domain_box is not None:
        return np.asarray(cfg.domain_box[0], dtype=float), np.asarray(cfg.domain_box[1], dtype=float)
    pts = scenario.path.points if scenario.path is not None else ensemble.positions
    pts = np.vstack([pts, ensemble.positions])
    return pts.min(axis=0) - cfg.domain_margin, pts.max(axis=0) + cfg.domain_margin


def integrate(scenario: Scenario, constants=CODATA) -> SimulationResult:
    """Propagate the ensemble; snapshots at the requested times and a merged loss log."""
    scenario.validate()
    warnings = []
    if scenario.duration_warning is not None and scenario.total_time > scenario.duration_warning:
        warnings.append(
            f"scenario duration {scenario.total_time * 1e3:.4g} ms exceeds the "
            f"{scenario.duration_warning * 1e3:.4g} ms wire heating limit"
        )
    section = scenario.section
    if section is None and scenario.path is not None and (scenario.initial is None or scenario.omega_max is None):
        s = 0.5 * scenario.path.length if scenario.station is None else scenario.station
        section = section_at(scenario.model, scenario.path, s, 0.0, scenario.state, constants=constants)
    ensemble = scenario.initial
    if ensemble is None:
        ensemble = sample_ensemble(scenario.ensemble, section, scenario.state, constants, path=scenario.path)
        if ensemble.acceptance < 1e-2:
            warnings.append(f"low rejection-sampling efficiency {ensemble.acceptance:.2e}")

    omega = scenario.omega_max
    if omega is None:
        omega = characteristic_omega(section, scenario.state, scenario.ensemble.T_transverse, constants)
    period = scenario.model.period if scenario.potential_mode == "instantaneous" else None
    dt0 = scenario.dt_policy.resolve(omega, period)
    steps = max(1, int(math.ceil(scenario.total_time / dt0 - 1e-9)))
    dt = scenario.total_time / steps

    snapshot_steps: Dict[int, List[int]] = {}
    for j, ts in enumerate(scenario.snapshot_times):
        snapshot_steps.setdefault(int(round(ts / dt)), []).append(j)

    force = ForceField(scenario.model, scenario.potential_mode, scenario.averaging_samples)
    clearance = scenario.losses.surface_clearance
    if clearance is None:
        clearance = max([c.cross_section[1] for c in scenario.model.layout.circuits] + [0.0])
    runner = _ChunkRunner(scenario, force, dt, steps, snapshot_steps, _domain_box(scenario, ensemble),
                          clearance, constants)

    n = len(ensemble)
    chunks = [(lo, min(lo + scenario.chunk_size, n)) for lo in range(0, n, scenario.chunk_size)]

    def work(bounds):
        lo, hi = bounds
        return runner.run(ensemble.ids[lo:hi], ensemble.positions[lo:hi], ensemble.velocities[lo:hi])

    if scenario.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=scenario.threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]

    snapshots = []
    for k in sorted(snapshot_steps):
        xs = np.vstack([p[1][k][0] for p in parts])
        vs = np.vstack([p[1][k][1] for p in parts])
        st = np.concatenate([p[1][k][2] for p in parts])
        for _ in snapshot_steps[k]:
            snapshots.append(Snapshot(t=k * dt, ids=ensemble.ids.copy(), positions=xs, velocities=vs, status=st))

    events = []
    for ids, _, status, loss_t in parts:
        for pid, st, tl in zip(ids, status, loss_t):
            if st != ALIVE:
                events.append(LossEvent(int(pid), float(tl), st))
    events.sort(key=lambda e: e.id)
    return SimulationResult(snapshots=snapshots, losses=events, dt=dt, steps=steps, count=n, warnings=warnings)


def loading_schedule(t_ramp1: float, t_ramp2: float, single_current: float, pair_current: float,
                     bias: float, horizontal=(0.0, 1.0, 0.0), vertical=(0.0, 0.0, 1.0),
                     static_offset=(0.0, 0.0, 0.0), single: str = "single", pair: str = "pair"):
    """Currents and bias for the side-guide -> two-wire-guide transfer.

    [0, t1]: single-wire current ramps to zero, pair current ramps up, bias
    rotates from horizontal to 45 degrees. [t1, t1+t2]: bias rotation
    completes to vertical. The bias magnitude stays constant.
    """
    if not (t_ramp1 > 0 and t_ramp2 > 0):
        raise WaveformError(f"Ramp times must be positive (got {t_ramp1:g}, {t_ramp2:g} s)")
    waveforms = {
        single: CurrentWaveform.ramp(single, [(0.0, single_current), (t_ramp1, 0.0)]),
        pair: CurrentWaveform.ramp(pair, [(0.0, 0.0), (t_ramp1, pair_current)]),
    }
    schedule = BiasWaveform(
        magnitude_knots=((0.0, bias),),
        angle_knots=((0.0, 0.0), (t_ramp1, math.pi / 4), (t_ramp1 + t_ramp2, math.pi / 2)),
        horizontal=tuple(horizontal), vertical=tuple(vertical), static_offset=tuple(static_offset),
    )
    return waveforms, schedule
