"""Time-orbiting-potential two-wire guide.

Both wires of a separated pair carry I0 + Imod*sin(omega_mod*t + phase) with a
relative phase delta_phi; the field zero then circles the static zero and
atoms see the period-averaged potential.
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from .chipgeom import build_separated_pair
from .constants import CODATA, AtomState, magnetic_moment, species
from .guideprops import GuideDoesNotFormError, find_field_zero, two_wire_analytic
from .layout import WireLayout
from .magnetics import BiasWaveform, ConductorGuardError, CurrentWaveform, FieldModel


class StaticQuadrupoleLimit(ValueError):
    """Imod = 0: no orbiting zero, the trap frequency is undefined.

    params carries what is still defined (r0 = 0, omega_larmor = 0).
    """

    def __init__(self, message, params=None):
        super().__init__(message)
        self.params = params


class QuadratureError(RuntimeError):
    """Period average did not converge under sample doubling."""
    pass


@dataclass(frozen=True)
class TopConfig:
    d: float
    I0: float
    Imod: float
    B: float
    omega_mod: float = 2.0 * math.pi * 50e3
    delta_phi: float = math.pi / 2
    state: AtomState = field(default_factory=lambda: species("Rb87"))

    def __post_init__(self):
        if not (self.d > 0 and self.B > 0):
            raise ValueError(f"TOP config needs d > 0 and B > 0 (got d={self.d:g} m, B={self.B:g} T)")
        if not (self.I0 > self.Imod >= 0):
            raise ValueError(f"TOP config needs I0 > Imod >= 0 (got I0={self.I0:g} A, Imod={self.Imod:g} A)")
        if not self.omega_mod >= 0:
            raise ValueError(f"omega_mod must be non-negative, got {self.omega_mod:g}")


@dataclass
class TopParams:
    omega_larmor: float
    omega_trap: Optional[float]
    r0: float
    h: float
    valid: bool = True
    warnings: List[str] = field(default_factory=list)


def top_closed_form(cfg: TopConfig, constants=CODATA) -> TopParams:
    """Larmor frequency at the averaged minimum, trap frequency and circle-of-death radius.

    The expressions hold for h = d; outside that regime a warning is attached
    and valid is False.
    """
    st = cfg.state
    gm = st.gF * st.mF
    magnetic_moment(st, constants)
    warnings = []
    try:
        h, _ = two_wire_analytic(cfg.I0, cfg.d, cfg.B, constants)
    except GuideDoesNotFormError as e:
        h = math.nan
        warnings.append(str(e))
    valid = math.isfinite(h) and abs(h - cfg.d) / cfg.d <= 0.05
    if math.isfinite(h) and not valid:
        warnings.append(
            f"guide height {h * 1e6:.4g} um differs from d={cfg.d * 1e6:.4g} um by more than 5%; "
            f"closed forms are approximate"
        )

    r0 = cfg.d * cfg.Imod / (math.sqrt(2.0) * cfg.I0)
    omega_larmor = st.gF * constants.muB * cfg.B * cfg.Imod / (math.sqrt(2.0) * constants.hbar * cfg.I0)
    if cfg.Imod == 0:
        params = TopParams(omega_larmor=omega_larmor, omega_trap=None, r0=r0, h=h, valid=valid, warnings=warnings)
        raise StaticQuadrupoleLimit("static quadrupole limit: Imod = 0, trap frequency undefined", params)
    inner = gm * constants.muB / (math.sqrt(2.0) * st.mass) * cfg.B ** 3 / (cfg.I0 * cfg.Imod)
    omega_trap = 2.0 * math.pi / constants.mu0 * math.sqrt(inner)
    return TopParams(omega_larmor=omega_larmor, omega_trap=omega_trap, r0=r0, h=h, valid=valid, warnings=warnings)


def top_model(cfg: TopConfig, length: float = 10e-3, z: float = 0.0, min_distance_guard: float = 2e-6):
    """Separated pair with the two phase-shifted modulated currents and a vertical bias."""
    if not cfg.omega_mod > 0:
        raise ValueError("top_model needs omega_mod > 0")
    wires, path = build_separated_pair(length, cfg.d, z)
    waveforms = {
        "wire_a": CurrentWaveform.sinusoidal("wire_a", cfg.I0, cfg.Imod, cfg.omega_mod, 0.0),
        "wire_b": CurrentWaveform.sinusoidal("wire_b", cfg.I0, cfg.Imod, cfg.omega_mod, cfg.delta_phi),
    }
    model = FieldModel(WireLayout(wires), waveforms, BiasWaveform.vertical_bias(cfg.B),
                       min_distance_guard=min_distance_guard)
    return model, path


class AveragedField:
    """Period average of |B| and of grad|B| for a periodically modulated model.

    Field is linear in the circuit currents, so unit-current fields are
    evaluated once per point and recombined for every sample time.
    """

    def __init__(self, model: FieldModel, samples: int = 64, floor: float = 1e-9):
        period = model.period
        if period is None:
            raise ValueError("Averaged potential needs a model with a single sinusoidal modulation period")
        self.model = model
        self.period = period
        self.samples = samples
        self.floor = floor

    def _currents_and_bias(self, times):
        currents = np.array([[float(self.model.waveforms[c.waveform_ref].current(t)) for c in self.model.layout.circuits]
                             for t in times])
        bias = np.array([self.model.bias.field(t) for t in times])
        return currents, bias

    def abs_field_samples(self, points, times) -> np.ndarray:
        """|B| for each (time, point): shape (k, m)."""
        Bc, _, inside = self.model.unit_fields(points)
        if inside.any():
            raise ConductorGuardError("Averaged potential evaluated inside conductor guard")
        currents, bias = self._currents_and_bias(times)
        B = np.einsum("kc,cmi->kmi", currents, Bc) + bias[:, None, :]
        return np.linalg.norm(B, axis=2)

    def fixed_mean_abs_field(self, points, samples: int) -> np.ndarray:
        """Rectangle rule with a fixed sample count (smooth in position, for stencils and minimization)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        times = np.arange(samples) * self.period / samples
        return self.abs_field_samples(pts, times).mean(axis=0)

    def mean_abs_field(self, points, tol: float = 1e-6, max_samples: int = 8192) -> np.ndarray:
        """Rectangle rule over one period, doubling the sample count until converged."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.samples
        times = np.arange(n) * self.period / n
        total = self.abs_field_samples(pts, times).sum(axis=0)
        mean = total / n
        while True:
            if 2 * n > max_samples:
                raise QuadratureError(
                    f"Period average not converged to {tol:g} relative with {n} samples"
                )
            mid = (np.arange(n) + 0.5) * self.period / n
            total = total + self.abs_field_samples(pts, mid).sum(axis=0)
            n *= 2
            refined = total / n
            change = np.abs(refined - mean)
            scale = np.abs(refined)
            mean = refined
            if np.all(change <= tol * scale):
                return mean

    def evaluate(self, points):
        """Fixed-order average: (<|B|> (m,), <grad|B|> (m,3), inside mask (m,))."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        Bc, Jc, inside = self.model.unit_fields(pts, jacobian=True)
        n = self.samples
        times = np.arange(n) * self.period / n
        currents, bias = self._currents_and_bias(times)
        B = np.einsum("kc,cmi->kmi", currents, Bc) + bias[:, None, :]
        J = np.einsum("kc,cmij->kmij", currents, Jc)
        norm = np.linalg.norm(B, axis=2)
        grad = np.einsum("kmji,kmj->kmi", J, B) / np.maximum(norm, self.floor)[..., None]
        return norm.mean(axis=0), grad.mean(axis=0), inside


def averaged_potential(model: FieldModel, point, state: Optional[AtomState] = None, samples: int = 64,
                       tol: float = 1e-6, max_samples: int = 8192, constants=CODATA):
    """mu_eff * period average of |B| at point (or at each row of an (m,3) array)."""
    state = state if state is not None else species("Rb87")
    mu = magnetic_moment(state, constants)
    avg = AveragedField(model, samples)
    pts = np.asarray(point, dtype=float)
    values = mu * avg.mean_abs_field(np.atleast_2d(pts), tol=tol, max_samples=max_samples)
    if pts.ndim == 1:
        return float(values[0])
    return values


def averaged_minimum(model: FieldModel, seed, state: Optional[AtomState] = None, axes=None,
                     samples: int = 256, constants=CODATA) -> np.ndarray:
    """Minimum of the averaged potential in the plane through seed spanned by axes."""
    axes = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]) if axes is None else np.asarray(axes, dtype=float)
    seed = np.asarray(seed, dtype=float)
    avg = AveragedField(model, samples)
    scale_len = 1e-6
    ref = max(float(avg.fixed_mean_abs_field(seed[None, :], samples)[0]), 1e-12)

    def objective(x):
        try:
            return float(avg.fixed_mean_abs_field((seed + (x * scale_len) @ axes)[None, :], samples)[0]) / ref
        except ConductorGuardError:
            return math.inf

    res = minimize(objective, np.zeros(len(axes)), method="Nelder-Mead",
                   options={"xatol": 1e-6, "fatol": 1e-15, "maxiter": 4000})
    return seed + (res.x * scale_len) @ axes


def averaged_curvature(model: FieldModel, point, step: float, state: Optional[AtomState] = None, axes=None,
                       samples: int = 256, constants=CODATA) -> Tuple[np.ndarray, np.ndarray]:
    """Second derivatives of <U> along each axis (5-point stencil) and the matching omegas."""
    state = state if state is not None else species("Rb87")
    mu = magnetic_moment(state, constants)
    axes = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]) if axes is None else np.asarray(axes, dtype=float)
    point = np.asarray(point, dtype=float)
    avg = AveragedField(model, samples)
    offsets = np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) * step
    weights = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * step * step)
    curv = []
    for axis in axes:
        pts = point[None, :] + offsets[:, None] * axis[None, :]
        U = mu * avg.fixed_mean_abs_field(pts, samples)
        curv.append(float(weights @ U))
    curv = np.array(curv)
    omegas = np.sqrt(np.clip(curv, 0.0, None) / state.mass)
    return curv, omegas


@dataclass
class ZeroOrbit:
    points: np.ndarray
    center: np.ndarray
    mean_radius: float
    eccentricity: float


def zero_orbit(model: FieldModel, seed, samples: int = 64, axes=None) -> ZeroOrbit:
    """Trace the instantaneous field zero over one modulation period."""
    period = model.period
    if period is None:
        raise ValueError("zero_orbit needs a periodically modulated model")
    axes = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]) if axes is None else np.asarray(axes, dtype=float)
    p = np.asarray(seed, dtype=float)
    pts = []
    for k in range(samples):
        p = find_field_zero(model, p, t=k * period / samples)
        pts.append(p)
    pts = np.array(pts)
    center = pts.mean(axis=0)
    rel = (pts - center) @ axes.T
    radii = np.linalg.norm(rel, axis=1)
    lam = np.sort(np.linalg.eigvalsh(np.cov(rel.T, bias=True)))[::-1]
    ecc = math.sqrt(max(0.0, 1.0 - lam[-1] / lam[0])) if lam[0] > 0 else 0.0
    return ZeroOrbit(points=pts, center=center, mean_radius=float(radii.mean()), eccentricity=ecc)


@dataclass
class AdiabaticityReport:
    larmor_ratio: float
    trap_ratio: float
    passed: bool
    messages: List[str] = field(default_factory=list)


def adiabaticity_check(cfg: TopConfig, params: TopParams, max_larmor_ratio: float = 0.1,
                       max_trap_ratio: float = 0.1) -> AdiabaticityReport:
    """omega_mod must be slow against Larmor precession and fast against the trap oscillation."""
    messages = []
    r1 = cfg.omega_mod / params.omega_larmor if params.omega_larmor > 0 else math.inf
    if params.omega_trap is None:
        r2 = 0.0
    else:
        r2 = params.omega_trap / cfg.omega_mod if cfg.omega_mod > 0 else math.inf
    # ratios built from rounded frequencies land on the limit up to float rounding
    ok1 = r1 <= max_larmor_ratio * (1.0 + 1e-9)
    ok2 = r2 <= max_trap_ratio * (1.0 + 1e-9)
    if not ok1:
        messages.append(f"omega_mod/omega_Lar = {r1:.4g} exceeds {max_larmor_ratio:g}")
    if not ok2:
        messages.append(f"omega_trap/omega_mod = {r2:.4g} exceeds {max_trap_ratio:g}")
    return AdiabaticityReport(larmor_ratio=r1, trap_ratio=r2, passed=ok1 and ok2, messages=messages)
