"""Biot-Savart fields of polyline wire layouts plus a uniform (possibly rotating) bias.

Wires are line currents on their centerlines. For a straight segment a->b and
a field point p, with r1 = p-a, r2 = p-b and L = b-a,

    B = (mu0 I / 4 pi) * (R1 + R2) / (R1 R2 (R1 R2 + r1.r2)) * (L x r1)

which is exact for a finite filament. The Jacobian dB/dp is differentiated
analytically from the same expression and is traceless by construction.
"""
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .chipgeom import strip_filaments
from .constants import CODATA, PhysicalConstants
from .layout import WireLayout, WireSegment


# point-segment pairs evaluated per vectorized block
PAIR_BLOCK = 1 << 18


class WaveformError(ValueError):
    """Invalid current waveform or bias schedule."""
    pass


class ConductorGuardError(ValueError):
    """Evaluation point closer to a wire than the model's guard distance."""
    pass


@dataclass(frozen=True)
class CurrentWaveform:
    """Time dependence of one circuit's current.

    kind 'constant': I0. kind 'ramp': piecewise-linear through knots
    ((t0, I0), (t1, I1), ...), held constant outside the knot range.
    kind 'sinusoidal': I0 + Imod * sin(omega_mod * t + phase).
    """
    name: str
    kind: str = "constant"
    I0: float = 0.0
    Imod: float = 0.0
    omega_mod: float = 0.0
    phase: float = 0.0
    knots: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("constant", "ramp", "sinusoidal"):
            raise WaveformError(f"Waveform '{self.name}': unknown kind '{self.kind}'")
        if self.kind == "sinusoidal" and not self.omega_mod > 0:
            raise WaveformError(f"Waveform '{self.name}': sinusoidal requires omega_mod > 0")
        if self.kind == "ramp":
            if not self.knots:
                raise WaveformError(f"Waveform '{self.name}': ramp requires at least one knot")
            times = [t for t, _ in self.knots]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise WaveformError(f"Waveform '{self.name}': ramp knot times must be strictly increasing")
        values = [self.I0, self.Imod, self.omega_mod, self.phase] + [v for knot in self.knots for v in knot]
        if not all(math.isfinite(v) for v in values):
            raise WaveformError(f"Waveform '{self.name}': parameters must be finite")

    @classmethod
    def constant(cls, name: str, current: float) -> "CurrentWaveform":
        return cls(name=name, kind="constant", I0=current)

    @classmethod
    def ramp(cls, name: str, knots: Sequence[Tuple[float, float]]) -> "CurrentWaveform":
        return cls(name=name, kind="ramp", knots=tuple((float(t), float(i)) for t, i in knots))

    @classmethod
    def sinusoidal(cls, name: str, I0: float, Imod: float, omega_mod: float, phase: float = 0.0) -> "CurrentWaveform":
        return cls(name=name, kind="sinusoidal", I0=I0, Imod=Imod, omega_mod=omega_mod, phase=phase)

    @property
    def period(self) -> Optional[float]:
        if self.kind == "sinusoidal":
            return 2.0 * math.pi / self.omega_mod
        return None

    def current(self, t):
        if self.kind == "constant":
            return self.I0 + 0.0 * np.asarray(t, dtype=float)
        if self.kind == "sinusoidal":
            return self.I0 + self.Imod * np.sin(self.omega_mod * np.asarray(t, dtype=float) + self.phase)
        times = np.array([k[0] for k in self.knots])
        values = np.array([k[1] for k in self.knots])
        return np.interp(t, times, values)


def _unit(v, what):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not n > 0:
        raise WaveformError(f"Bias {what} direction must be nonzero")
    return v / n


@dataclass(frozen=True)
class BiasWaveform:
    """Uniform bias B(t) * (cos a(t) * horizontal + sin a(t) * vertical) + static_offset.

    Magnitude and rotation angle a are piecewise-linear in time; a = 0 is
    horizontal (in-plane, perpendicular to the guide), a = pi/2 vertical.
    """
    magnitude_knots: Tuple[Tuple[float, float], ...] = ((0.0, 0.0),)
    angle_knots: Tuple[Tuple[float, float], ...] = ((0.0, math.pi / 2),)
    horizontal: Tuple[float, float, float] = (0.0, 1.0, 0.0)
    vertical: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    static_offset: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for label, knots in (("magnitude", self.magnitude_knots), ("angle", self.angle_knots)):
            if not knots:
                raise WaveformError(f"Bias {label} schedule needs at least one knot")
            times = [t for t, _ in knots]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise WaveformError(f"Bias {label} knot times must be strictly increasing")
        if any(b < 0 for _, b in self.magnitude_knots):
            raise WaveformError("Bias magnitude must be non-negative")
        angles = np.array([a for _, a in self.angle_knots])
        steps = np.diff(angles)
        if not (np.all(steps >= 0) or np.all(steps <= 0)):
            raise WaveformError("Bias rotation angle must be monotone over the schedule")
        h = _unit(self.horizontal, "horizontal")
        v = _unit(self.vertical, "vertical")
        if abs(float(h @ v)) > 1e-9:
            raise WaveformError("Bias horizontal and vertical directions must be perpendicular")
        object.__setattr__(self, "horizontal", tuple(h))
        object.__setattr__(self, "vertical", tuple(v))

    @classmethod
    def vertical_bias(cls, magnitude: float, **kwargs) -> "BiasWaveform":
        return cls(magnitude_knots=((0.0, magnitude),), angle_knots=((0.0, math.pi / 2),), **kwargs)

    @classmethod
    def horizontal_bias(cls, magnitude: float, direction=(0.0, 1.0, 0.0), **kwargs) -> "BiasWaveform":
        return cls(magnitude_knots=((0.0, magnitude),), angle_knots=((0.0, 0.0),), horizontal=tuple(direction), **kwargs)

    @classmethod
    def uniform(cls, vector) -> "BiasWaveform":
        """Constant bias equal to the given vector."""
        vector = np.asarray(vector, dtype=float)
        return cls(static_offset=tuple(vector))

    @property
    def is_static(self) -> bool:
        return len(self.magnitude_knots) == 1 and len(self.angle_knots) == 1

    def magnitude(self, t) -> float:
        return float(np.interp(t, [k[0] for k in self.magnitude_knots], [k[1] for k in self.magnitude_knots]))

    def angle(self, t) -> float:
        return float(np.interp(t, [k[0] for k in self.angle_knots], [k[1] for k in self.angle_knots]))

    def direction(self, t) -> np.ndarray:
        a = self.angle(t)
        return math.cos(a) * np.asarray(self.horizontal) + math.sin(a) * np.asarray(self.vertical)

    def field(self, t) -> np.ndarray:
        return self.magnitude(t) * self.direction(t) + np.asarray(self.static_offset, dtype=float)


def _segment_kernel(points, a, b, weights, guard, jacobian):
    """Sum of segment fields (and Jacobians) at points.

    weights are mu0*I/(4 pi) per segment. Returns B (m,3), J (m,3,3) or None,
    and the mask of points inside the guard of any segment.
    """
    m, n = len(points), len(a)
    B = np.zeros((m, 3))
    J = np.zeros((m, 3, 3)) if jacobian else None
    inside = np.zeros(m, dtype=bool)
    if n == 0 or m == 0:
        return B, J, inside
    L = b - a
    L2 = np.einsum("ij,ij->i", L, L)
    L2safe = np.where(L2 > 0, L2, 1.0)
    rows = max(1, PAIR_BLOCK // n)
    for lo in range(0, m, rows):
        p = points[lo:lo + rows, None, :]
        r1 = p - a[None]
        r2 = p - b[None]
        R1 = np.linalg.norm(r1, axis=2)
        R2 = np.linalg.norm(r2, axis=2)

        u = np.clip(np.einsum("mnk,nk->mn", r1, L) / L2safe, 0.0, 1.0)
        dist = np.linalg.norm(r1 - u[..., None] * L[None], axis=2)
        near = dist < guard
        inside[lo:lo + rows] = near.any(axis=1)

        P = R1 * R2
        D = P + np.einsum("mnk,mnk->mn", r1, r2)
        S = R1 + R2
        ok = ~near & (D > 0) & (L2[None] > 0)
        Psafe = np.where(ok, P, 1.0)
        Dsafe = np.where(ok, D, 1.0)
        f = np.where(ok, S / (Psafe * Dsafe), 0.0)
        c = np.cross(L[None], r1)
        wf = weights[None, :] * f
        B[lo:lo + rows] = np.einsum("mn,mnk->mk", wf, c)

        if jacobian:
            n1 = r1 / np.where(ok, R1, 1.0)[..., None]
            n2 = r2 / np.where(ok, R2, 1.0)[..., None]
            gS = n1 + n2
            gP = R2[..., None] * n1 + R1[..., None] * n2
            gD = gP + r1 + r2
            Ssafe = np.where(ok, S, 1.0)
            grad_f = f[..., None] * (gS / Ssafe[..., None] - gP / Psafe[..., None] - gD / Dsafe[..., None])
            Jc = np.einsum("n,mni,mnj->mij", weights, c, grad_f)
            q = np.einsum("mn,nk->mk", wf, L)
            # d(L x r1)/dp = skew(L)
            Jc[:, 0, 1] -= q[:, 2]
            Jc[:, 0, 2] += q[:, 1]
            Jc[:, 1, 0] += q[:, 2]
            Jc[:, 1, 2] -= q[:, 0]
            Jc[:, 2, 0] -= q[:, 1]
            Jc[:, 2, 1] += q[:, 0]
            J[lo:lo + rows] = Jc
    return B, J, inside


def segment_field(segment: WireSegment, current: float, point, guard: float = 2e-6,
                  constants: PhysicalConstants = CODATA) -> np.ndarray:
    """Field (T) of one straight filament at one point."""
    a = np.asarray([segment.start], dtype=float)
    b = np.asarray([segment.end], dtype=float)
    w = np.array([constants.mu0 * current / (4.0 * math.pi)])
    B, _, inside = _segment_kernel(np.asarray([point], dtype=float), a, b, w, guard, False)
    if inside[0]:
        raise ConductorGuardError(f"Evaluation inside conductor at {tuple(point)} (guard {guard:g} m)")
    return B[0]


class FieldModel:
    """Wire layout + current waveforms + bias; immutable after construction.

    filaments > 1 replaces every wire by that many parallel sub-filaments
    spanning its width (flat-strip mode).
    """

    def __init__(self, layout: WireLayout, waveforms: Dict[str, CurrentWaveform],
                 bias: Optional[BiasWaveform] = None, min_distance_guard: float = 2e-6,
                 filaments: int = 1, constants: PhysicalConstants = CODATA):
        if not min_distance_guard > 0:
            raise WaveformError(f"min_distance_guard must be positive, got {min_distance_guard:g}")
        missing = [c.waveform_ref for c in layout.circuits if c.waveform_ref not in waveforms]
        if missing:
            raise WaveformError(f"Unresolved waveform reference(s): {', '.join(sorted(set(missing)))}")
        self.layout = layout
        self.waveforms = dict(waveforms)
        self.bias = bias if bias is not None else BiasWaveform()
        self.min_distance_guard = float(min_distance_guard)
        self.filaments = int(filaments)
        self.constants = constants

        starts, ends, owner, share = [], [], [], []
        for ci, circuit in enumerate(layout.circuits):
            strands = strip_filaments(circuit, self.filaments) if self.filaments > 1 else [circuit.vertices()]
            for verts in strands:
                if len(verts) < 2:
                    continue
                starts.append(verts[:-1])
                ends.append(verts[1:])
                owner.append(np.full(len(verts) - 1, ci))
                share.append(np.full(len(verts) - 1, 1.0 / len(strands)))
        self._a = np.vstack(starts) if starts else np.zeros((0, 3))
        self._b = np.vstack(ends) if ends else np.zeros((0, 3))
        self._owner = np.concatenate(owner) if owner else np.zeros(0, dtype=int)
        self._share = np.concatenate(share) if share else np.zeros(0)
        for arr in (self._a, self._b, self._owner, self._share):
            arr.setflags(write=False)

    def with_bias(self, bias: BiasWaveform) -> "FieldModel":
        return FieldModel(self.layout, self.waveforms, bias, self.min_distance_guard, self.filaments, self.constants)

    def with_waveforms(self, **waveforms: CurrentWaveform) -> "FieldModel":
        merged = dict(self.waveforms)
        merged.update(waveforms)
        return FieldModel(self.layout, merged, self.bias, self.min_distance_guard, self.filaments, self.constants)

    @property
    def is_static(self) -> bool:
        return self.bias.is_static and all(w.kind == "constant" for w in self.waveforms.values())

    @property
    def period(self) -> Optional[float]:
        """Common modulation period if every time dependence is sinusoidal with one frequency."""
        periods = {w.period for w in self.waveforms.values() if w.kind == "sinusoidal"}
        if len(periods) != 1 or not self.bias.is_static or any(w.kind == "ramp" for w in self.waveforms.values()):
            return None
        return periods.pop()

    def circuit_currents(self, t: float) -> np.ndarray:
        return np.array([float(self.waveforms[c.waveform_ref].current(t)) for c in self.layout.circuits])

    def _weights(self, t: float) -> np.ndarray:
        k = self.constants.mu0 / (4.0 * math.pi)
        return k * self.circuit_currents(t)[self._owner] * self._share

    def evaluate(self, points, t: float = 0.0, jacobian: bool = True):
        """Vectorized field at many points: (B (m,3), J (m,3,3) or None, inside-guard mask (m,))."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        B, J, inside = _segment_kernel(pts, self._a, self._b, self._weights(t),
                                       self.min_distance_guard, jacobian)
        B += self.bias.field(t)[None, :]
        return B, J, inside

    def unit_fields(self, points, jacobian: bool = False):
        """Per-circuit field for 1 A in each circuit, bias excluded.

        Returns (B (nc,m,3), J (nc,m,3,3) or None, inside mask (m,)); the total
        field is sum_c I_c(t) * B[c] + bias(t).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        k = self.constants.mu0 / (4.0 * math.pi)
        nc = len(self.layout.circuits)
        Bs = np.zeros((nc, len(pts), 3))
        Js = np.zeros((nc, len(pts), 3, 3)) if jacobian else None
        inside = np.zeros(len(pts), dtype=bool)
        for ci in range(nc):
            sel = self._owner == ci
            B, J, ins = _segment_kernel(pts, self._a[sel], self._b[sel], k * self._share[sel],
                                        self.min_distance_guard, jacobian)
            Bs[ci] = B
            if jacobian:
                Js[ci] = J
            inside |= ins
        return Bs, Js, inside

    def _guarded(self, point, t, jacobian):
        B, J, inside = self.evaluate([point], t, jacobian)
        if inside[0]:
            raise ConductorGuardError(
                f"Evaluation inside conductor at ({point[0]:.6g}, {point[1]:.6g}, {point[2]:.6g}) m "
                f"(guard {self.min_distance_guard:g} m)"
            )
        return B[0], (J[0] if jacobian else None)

    def field_at(self, point, t: float = 0.0) -> np.ndarray:
        return self._guarded(np.asarray(point, dtype=float), t, False)[0]

    def field_jacobian(self, point, t: float = 0.0) -> np.ndarray:
        """J[i, j] = dB_i / dx_j (T/m)."""
        return self._guarded(np.asarray(point, dtype=float), t, True)[1]

    def field_and_jacobian(self, point, t: float = 0.0):
        return self._guarded(np.asarray(point, dtype=float), t, True)


def field_at(model: FieldModel, point, t: float = 0.0) -> np.ndarray:
    return model.field_at(point, t)


def field_jacobian(model: FieldModel, point, t: float = 0.0) -> np.ndarray:
    return model.field_jacobian(point, t)


def grad_abs_field(B: np.ndarray, J: np.ndarray, floor: float = 1e-9) -> np.ndarray:
    """Gradient of |B|: (J^T B) / max(|B|, floor), row-wise."""
    norm = np.maximum(np.linalg.norm(B, axis=-1), floor)
    return np.einsum("...ji,...j->...i", J, B) / norm[..., None]


def field_map(model: FieldModel, points, times: Sequence[float] = (0.0,)) -> np.ndarray:
    """Rows x,y,z,t,Bx,By,Bz,Bnorm; field columns are nan inside the conductor guard."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    blocks = []
    for t in times:
        B, _, inside = model.evaluate(pts, t, jacobian=False)
        B[inside] = np.nan
        norm = np.linalg.norm(B, axis=1)
        blocks.append(np.column_stack([pts, np.full(len(pts), float(t)), B, norm]))
    return np.vstack(blocks) if blocks else np.zeros((0, 8))
