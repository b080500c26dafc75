"""Guide characterization: field zeros, transverse sections, bias scans.

Closed forms for the side guide and the infinite two-wire guide serve as
references and as seeds for the numeric searches.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from .constants import CODATA, AtomState, magnetic_moment, species
from .layout import GuidePath
from .magnetics import BiasWaveform, ConductorGuardError, CurrentWaveform, FieldModel


# below this |B| a section is treated as a pure quadrupole (no harmonic frequency)
QUADRUPOLE_FLOOR = 1e-7
ZERO_TOLERANCE = 1e-9


class GuideDoesNotFormError(ValueError):
    """Bias too strong (or non-positive) for a zero above the wire plane."""
    pass


class FieldZeroError(RuntimeError):
    """Zero search did not converge; carries the best point and its |B|."""

    def __init__(self, message, best_point=None, residual=None):
        super().__init__(message)
        self.best_point = best_point
        self.residual = residual


class SectionError(RuntimeError):
    """A guide section could not be characterized."""
    pass


def side_guide_analytic(current: float, bias: float, constants=CODATA) -> Tuple[float, float]:
    """Infinite single wire + perpendicular bias: (distance r0, gradient)."""
    if not (current > 0 and bias > 0):
        raise GuideDoesNotFormError(f"Side guide needs I > 0 and B > 0 (got I={current:g} A, B={bias:g} T)")
    r0 = constants.mu0 * current / (2.0 * math.pi * bias)
    gradient = 2.0 * math.pi * bias ** 2 / (constants.mu0 * current)
    return r0, gradient


def two_wire_threshold(current: float, d: float, constants=CODATA) -> float:
    """Largest bias for which the infinite pair still has a zero above the plane."""
    return constants.mu0 * current / (math.pi * d)


def two_wire_analytic(current: float, d: float, bias: float, constants=CODATA) -> Tuple[float, float]:
    """Infinite counter-propagating pair (half-separation d) + vertical bias: (height h, gradient)."""
    if not (current > 0 and d > 0):
        raise GuideDoesNotFormError(f"Two-wire guide needs I > 0 and d > 0 (got I={current:g} A, d={d:g} m)")
    threshold = two_wire_threshold(current, d, constants)
    if not bias > 0:
        raise GuideDoesNotFormError(f"guide does not form: bias must be positive, got {bias:g} T")
    if bias > threshold * (1.0 + 1e-12):
        raise GuideDoesNotFormError(
            f"guide does not form: bias {bias:g} T exceeds threshold {threshold:g} T "
            f"({threshold * 1e4:.4g} G) for I={current:g} A, d={d:g} m"
        )
    h2 = constants.mu0 * current * d / (math.pi * bias) - d * d
    h = math.sqrt(max(h2, 0.0))
    gradient = 2.0 * h * bias / (d * d + h * h)
    return h, gradient


def find_field_zero(model: FieldModel, seed, t: float = 0.0, tol: float = ZERO_TOLERANCE,
                    max_iter: int = 100) -> np.ndarray:
    """Point with |B| < tol near seed.

    Damped Gauss-Newton on B(p) = 0 using the analytic Jacobian (least-squares
    steps, since the Jacobian is singular along a straight guide); falls back
    to minimizing |B|^2.
    """
    p = np.asarray(seed, dtype=float).copy()
    try:
        B, J = model.field_and_jacobian(p, t)
    except ConductorGuardError as e:
        raise FieldZeroError(f"Zero search seed is inside a conductor: {e}", p, math.inf) from e
    best_p, best_r = p.copy(), float(np.linalg.norm(B))

    for _ in range(max_iter):
        if best_r < tol:
            return best_p
        step, *_ = np.linalg.lstsq(J, -B, rcond=1e-12)
        lam = 1.0
        improved = False
        for _ in range(40):
            trial = p + lam * step
            try:
                Bt, Jt = model.field_and_jacobian(trial, t)
            except ConductorGuardError:
                lam *= 0.5
                continue
            rt = float(np.linalg.norm(Bt))
            if rt < best_r:
                p, B, J = trial, Bt, Jt
                best_p, best_r = trial.copy(), rt
                improved = True
                break
            lam *= 0.5
        if not improved:
            break
    if best_r < tol:
        return best_p

    # |B|^2 minimization fallback, in micrometer units scaled by the starting residual
    scale_len = 1e-6
    scale_b = max(best_r, tol)
    origin = best_p.copy()

    def objective(x):
        q = origin + x * scale_len
        try:
            Bq, Jq = model.field_and_jacobian(q, t)
        except ConductorGuardError:
            return 1e30, np.zeros(3)
        val = float(Bq @ Bq) / scale_b ** 2
        grad = 2.0 * (Jq.T @ Bq) * scale_len / scale_b ** 2
        return val, grad

    res = minimize(objective, np.zeros(3), jac=True, method="BFGS",
                   options={"gtol": 1e-14, "maxiter": 10 * max_iter})
    q = origin + res.x * scale_len
    try:
        rq = float(np.linalg.norm(model.field_at(q, t)))
    except ConductorGuardError:
        rq = math.inf
    if rq < best_r:
        best_p, best_r = q, rq
    if best_r < tol:
        return best_p
    raise FieldZeroError(
        f"Field zero search did not converge in {max_iter} iterations: best |B|={best_r:.3e} T "
        f"at ({best_p[0]:.6g}, {best_p[1]:.6g}, {best_p[2]:.6g}) m",
        best_point=best_p, residual=best_r,
    )


@dataclass
class GuideSection:
    """Transverse characterization of a guide at one station."""
    s: float
    position: np.ndarray
    Bmin: float
    height: float
    gradient: float
    frequencies: Optional[Tuple[float, float]]
    depth: float
    depth_temperature: float
    tangent: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    axes: np.ndarray = field(default_factory=lambda: np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))
    curvature: np.ndarray = field(default_factory=lambda: np.zeros(2))
    moment: float = 0.0
    mass: float = 0.0
    warnings: List[str] = field(default_factory=list)

    @property
    def quadrupole(self) -> bool:
        return self.frequencies is None

    def local_potential(self, offsets: np.ndarray) -> np.ndarray:
        """Potential above the minimum for transverse offsets (k,2) along self.axes."""
        q = np.einsum("kj,j,kj->k", offsets, self.curvature, offsets)
        return self.moment * (np.sqrt(self.Bmin ** 2 + q) - self.Bmin)


def _normal_plane_minimum(model, center, e_n, e_up, seed_uv, t, max_iter=100):
    """Minimize |B| over the plane center + u*e_n + v*e_up, starting at seed_uv."""
    E = np.column_stack([e_n, e_up])
    uv = np.asarray(seed_uv, dtype=float).copy()
    B, J = model.field_and_jacobian(center + E @ uv, t)
    r = float(np.linalg.norm(B))
    converged = False
    for _ in range(max_iter):
        A = J @ E
        if r < 1e-13:
            converged = True
            break
        step, *_ = np.linalg.lstsq(A, -B, rcond=1e-12)
        if np.linalg.norm(step) < 1e-14:
            converged = True
            break
        lam = 1.0
        moved = False
        for _ in range(40):
            trial = uv + lam * step
            try:
                Bt, Jt = model.field_and_jacobian(center + E @ trial, t)
            except ConductorGuardError:
                lam *= 0.5
                continue
            rt = float(np.linalg.norm(Bt))
            if rt < r:
                uv, B, J, r = trial, Bt, Jt, rt
                moved = True
                break
            lam *= 0.5
        if not moved:
            # stationary point of |B|^2 in the plane
            converged = np.linalg.norm(A.T @ B) <= 1e-6 * np.linalg.norm(A) * r
            break

    if not converged:
        def objective(x):
            try:
                return float(np.linalg.norm(model.field_at(center + E @ (x * 1e-6), t)))
            except ConductorGuardError:
                return math.inf

        res = minimize(objective, uv / 1e-6, method="Nelder-Mead",
                       options={"xatol": 1e-7, "fatol": 1e-16, "maxiter": 4000})
        if res.fun <= r:
            uv = res.x * 1e-6
        B, J = model.field_and_jacobian(center + E @ uv, t)
    return uv, B, J


def _seed_height(model, center, e_up, t, guard):
    heights = np.geomspace(3.0 * guard, 5e-3, 240)
    pts = center[None, :] + heights[:, None] * e_up[None, :]
    B, _, inside = model.evaluate(pts, t, jacobian=False)
    norm = np.linalg.norm(B, axis=1)
    norm[inside] = np.inf
    return float(heights[int(np.argmin(norm))])


def _boundary_minimum(model, center, E, box, t, samples=121):
    """Lowest |B| on the rectangle box=(u0,u1,v0,v1) in the normal plane."""
    u0, u1, v0, v1 = box
    edges = [((u0, v0), (u1, v0)), ((u1, v0), (u1, v1)), ((u1, v1), (u0, v1)), ((u0, v1), (u0, v0))]
    w = np.linspace(0.0, 1.0, samples)
    best = math.inf
    for (a, b) in edges:
        a, b = np.asarray(a), np.asarray(b)
        uv = a[None, :] + w[:, None] * (b - a)[None, :]
        B, _, inside = model.evaluate(center[None, :] + uv @ E.T, t, jacobian=False)
        if inside.any():
            raise SectionError("Section box intersects the conductor guard")
        norm = np.linalg.norm(B, axis=1)
        k = int(np.argmin(norm))
        lo, hi = w[max(k - 1, 0)], w[min(k + 1, samples - 1)]

        def along(x, a=a, b=b):
            return float(np.linalg.norm(model.field_at(center + E @ (a + x * (b - a)), t)))

        res = minimize_scalar(along, bounds=(lo, hi), method="bounded", options={"xatol": 1e-9})
        best = min(best, float(norm[k]), float(res.fun))
    return best


def section_at(model: FieldModel, path: GuidePath, s: float, t: float = 0.0,
               state: Optional[AtomState] = None, box_factor: float = 3.0,
               seed_height: Optional[float] = None, constants=CODATA) -> GuideSection:
    """Minimum of |B| in the plane normal to the path at arclength s, with gradient, frequencies and depth.

    The depth box spans box_factor*h horizontally (centered on the minimum) and
    reaches from just above the conductors up to box_factor*h.
    """
    if not 0.0 <= s <= path.length:
        raise SectionError(f"Station s={s:g} m outside path [0, {path.length:g}] m")
    state = state if state is not None else species("Li7")
    mu = magnetic_moment(state, constants)
    center, tangent, e_n, e_up = path.frame_at(s)
    E = np.column_stack([e_n, e_up])
    guard = model.min_distance_guard
    if seed_height is None:
        seed_height = _seed_height(model, center, e_up, t, guard)
    try:
        uv, B, J = _normal_plane_minimum(model, center, e_n, e_up, (0.0, seed_height), t)
    except ConductorGuardError as e:
        raise SectionError(f"Section search at s={s:g} m hit a conductor: {e}") from e
    position = center + E @ uv
    Bmin = float(np.linalg.norm(B))
    up = np.asarray(path.plane_normal, dtype=float)
    height = float(position @ up - path.plane_height)
    if height <= 0:
        raise SectionError(f"No minimum above the wire plane at s={s:g} m (height {height:g} m)")
    warnings = []

    JE = J @ E
    block = E.T @ J @ E
    eig = np.linalg.eigvalsh(0.5 * (block + block.T))
    gradient = float(np.max(np.abs(eig)))
    M2 = JE.T @ JE
    lam, vecs = np.linalg.eigh(M2)
    lam = np.clip(lam, 0.0, None)
    axes = (E @ vecs).T
    if Bmin > QUADRUPOLE_FLOOR:
        frequencies = tuple(float(math.sqrt(mu * l / (state.mass * Bmin))) for l in lam)
    else:
        frequencies = None

    clearance = 2.0 * guard
    for c in model.layout.circuits:
        clearance = max(clearance, c.cross_section[1])
    v_lo = float(uv[1] - height + clearance)
    v_hi = float(uv[1] + (box_factor - 1.0) * height)
    half = 0.5 * box_factor * height
    if v_hi <= v_lo or uv[1] <= v_lo:
        raise SectionError(f"Guide at s={s:g} m is too close to the conductors for a depth box (h={height:g} m)")
    box = (float(uv[0] - half), float(uv[0] + half), v_lo, v_hi)
    Bbound = _boundary_minimum(model, center, E, box, t)
    depth = mu * max(Bbound - Bmin, 0.0)

    return GuideSection(
        s=float(s), position=position, Bmin=Bmin, height=height, gradient=gradient,
        frequencies=frequencies, depth=depth, depth_temperature=depth / constants.kB,
        tangent=tangent, axes=axes, curvature=lam, moment=mu, mass=state.mass, warnings=warnings,
    )


@dataclass
class ScanRow:
    bias: float
    current: float
    section: Optional[GuideSection] = None
    error: Optional[str] = None


@dataclass
class ScanTable:
    rows: List[ScanRow] = field(default_factory=list)

    @property
    def errors(self) -> List[str]:
        return [f"B={r.bias * 1e4:g} G: {r.error}" for r in self.rows if r.error]

    def check_monotonic(self) -> List[str]:
        """Violations of h decreasing / gradient increasing with B at fixed I."""
        violations = []
        for current in sorted({r.current for r in self.rows}):
            ok = sorted((r for r in self.rows if r.current == current and r.section is not None),
                        key=lambda r: r.bias)
            for prev, cur in zip(ok, ok[1:]):
                if not cur.section.height < prev.section.height:
                    violations.append(
                        f"height not decreasing between B={prev.bias * 1e4:g} G and B={cur.bias * 1e4:g} G at I={current:g} A"
                    )
                if not cur.section.gradient > prev.section.gradient:
                    violations.append(
                        f"gradient not increasing between B={prev.bias * 1e4:g} G and B={cur.bias * 1e4:g} G at I={current:g} A"
                    )
        return violations

    def to_rows(self) -> List[Tuple[float, ...]]:
        """B_gauss, I_amp, height_um, gradient_G_per_cm, depth_uK, Bmin_gauss (nan for failed rows)."""
        out = []
        for r in self.rows:
            sec = r.section
            if sec is None:
                out.append((r.bias * 1e4, r.current) + (math.nan,) * 4)
            else:
                out.append((r.bias * 1e4, r.current, sec.height * 1e6, sec.gradient * 1e2,
                            sec.depth_temperature * 1e6, sec.Bmin * 1e4))
        return out


def with_bias_magnitude(model: FieldModel, bias: float) -> FieldModel:
    """Same bias direction schedule and offset, constant magnitude."""
    return model.with_bias(replace(model.bias, magnitude_knots=((0.0, float(bias)),)))


def with_current(model: FieldModel, current: float) -> FieldModel:
    waves = {name: CurrentWaveform.constant(name, current) for name in model.waveforms}
    return model.with_waveforms(**waves)


def guide_scan(model: FieldModel, path: GuidePath, biases: Sequence[float], s: Optional[float] = None,
               current: Optional[float] = None, t: float = 0.0, state: Optional[AtomState] = None,
               threads: int = 1, constants=CODATA) -> ScanTable:
    """Characterize one station for each bias magnitude; failures become row errors."""
    if len(biases) == 0:
        raise ValueError("guide_scan needs at least one bias value")
    station = 0.5 * path.length if s is None else s
    if current is not None:
        model = with_current(model, current)
    row_current = float(model.circuit_currents(t)[0]) if model.layout.circuits else 0.0

    def run(bias):
        row = ScanRow(bias=float(bias), current=row_current)
        seed = None
        try:
            if path.half_separation:
                seed, _ = two_wire_analytic(abs(row_current), path.half_separation, bias, constants)
                if seed <= 0:
                    raise GuideDoesNotFormError("guide does not form: bias at threshold, zero lies on the wire plane")
            row.section = section_at(with_bias_magnitude(model, bias), path, station, t, state,
                                     seed_height=seed, constants=constants)
        except (GuideDoesNotFormError, FieldZeroError, SectionError, ConductorGuardError) as e:
            row.error = str(e)
        return row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, biases))
    else:
        rows = [run(b) for b in biases]
    return ScanTable(rows=rows)


def potential_along_path(model: FieldModel, path: GuidePath, stations: Sequence[float], height: float,
                         t: float = 0.0, state: Optional[AtomState] = None, constants=CODATA) -> np.ndarray:
    """mu_eff*|B| at the given height above the centerline for each station (nan inside the guard)."""
    state = state if state is not None else species("Li7")
    mu = magnetic_moment(state, constants)
    pts = []
    for s in stations:
        c, _, _, e_up = path.frame_at(float(s))
        pts.append(c + height * e_up)
    B, _, inside = model.evaluate(np.array(pts), t, jacobian=False)
    U = mu * np.linalg.norm(B, axis=1)
    U[inside] = np.nan
    return U


def utrap_bias_for_depth(model: FieldModel, path: GuidePath, depth: float, s: Optional[float] = None,
                         bias_range: Tuple[float, float] = (1e-5, 1e-2), state: Optional[AtomState] = None,
                         samples: int = 24, constants=CODATA) -> float:
    """Bias magnitude whose section at s has the requested depth (J)."""
    station = 0.5 * path.length if s is None else s

    def depth_at(bias):
        return section_at(with_bias_magnitude(model, bias), path, station, state=state, constants=constants).depth

    grid = np.geomspace(bias_range[0], bias_range[1], samples)
    values = []
    for b in grid:
        try:
            values.append(depth_at(b) - depth)
        except (FieldZeroError, SectionError, ConductorGuardError):
            values.append(math.nan)
    for k in range(len(grid) - 1):
        lo, hi = values[k], values[k + 1]
        if math.isfinite(lo) and math.isfinite(hi) and lo * hi <= 0:
            if lo == 0:
                return float(grid[k])
            return float(brentq(lambda b: depth_at(b) - depth, grid[k], grid[k + 1], xtol=1e-12, rtol=1e-10))
    raise SectionError(
        f"No bias in [{bias_range[0]:g}, {bias_range[1]:g}] T gives depth {depth / constants.kB * 1e6:.4g} uK"
    )
