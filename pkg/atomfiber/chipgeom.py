"""Wire layout construction: spiral and straight two-wire guides, side wires, U-traps.

Wires lie in a plane z = const; the plane normal +z is the 'up' direction the
atoms sit in. All lengths are meters.
"""
import math
import os
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from . import parser
from .layout import GeometryError, GuidePath, WireCircuit, WireLayout, WireSegment


class GeometryFileError(ValueError):
    """Geometry file could not be read (syntax or I/O)."""
    pass


DEFAULT_CROSS_SECTION = (45e-6, 5e-6)
U_WIRE_CROSS_SECTION = (200e-6, 5e-6)


@dataclass(frozen=True)
class SpiralSpec:
    inner: float
    outer: float
    length: float
    d: float
    z: float = 0.0
    points_per_turn: int = 512
    pad_distance: float = 5e-3
    pad_spread: float = 2e-3
    cross_section: Tuple[float, float] = DEFAULT_CROSS_SECTION
    name: str = "spiral"

    def validate(self):
        if not 0 < self.inner < self.outer:
            raise GeometryError(
                f"Spiral radii must satisfy 0 < inner < outer (inner={self.inner:g} m, outer={self.outer:g} m)"
            )
        if not 0 < self.d < self.inner:
            raise GeometryError(f"Half-separation d={self.d:g} m must be positive and below inner radius {self.inner:g} m")
        if self.points_per_turn < 32:
            raise GeometryError(f"points_per_turn must be >= 32, got {self.points_per_turn}")
        if self.length <= self.outer - self.inner:
            raise GeometryError(
                f"Path length {self.length:g} m is too short to wind from {self.inner:g} m to {self.outer:g} m"
            )
        if self.pad_distance < 0 or self.pad_spread < 0:
            raise GeometryError("Pad distance and spread must be non-negative")


def spiral_arclength(a: float, b: float, theta: float) -> float:
    """Arclength of r = a + b*t over t in [0, theta]."""
    value, _ = quad(lambda t: math.hypot(a + b * t, b), 0.0, theta, limit=200)
    return value


def solve_spiral_winding(spec: SpiralSpec) -> Tuple[float, float]:
    """Winding angle Theta and pitch b so that r runs inner -> outer over the requested length."""
    a, R, L = spec.inner, spec.outer, spec.length

    def mismatch(theta):
        return spiral_arclength(a, (R - a) / theta, theta) - L

    hi = 2.0 * L / a + 10.0
    theta = brentq(mismatch, 1e-9, hi, xtol=1e-14, rtol=1e-13, maxiter=200)
    return theta, (R - a) / theta


def _spiral_angles(spec: SpiralSpec, theta_max: float, b: float) -> np.ndarray:
    """Sample angles from theta_max (outer end) down to 0 (inner end).

    Near the inner turns the step is reduced so wire segments stay below d/2.
    """
    base_step = 2.0 * math.pi / spec.points_per_turn
    fine_radius = 2.0 * spec.inner
    angles = [theta_max]
    theta = theta_max
    while theta > 0.0:
        r = spec.inner + b * theta
        step = base_step
        if r < fine_radius:
            # offset arms reach r + d
            step = min(step, 0.5 * spec.d / math.hypot(r + spec.d, b))
        theta = theta - step
        if theta < 0.25 * step:
            # no sliver segment at the inner end
            theta = 0.0
        angles.append(theta)
    return np.array(angles)


def _spiral_frame(a: float, b: float, theta: np.ndarray, z: float):
    r = a + b * theta
    c = np.stack([r * np.cos(theta), r * np.sin(theta), np.full_like(theta, z)], axis=1)
    # dc/dtheta; the guide runs toward decreasing theta
    dc = np.stack([b * np.cos(theta) - r * np.sin(theta), b * np.sin(theta) + r * np.cos(theta), np.zeros_like(theta)], axis=1)
    t = -dc / np.linalg.norm(dc, axis=1)[:, None]
    n = np.cross(np.array([0.0, 0.0, 1.0]), t)
    return c, t, n


def build_spiral_pair(spec: SpiralSpec) -> Tuple[WireCircuit, GuidePath]:
    """Spiral two-wire guide whose arms are joined at the inner end.

    The single circuit runs pad -> outer end of the +d arm -> inner end ->
    connecting arc -> -d arm back out -> pad, so one current gives
    counter-propagating flow. The guide path starts at the outer end (s=0) and
    ends at the inner end.
    """
    spec.validate()
    theta_max, b = solve_spiral_winding(spec)
    turn_spacing = 2.0 * math.pi * b
    if turn_spacing <= 2.0 * spec.d:
        raise GeometryError(
            f"Offset arms self-intersect: turn spacing {turn_spacing:g} m <= 2d = {2 * spec.d:g} m"
        )

    angles = _spiral_angles(spec, theta_max, b)
    center, tangent, normal = _spiral_frame(spec.inner, b, angles, spec.z)
    arm_plus = center + spec.d * normal
    arm_minus = center - spec.d * normal

    # semicircle of radius d around the inner end, bulging past the end of the path
    c0, t0, n0 = center[-1], tangent[-1], normal[-1]
    phi = np.linspace(0.0, math.pi, 17)[1:-1]
    arc = c0 + spec.d * (np.cos(phi)[:, None] * n0 + np.sin(phi)[:, None] * t0)

    cO, tO, nO = center[0], tangent[0], normal[0]
    pad_plus = cO - spec.pad_distance * tO + 0.5 * spec.pad_spread * nO
    pad_minus = cO - spec.pad_distance * tO - 0.5 * spec.pad_spread * nO

    pieces = [arm_plus, arc, arm_minus[::-1]]
    if spec.pad_distance > 0:
        pieces = [pad_plus[None, :]] + pieces + [pad_minus[None, :]]
    vertices = np.vstack(pieces)
    circuit = WireCircuit.from_vertices(spec.name, vertices, cross_section=spec.cross_section)
    path = GuidePath.from_points(center, plane_height=spec.z, half_separation=spec.d)
    return circuit, path


def build_straight_pair(length: float, d: float, z: float = 0.0, name: str = "pair",
                        cross_section=DEFAULT_CROSS_SECTION) -> Tuple[WireCircuit, GuidePath]:
    """Two parallel arms along x at y = +d / -d, joined at x = +length/2.

    The +d arm carries current along +x, so with the bias along +z the field
    zero sits above the wire plane.
    """
    if not length > 0:
        raise GeometryError(f"Pair length must be positive, got {length:g} m")
    if not d > 0:
        raise GeometryError(f"Half-separation d must be positive, got {d:g} m")
    h = 0.5 * length
    vertices = [(-h, d, z), (h, d, z), (h, -d, z), (-h, -d, z)]
    circuit = WireCircuit.from_vertices(name, vertices, cross_section=cross_section)
    path = GuidePath.from_points([(-h, 0.0, z), (h, 0.0, z)], plane_height=z, half_separation=d)
    return circuit, path


def build_separated_pair(length: float, d: float, z: float = 0.0,
                         cross_section=DEFAULT_CROSS_SECTION) -> Tuple[List[WireCircuit], GuidePath]:
    """Two independent straight wires (for modulated currents): wire_a at +d along +x, wire_b at -d along -x."""
    if not length > 0 or not d > 0:
        raise GeometryError(f"Separated pair needs length > 0 and d > 0 (got {length:g}, {d:g})")
    h = 0.5 * length
    wire_a = WireCircuit.from_vertices("wire_a", [(-h, d, z), (h, d, z)], cross_section=cross_section)
    wire_b = WireCircuit.from_vertices("wire_b", [(h, -d, z), (-h, -d, z)], cross_section=cross_section)
    path = GuidePath.from_points([(-h, 0.0, z), (h, 0.0, z)], plane_height=z, half_separation=d)
    return [wire_a, wire_b], path


def build_side_wire(length: float, z: float = 0.0, y: float = 0.0, name: str = "single",
                    cross_section=DEFAULT_CROSS_SECTION) -> Tuple[WireCircuit, GuidePath]:
    """Single straight wire along +x; a horizontal bias along +y makes a side guide above it."""
    if not length > 0:
        raise GeometryError(f"Wire length must be positive, got {length:g} m")
    h = 0.5 * length
    circuit = WireCircuit.from_vertices(name, [(-h, y, z), (h, y, z)], cross_section=cross_section)
    path = GuidePath.from_points([(-h, y, z), (h, y, z)], plane_height=z)
    return circuit, path


def build_loading_layout(length: float, d: float, z: float = 0.0,
                         single_offset: float = 0.0) -> Tuple[WireLayout, GuidePath]:
    """Side-guide wire ('single') plus the counter-propagating pair ('pair') for the loading sequence."""
    single, _ = build_side_wire(length, z=z, y=single_offset, name="single")
    pair, path = build_straight_pair(length, d, z=z, name="pair")
    return WireLayout([single, pair]), path


def build_u_pair(length: float, d: float, lead_length: float, z: float = 0.0,
                 cross_section=U_WIRE_CROSS_SECTION) -> Tuple[WireLayout, GuidePath]:
    """Two U-shaped wires with counter-propagating base currents.

    The U of wire 'u_a' opens toward +y, the U of 'u_b' toward -y; the lead
    currents close the trap along the guide direction.
    """
    if not length > 0 or not d > 0 or not lead_length > 0:
        raise GeometryError("U-pair needs positive length, d and lead_length")
    h = 0.5 * length
    far = d + lead_length
    u_a = WireCircuit.from_vertices("u_a", [(-h, far, z), (-h, d, z), (h, d, z), (h, far, z)],
                                    cross_section=cross_section)
    u_b = WireCircuit.from_vertices("u_b", [(h, -far, z), (h, -d, z), (-h, -d, z), (-h, -far, z)],
                                    cross_section=cross_section)
    path = GuidePath.from_points([(-h, 0.0, z), (h, 0.0, z)], plane_height=z, half_separation=d)
    return WireLayout([u_a, u_b]), path


def strip_filaments(circuit: WireCircuit, n: int = 9) -> List[np.ndarray]:
    """Split a flat wire into n parallel filaments spanning its width.

    Returns one vertex array per filament; each carries 1/n of the current.
    Offsets are taken along the in-plane vertex normal (bisector of the
    adjacent segment normals).
    """
    if n < 1:
        raise GeometryError(f"Filament count must be >= 1, got {n}")
    verts = circuit.vertices()
    if n == 1 or len(verts) < 2:
        return [verts]
    width = circuit.cross_section[0]
    up = np.array([0.0, 0.0, 1.0])
    seg = np.diff(verts, axis=0)
    seg_n = np.cross(up, seg)
    norms = np.linalg.norm(seg_n, axis=1)
    # segments along z have no in-plane normal; fall back to x
    seg_n[norms == 0] = np.array([1.0, 0.0, 0.0])
    norms[norms == 0] = 1.0
    seg_n /= norms[:, None]
    vert_n = np.empty_like(verts)
    vert_n[0] = seg_n[0]
    vert_n[-1] = seg_n[-1]
    bis = seg_n[:-1] + seg_n[1:]
    bis_len = np.linalg.norm(bis, axis=1)
    bis_len[bis_len == 0] = 1.0
    vert_n[1:-1] = bis / bis_len[:, None]
    # keep the strip width constant across corners
    cos_half = np.einsum("ij,ij->i", vert_n[1:-1], seg_n[1:])
    scale = np.ones(len(verts))
    scale[1:-1] = 1.0 / np.clip(cos_half, 0.2, None)
    offsets = (np.arange(n) + 0.5) / n - 0.5
    return [verts + (w * width * scale)[:, None] * vert_n for w in offsets]


def layout_to_text(layout: WireLayout) -> str:
    lines = ["# atomfiber geometry: circuit_name x1 y1 z1 x2 y2 z2 (meters)"]
    for c in layout.circuits:
        lines.append(f"!circuit {c.name} {c.cross_section[0]!r} {c.cross_section[1]!r} {c.waveform_ref}")
    for c in layout.circuits:
        for seg in c.segments:
            coords = " ".join(repr(float(v)) for v in (*seg.start, *seg.end))
            lines.append(f"{c.name} {coords}")
    return "\n".join(lines) + "\n"


def layout_from_text(text: str) -> WireLayout:
    try:
        rows, declared = parser.parse_geometry_text(text)
    except SyntaxError as e:
        raise GeometryFileError(str(e)) from e
    order: List[str] = list(declared)
    segments = {name: [] for name in order}
    for name, start, end in rows:
        if name not in segments:
            segments[name] = []
            order.append(name)
        try:
            segments[name].append(WireSegment(start, end))
        except GeometryError as e:
            raise GeometryFileError(f"circuit '{name}': {e}") from e
    circuits = []
    for name in order:
        width, height, waveform = declared.get(name, (DEFAULT_CROSS_SECTION[0], DEFAULT_CROSS_SECTION[1], name))
        circuits.append(WireCircuit(name=name, segments=segments[name], cross_section=(width, height),
                                    waveform_ref=waveform))
    return WireLayout(circuits)


def write_geometry(layout: WireLayout, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(layout_to_text(layout))


def read_geometry(path: str) -> WireLayout:
    if not os.path.exists(path):
        raise GeometryFileError(f"Geometry file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except IOError as e:
        raise GeometryFileError(f"Failed to read geometry file {path}: {e}") from e
    return layout_from_text(text)
