"""Data types describing wire layouts and guide centerlines (all SI)."""
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np


Point = Tuple[float, float, float]


class GeometryError(ValueError):
    """Invalid geometry parameters or an impossible layout."""
    pass


@dataclass(frozen=True)
class WireSegment:
    start: Point
    end: Point

    def __post_init__(self):
        if not (np.all(np.isfinite(self.start)) and np.all(np.isfinite(self.end))):
            raise GeometryError(f"Segment endpoints must be finite, got {self.start} -> {self.end}")
        if np.array_equal(np.asarray(self.start, dtype=float), np.asarray(self.end, dtype=float)):
            raise GeometryError(f"Zero-length segment at {self.start}")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.end, self.start)))


@dataclass
class WireCircuit:
    """One electrically continuous wire: an ordered polyline driven by one waveform."""
    name: str
    segments: List[WireSegment]
    cross_section: Tuple[float, float] = (45e-6, 5e-6)  # width, height
    waveform_ref: str = ""

    def __post_init__(self):
        if not self.waveform_ref:
            self.waveform_ref = self.name

    @classmethod
    def from_vertices(cls, name: str, vertices, cross_section=(45e-6, 5e-6), waveform_ref: str = ""):
        verts = np.asarray(vertices, dtype=float)
        segments = [
            WireSegment(tuple(map(float, verts[i])), tuple(map(float, verts[i + 1])))
            for i in range(len(verts) - 1)
        ]
        return cls(name=name, segments=segments, cross_section=tuple(cross_section), waveform_ref=waveform_ref)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """(starts, ends) as (n, 3) arrays."""
        starts = np.array([seg.start for seg in self.segments], dtype=float).reshape(-1, 3)
        ends = np.array([seg.end for seg in self.segments], dtype=float).reshape(-1, 3)
        return starts, ends

    def vertices(self) -> np.ndarray:
        starts, ends = self.arrays()
        if len(starts) == 0:
            return starts
        return np.vstack([starts, ends[-1:]])

    @property
    def length(self) -> float:
        return sum(seg.length for seg in self.segments)


@dataclass
class WireLayout:
    circuits: List[WireCircuit] = field(default_factory=list)

    def circuit(self, name: str) -> WireCircuit:
        for c in self.circuits:
            if c.name == name:
                return c
        raise KeyError(f"No circuit named '{name}' in layout")

    @property
    def names(self) -> List[str]:
        return [c.name for c in self.circuits]

    def segment_count(self) -> int:
        return sum(len(c.segments) for c in self.circuits)


@dataclass
class GuidePath:
    """Guide centerline with cumulative arclength.

    plane_normal is the chip-surface normal (the 'up' direction for heights);
    half_separation carries the wire half-distance d when the builder knows it.
    """
    points: np.ndarray
    arclength: np.ndarray
    plane_normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    plane_height: float = 0.0
    half_separation: Optional[float] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.arclength = np.asarray(self.arclength, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 3 or len(self.points) < 2:
            raise GeometryError(f"Guide path needs at least two 3D points, got shape {self.points.shape}")
        if self.arclength.shape != (len(self.points),):
            raise GeometryError("Guide path arclength must have one entry per point")
        if not np.all(np.isfinite(self.points)):
            raise GeometryError("Guide path points must be finite")
        if np.any(np.diff(self.arclength) <= 0):
            k = int(np.argmax(np.diff(self.arclength) <= 0))
            raise GeometryError(f"Guide path arclength must be strictly increasing (repeated point at index {k + 1})")

    @classmethod
    def from_points(cls, points, **kwargs) -> "GuidePath":
        pts = np.asarray(points, dtype=float)
        steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(steps)])
        return cls(points=pts, arclength=s, **kwargs)

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    def segment_index(self, s: float) -> int:
        idx = int(np.searchsorted(self.arclength, s, side="right")) - 1
        return min(max(idx, 0), len(self.points) - 2)

    def point_at(self, s: float) -> np.ndarray:
        i = self.segment_index(s)
        s0, s1 = self.arclength[i], self.arclength[i + 1]
        w = (s - s0) / (s1 - s0)
        return (1.0 - w) * self.points[i] + w * self.points[i + 1]

    def tangent_at(self, s: float) -> np.ndarray:
        i = self.segment_index(s)
        t = self.points[i + 1] - self.points[i]
        return t / np.linalg.norm(t)

    def frame_at(self, s: float):
        """(center, tangent, in-plane normal, up) at arclength s."""
        c = self.point_at(s)
        t = self.tangent_at(s)
        up = np.asarray(self.plane_normal, dtype=float)
        n = np.cross(up, t)
        n /= np.linalg.norm(n)
        e_up = np.cross(t, n)
        return c, t, n, e_up

    def segment_tangents(self) -> np.ndarray:
        d = np.diff(self.points, axis=0)
        return d / np.linalg.norm(d, axis=1)[:, None]
