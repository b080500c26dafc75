"""Structural checks on wire layouts."""
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .layout import WireLayout


# vertices closer than this count as shared
CONNECT_TOLERANCE = 1e-12


class ValidationError(Exception):
    """Exception raised when a layout is used despite failed validation."""
    pass


@dataclass
class LayoutReport:
    findings: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.findings

    def raise_if_failed(self):
        if self.findings:
            raise ValidationError("Validation failed:\n" + "\n".join(self.findings))


def _orientation(ax, ay, bx, by, cx, cy):
    return np.sign((bx - ax) * (cy - ay) - (by - ay) * (cx - ax))


class LayoutValidator:
    """Checks a WireLayout for gaps, degenerate segments and crossings."""

    def __init__(self, layout: WireLayout, block: int = 512):
        self.layout = layout
        self.block = block
        self.findings = []
        self.warnings = []

    def validate(self) -> LayoutReport:
        names = set()
        for circuit in self.layout.circuits:
            if circuit.name in names:
                self.findings.append(f"circuit '{circuit.name}': duplicate circuit name")
            names.add(circuit.name)
            self._validate_circuit(circuit)
        self._find_crossings()
        return LayoutReport(findings=list(self.findings), warnings=list(self.warnings))

    def _validate_circuit(self, circuit):
        label = f"circuit '{circuit.name}'"
        if not circuit.segments:
            self.findings.append(f"{label}: no segments")
            return
        width, height = circuit.cross_section
        if not (width > 0 and height > 0):
            self.findings.append(f"{label}: cross-section must be positive, got {width:g} x {height:g} m")
        starts, ends = circuit.arrays()
        lengths = np.linalg.norm(ends - starts, axis=1)
        for k in np.where(lengths <= CONNECT_TOLERANCE)[0]:
            self.findings.append(f"{label}: zero-length segment at index {k}")
        gaps = np.linalg.norm(starts[1:] - ends[:-1], axis=1)
        for k in np.where(gaps > CONNECT_TOLERANCE)[0]:
            self.findings.append(f"{label}: disconnected at index {k + 1} (gap {gaps[k]:.3g} m)")

    def _find_crossings(self):
        """Proper crossings between non-consecutive coplanar segments (projected on the xy plane)."""
        starts, ends, owner, index = [], [], [], []
        for ci, circuit in enumerate(self.layout.circuits):
            s, e = circuit.arrays()
            if len(s) == 0 or not (np.all(np.isfinite(s)) and np.all(np.isfinite(e))):
                continue
            starts.append(s)
            ends.append(e)
            owner.append(np.full(len(s), ci))
            index.append(np.arange(len(s)))
        if not starts:
            return
        a = np.vstack(starts)
        b = np.vstack(ends)
        owner = np.concatenate(owner)
        index = np.concatenate(index)
        n = len(a)
        zlo = np.minimum(a[:, 2], b[:, 2])
        zhi = np.maximum(a[:, 2], b[:, 2])

        for lo in range(0, n, self.block):
            hi = min(lo + self.block, n)
            ax, ay = a[lo:hi, 0:1], a[lo:hi, 1:2]
            bx, by = b[lo:hi, 0:1], b[lo:hi, 1:2]
            cx, cy = a[None, :, 0], a[None, :, 1]
            dx, dy = b[None, :, 0], b[None, :, 1]
            o1 = _orientation(ax, ay, bx, by, cx, cy)
            o2 = _orientation(ax, ay, bx, by, dx, dy)
            o3 = _orientation(cx, cy, dx, dy, ax, ay)
            o4 = _orientation(cx, cy, dx, dy, bx, by)
            cross = (o1 * o2 < 0) & (o3 * o4 < 0)
            coplanar = (zlo[lo:hi, None] <= zhi[None, :] + CONNECT_TOLERANCE) & \
                       (zlo[None, :] <= zhi[lo:hi, None] + CONNECT_TOLERANCE)
            rows = np.arange(lo, hi)[:, None]
            cols = np.arange(n)[None, :]
            same = owner[rows] == owner[cols]
            neighbours = same & (np.abs(index[rows] - index[cols]) <= 1)
            hits = cross & coplanar & ~neighbours & (cols > rows)
            for i, j in zip(*np.nonzero(hits)):
                i, j = lo + i, j
                ni = self.layout.circuits[owner[i]].name
                nj = self.layout.circuits[owner[j]].name
                self.findings.append(
                    f"self-intersection between '{ni}'[{index[i]}] and '{nj}'[{index[j]}]"
                )


def validate_layout(layout: WireLayout) -> LayoutReport:
    """Report disconnected polylines, zero-length segments and crossings; passes iff no findings."""
    return LayoutValidator(layout).validate()
