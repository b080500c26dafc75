"""CSV writers and readers for command outputs, plus the run.json manifest.

Floats are written with repr so that identical results give byte-identical
files. The manifest carries no timestamps or thread counts for the same reason.
"""
import csv
import json
import math
import os
import platform
from typing import Iterable, List, Sequence

import lark
import numpy as np
import scipy

from . import __version__
from .mcsim import Snapshot


FIELD_MAP_HEADER = ["x", "y", "z", "t", "Bx", "By", "Bz", "Bnorm"]
SCAN_HEADER = ["B_gauss", "I_amp", "height_um", "gradient_G_per_cm", "depth_uK", "Bmin_gauss"]
TOP_HEADER = ["d_um", "I0_mA", "Imod_mA", "B_G", "f_lar_kHz", "f_trap_kHz", "r0_um", "h_um", "adiabaticity_pass"]
SNAPSHOT_HEADER = ["id", "x", "y", "z", "vx", "vy", "vz", "status"]
LOSS_HEADER = ["id", "t", "cause"]
PROFILE_HEADER = ["bin_center", "value"]
FIT_HEADER = ["tau_s", "N0", "residual", "window_lo", "window_hi"]
COUNTS_HEADER = ["t", "alive"]


class OutputError(RuntimeError):
    """Output file could not be written or read back."""
    pass


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class OutputDir:
    """Collects the files one command writes into a directory."""

    def __init__(self, path: str):
        self.path = path
        self.written: List[str] = []
        try:
            os.makedirs(path, exist_ok=True)
        except OSError as e:
            raise OutputError(f"Cannot create output directory {path}: {e}") from e

    def _target(self, name: str) -> str:
        self.written.append(name)
        return os.path.join(self.path, name)

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
        target = self._target(name)
        with open(target, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
        return target

    def write_text(self, name: str, text: str) -> str:
        target = self._target(name)
        with open(target, "w", encoding="utf-8") as f:
            f.write(text)
        return target

    def write_manifest(self, command: str, doc=None, seed=None, extra=None) -> str:
        """run.json: inputs hash, versions, seed and the list of files written before it."""
        manifest = {
            "command": command,
            "scenario": None if doc is None else doc.name,
            "inputs_sha256": None if doc is None else doc.digest,
            "seed": seed,
            "files": sorted(self.written),
            "versions": {
                "atomfiber": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "lark": lark.__version__,
            },
        }
        if extra:
            manifest.update(extra)
        target = self._target("run.json")
        with open(target, "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")
        return target


def snapshot_rows(snapshot: Snapshot):
    for p in snapshot.particles():
        yield (p.id, *map(float, p.position), *map(float, p.velocity), p.status)


def profile_rows(profile):
    return zip(map(float, profile.centers), map(float, profile.values))


def fit_row(fit):
    return (fit.tau, fit.N0, fit.residual, fit.window[0], fit.window[1])


def _read_rows(path: str, header: Sequence[str]) -> List[dict]:
    if not os.path.isfile(path):
        raise OutputError(f"File not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        missing = [h for h in header if h not in (reader.fieldnames or [])]
        if missing:
            raise OutputError(f"{path}: missing column(s) {', '.join(missing)}")
        return list(reader)


def read_counts_csv(path: str):
    """(t, alive) arrays from a counts CSV or from a simulate output directory."""
    if os.path.isdir(path):
        path = os.path.join(path, "counts.csv")
    rows = _read_rows(path, COUNTS_HEADER)
    try:
        t = np.array([float(r["t"]) for r in rows])
        n = np.array([float(r["alive"]) for r in rows])
    except ValueError as e:
        raise OutputError(f"{path}: malformed number: {e}") from e
    return t, n


def read_snapshot_csv(path: str) -> Snapshot:
    rows = _read_rows(path, SNAPSHOT_HEADER)
    try:
        ids = np.array([int(r["id"]) for r in rows], dtype=int)
        pos = np.array([[float(r[k]) for k in ("x", "y", "z")] for r in rows]).reshape(-1, 3)
        vel = np.array([[float(r[k]) for k in ("vx", "vy", "vz")] for r in rows]).reshape(-1, 3)
    except ValueError as e:
        raise OutputError(f"{path}: malformed number: {e}") from e
    status = np.array([r["status"] for r in rows], dtype=object)
    return Snapshot(t=math.nan, ids=ids, positions=pos, velocities=vel, status=status)
