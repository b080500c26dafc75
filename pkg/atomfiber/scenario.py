"""Scenario documents: one JSON file describing a chip, its currents, the atoms and the run.

Quantities are unit-suffixed strings ("10 G", "57.5 um"). A document is
checked completely when it is loaded; every problem found is reported in a
single ScenarioError before anything is computed.
"""
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from . import chipgeom, units
from .constants import CODATA, AtomState, species
from .guideprops import utrap_bias_for_depth, with_bias_magnitude
from .layout import GuidePath, WireLayout
from .magnetics import BiasWaveform, CurrentWaveform, FieldModel, WaveformError
from .mcsim import DtPolicy, EnsembleSpec, LossConfig, Scenario, ScenarioError, loading_schedule
from .topdynamics import TopConfig


PRESET_DIR = os.path.join(os.path.dirname(__file__), "presets")

REQUIRED = object()

# geometry preset -> parameter -> (SI dimension or None for integers, default)
GEOMETRY_PRESETS: Dict[str, Dict[str, Tuple[Optional[str], Any]]] = {
    "side_wire": {"length": ("m", 10e-3), "z": ("m", 0.0), "y": ("m", 0.0)},
    "straight_pair": {"length": ("m", 10e-3), "d": ("m", REQUIRED), "z": ("m", 0.0)},
    "separated_pair": {"length": ("m", 10e-3), "d": ("m", REQUIRED), "z": ("m", 0.0)},
    "u_pair": {"length": ("m", REQUIRED), "d": ("m", REQUIRED), "lead_length": ("m", 2e-3), "z": ("m", 0.0)},
    "loading": {"length": ("m", 10e-3), "d": ("m", REQUIRED), "z": ("m", 0.0), "single_offset": ("m", 0.0)},
    "spiral": {
        "inner": ("m", REQUIRED), "outer": ("m", REQUIRED), "length": ("m", REQUIRED), "d": ("m", REQUIRED),
        "z": ("m", 0.0), "points_per_turn": (None, 512), "pad_distance": ("m", 5e-3), "pad_spread": ("m", 2e-3),
    },
}

# ohmic heating limits the spiral guide to about 200 ms of operation
SPIRAL_DURATION_LIMIT = 0.2

SECTIONS = {
    "name", "description", "seed", "threads", "geometry", "waveforms", "bias", "loading", "species",
    "ensemble", "integration", "losses", "field_map", "scan", "top", "profile", "fit", "outputs",
}
SECTION_KEYS = {
    "geometry": {"preset", "file", "centerline", "half_separation", "cross_section", "filaments", "guard"},
    "bias": {"B", "direction", "angle", "horizontal", "vertical", "offset", "schedule", "depth", "bias_range"},
    "loading": {"t_ramp1", "t_ramp2", "single_current", "pair_current", "B"},
    "species": {"name", "mass", "F", "mF", "gF"},
    "ensemble": {"count", "T_transverse", "T_longitudinal", "longitudinal_sigma", "station", "energy_cutoff",
                 "max_candidates"},
    "integration": {"duration", "snapshots", "eta", "dt", "steps_per_period", "potential", "averaging_samples",
                    "gravity", "chunk_size", "duration_limit"},
    "losses": {"tau_background", "majorana_threshold", "Bfloor", "domain_margin", "velocity_cap",
               "surface_clearance"},
    "field_map": {"x", "y", "z", "times"},
    "scan": {"biases", "current", "station"},
    "top": {"d", "I0", "Imod", "B", "f_mod", "omega_mod", "delta_phi", "numeric", "samples", "length"},
    "profile": {"bins", "velocity_bins", "range", "tube_radius", "normalization", "smooth"},
    "fit": {"window", "split", "horizon", "bootstrap"},
    "outputs": {"snapshots", "profiles", "counts", "loss_log"},
}
WAVEFORM_KEYS = {"kind", "current", "I0", "Imod", "f_mod", "omega_mod", "phase", "knots"}
DISABLED = ("inf", "off", "none")


class _Checker:
    """Reads typed values out of JSON objects, collecting problems instead of raising."""

    def __init__(self):
        self.problems: List[str] = []

    def fail(self, where: str, message: str):
        self.problems.append(f"{where}: {message}")

    def section(self, data: dict, name: str, check_keys: bool = True) -> dict:
        value = data.get(name)
        if value is None:
            return {}
        if not isinstance(value, dict):
            self.fail(name, "must be an object")
            return {}
        if check_keys:
            for key in sorted(set(value) - SECTION_KEYS.get(name, set(value))):
                self.fail(f"{name}.{key}", "unknown key")
        return value

    def quantity(self, where: str, data: dict, key: str, expect: Optional[str], default=REQUIRED,
                 disabled: Optional[float] = None):
        if data.get(key) is None:
            if default is REQUIRED:
                self.fail(f"{where}.{key}", "missing")
                return math.nan
            return default
        raw = data[key]
        if disabled is not None and isinstance(raw, str) and raw.strip().lower() in DISABLED:
            return disabled
        return self.convert(f"{where}.{key}", raw, expect)

    def convert(self, where: str, raw, expect: Optional[str]) -> float:
        if isinstance(raw, bool):
            self.fail(where, f"expected a quantity, got {raw!r}")
            return math.nan
        try:
            return units.parse_quantity(raw, expect)
        except units.QuantityError as e:
            self.fail(where, str(e).splitlines()[0])
            return math.nan

    def integer(self, where: str, data: dict, key: str, default=REQUIRED, minimum: Optional[int] = None):
        value = data.get(key)
        if value is None:
            if default is REQUIRED:
                self.fail(f"{where}.{key}", "missing")
            return None if default is REQUIRED else default
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(f"{where}.{key}", f"expected an integer, got {value!r}")
            return None
        if minimum is not None and value < minimum:
            self.fail(f"{where}.{key}", f"must be >= {minimum}, got {value}")
            return None
        return value

    def number(self, where: str, data: dict, key: str, default=REQUIRED):
        value = data.get(key)
        if value is None:
            if default is REQUIRED:
                self.fail(f"{where}.{key}", "missing")
                return math.nan
            return default
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(f"{where}.{key}", f"expected a number, got {value!r}")
            return math.nan
        return float(value)

    def flag(self, where: str, data: dict, key: str, default: bool) -> bool:
        value = data.get(key, default)
        if not isinstance(value, bool):
            self.fail(f"{where}.{key}", f"expected true or false, got {value!r}")
            return default
        return value

    def choice(self, where: str, data: dict, key: str, options, default):
        value = data.get(key, default)
        if value not in options:
            self.fail(f"{where}.{key}", f"expected one of {', '.join(options)}, got {value!r}")
            return default
        return value

    def vector(self, where: str, raw, expect: Optional[str], size: int = 3) -> Optional[Tuple[float, ...]]:
        if not isinstance(raw, list) or len(raw) != size:
            self.fail(where, f"expected a list of {size} values")
            return None
        return tuple(self.convert(f"{where}[{i}]", v, expect) for i, v in enumerate(raw))

    def knots(self, where: str, raw, expect: str) -> Optional[Tuple[Tuple[float, float], ...]]:
        if not isinstance(raw, list) or not raw:
            self.fail(where, "expected a non-empty list of [time, value] pairs")
            return None
        out = []
        for i, pair in enumerate(raw):
            if not isinstance(pair, list) or len(pair) != 2:
                self.fail(f"{where}[{i}]", "expected a [time, value] pair")
                return None
            out.append((self.convert(f"{where}[{i}][0]", pair[0], "s"),
                        self.convert(f"{where}[{i}][1]", pair[1], expect)))
        return tuple(out)

    def axis(self, where: str, raw, expect: str) -> Optional[np.ndarray]:
        """A single quantity, a list of quantities, or {"from", "to", "num", "spacing"}."""
        if isinstance(raw, dict):
            unknown = sorted(set(raw) - {"from", "to", "num", "spacing"})
            for key in unknown:
                self.fail(f"{where}.{key}", "unknown key")
            lo = self.quantity(where, raw, "from", expect)
            hi = self.quantity(where, raw, "to", expect)
            num = self.integer(where, raw, "num", minimum=1)
            spacing = self.choice(where, raw, "spacing", ("linear", "log"), "linear")
            if num is None or not (math.isfinite(lo) and math.isfinite(hi)):
                return None
            if spacing == "log":
                if not (lo > 0 and hi > 0):
                    self.fail(where, "log spacing needs positive bounds")
                    return None
                return np.geomspace(lo, hi, num)
            return np.linspace(lo, hi, num)
        if isinstance(raw, list):
            if not raw:
                self.fail(where, "empty list")
                return None
            return np.array([self.convert(f"{where}[{i}]", v, expect) for i, v in enumerate(raw)])
        return np.array([self.convert(where, raw, expect)])


@dataclass
class GeometryConfig:
    preset: Optional[str] = None
    params: Dict[str, Any] = field(default_factory=dict)
    file: Optional[str] = None
    centerline: Optional[np.ndarray] = None
    half_separation: Optional[float] = None
    cross_section: Optional[Tuple[float, float]] = None
    filaments: int = 1
    guard: float = 2e-6


@dataclass
class BiasConfig:
    magnitude_knots: Tuple[Tuple[float, float], ...] = ((0.0, 0.0),)
    angle_knots: Tuple[Tuple[float, float], ...] = ((0.0, math.pi / 2),)
    horizontal: Tuple[float, float, float] = (0.0, 1.0, 0.0)
    vertical: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    offset: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    depth: Optional[float] = None
    bias_range: Tuple[float, float] = (1e-5, 1e-2)

    def waveform(self) -> BiasWaveform:
        return BiasWaveform(magnitude_knots=self.magnitude_knots, angle_knots=self.angle_knots,
                            horizontal=self.horizontal, vertical=self.vertical, static_offset=self.offset)


class ScenarioDocument:
    """A parsed, validated scenario. Build methods turn it into library objects."""

    def __init__(self, data: dict, source: str = "<memory>", raw: Optional[bytes] = None,
                 base_dir: Optional[str] = None):
        if not isinstance(data, dict):
            raise ScenarioError("Validation failed:\nscenario document must be a JSON object")
        self.source = source
        self.base_dir = base_dir if base_dir is not None else os.getcwd()
        raw = raw if raw is not None else json.dumps(data, sort_keys=True).encode("utf-8")
        self.digest = hashlib.sha256(raw).hexdigest()
        self.data = data
        self.warnings: List[str] = []

        check = _Checker()
        for key in sorted(set(data) - SECTIONS):
            check.fail(key, "unknown section")
        self.name = str(data.get("name", os.path.splitext(os.path.basename(source))[0]))
        self.seed = check.integer("scenario", data, "seed", default=None, minimum=0) if "seed" in data else None
        self.threads = check.integer("scenario", data, "threads", default=None, minimum=1) if "threads" in data else None

        self.geometry = self._parse_geometry(check, data)
        self.waveform_specs = self._parse_waveforms(check, data)
        self.bias = self._parse_bias(check, data)
        self.loading = self._parse_loading(check, data)
        self.state = self._parse_species(check, data)
        self.ensemble = self._parse_ensemble(check, data)
        self.integration = self._parse_integration(check, data)
        self.losses = self._parse_losses(check, data)
        self.field_map = self._parse_field_map(check, data)
        self.scan = self._parse_scan(check, data)
        self.top = self._parse_top(check, data)
        self.profile = self._parse_profile(check, data)
        self.fit = self._parse_fit(check, data)
        self.outputs = self._parse_outputs(check, data)

        if check.problems:
            raise ScenarioError("Validation failed:\n" + "\n".join(check.problems))

    # -- loading ---------------------------------------------------------

    @classmethod
    def load(cls, name_or_path: str) -> "ScenarioDocument":
        """Read a scenario file; bare names are also looked up among the shipped presets."""
        path = resolve_scenario_path(name_or_path)
        try:
            with open(path, "rb") as f:
                raw = f.read()
        except OSError as e:
            raise ScenarioError(f"Failed to read scenario {path}: {e}") from e
        try:
            data = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ScenarioError(f"Scenario {path} is not valid JSON: {e}") from e
        return cls(data, source=path, raw=raw, base_dir=os.path.dirname(os.path.abspath(path)))

    def require(self, *sections: str):
        """Fail unless the named sections were present in the document."""
        missing = [s for s in sections if not isinstance(self.data.get(s), dict)]
        if missing:
            raise ScenarioError(
                "Validation failed:\n" + "\n".join(f"{s}: missing section" for s in missing)
            )

    # -- section parsers -------------------------------------------------

    def _parse_geometry(self, check: _Checker, data: dict) -> GeometryConfig:
        # keys depend on the preset, checked below
        sec = check.section(data, "geometry", check_keys=False)
        cfg = GeometryConfig()
        if not sec:
            return cfg
        preset, path = sec.get("preset"), sec.get("file")
        if (preset is None) == (path is None):
            check.fail("geometry", "give exactly one of 'preset' or 'file'")
            return cfg
        if preset is not None:
            if preset not in GEOMETRY_PRESETS:
                check.fail("geometry.preset", f"unknown preset {preset!r} (known: {', '.join(GEOMETRY_PRESETS)})")
                return cfg
            cfg.preset = preset
            table = GEOMETRY_PRESETS[preset]
            allowed = set(table) | SECTION_KEYS["geometry"]
            for key in sorted(set(sec) - allowed):
                check.fail(f"geometry.{key}", f"not a parameter of preset '{preset}'")
            for key, (dim, default) in table.items():
                if dim is None:
                    cfg.params[key] = check.integer("geometry", sec, key, default=default, minimum=1)
                else:
                    cfg.params[key] = check.quantity("geometry", sec, key, dim, default)
        else:
            for key in sorted(set(sec) - SECTION_KEYS["geometry"]):
                check.fail(f"geometry.{key}", "unknown key")
            cfg.file = path if os.path.isabs(path) else os.path.join(self.base_dir, path)
            raw = sec.get("centerline")
            if not isinstance(raw, list) or len(raw) < 2:
                check.fail("geometry.centerline", "external geometry needs a centerline of at least 2 points")
            else:
                pts = [check.vector(f"geometry.centerline[{i}]", p, "m") for i, p in enumerate(raw)]
                if all(p is not None for p in pts):
                    cfg.centerline = np.array(pts, dtype=float)
            if sec.get("half_separation") is not None:
                cfg.half_separation = check.quantity("geometry", sec, "half_separation", "m")
        if sec.get("cross_section") is not None:
            cs = check.vector("geometry.cross_section", sec["cross_section"], "m", size=2)
            if cs is not None:
                if not all(v > 0 for v in cs):
                    check.fail("geometry.cross_section", "width and height must be positive")
                cfg.cross_section = cs
        cfg.filaments = check.integer("geometry", sec, "filaments", default=1, minimum=1)
        cfg.guard = check.quantity("geometry", sec, "guard", "m", 2e-6)
        if not cfg.guard > 0:
            check.fail("geometry.guard", "must be positive")
        return cfg

    def _parse_waveform(self, check: _Checker, where: str, spec) -> Optional[Dict[str, Any]]:
        if not isinstance(spec, dict):
            check.fail(where, "must be an object")
            return None
        for key in sorted(set(spec) - WAVEFORM_KEYS):
            check.fail(f"{where}.{key}", "unknown key")
        kind = check.choice(where, spec, "kind", ("constant", "ramp", "sinusoidal"), "constant")
        out: Dict[str, Any] = {"kind": kind}
        if kind == "constant":
            out["I0"] = check.quantity(where, spec, "current", "A")
        elif kind == "ramp":
            out["knots"] = check.knots(f"{where}.knots", spec.get("knots"), "A")
        else:
            out["I0"] = check.quantity(where, spec, "I0", "A")
            out["Imod"] = check.quantity(where, spec, "Imod", "A")
            if spec.get("omega_mod") is not None:
                out["omega_mod"] = check.quantity(where, spec, "omega_mod", "rad/s")
            else:
                out["omega_mod"] = 2.0 * math.pi * check.quantity(where, spec, "f_mod", "Hz")
            out["phase"] = check.quantity(where, spec, "phase", "rad", 0.0)
        if any(v is None or (isinstance(v, float) and math.isnan(v)) for v in out.values()):
            return None
        try:
            CurrentWaveform(name=where, **out)
        except WaveformError as e:
            check.fail(where, str(e))
            return None
        return out

    def _parse_waveforms(self, check: _Checker, data: dict) -> Dict[str, Dict[str, Any]]:
        raw = data.get("waveforms")
        if raw is None:
            return {}
        if not isinstance(raw, dict):
            check.fail("waveforms", "must be an object mapping circuit names to waveforms")
            return {}
        specs = {}
        for name, spec in raw.items():
            parsed = self._parse_waveform(check, f"waveforms.{name}", spec)
            if parsed is not None:
                specs[name] = parsed
        return specs

    def _parse_bias(self, check: _Checker, data: dict) -> BiasConfig:
        sec = check.section(data, "bias")
        cfg = BiasConfig()
        if not sec:
            return cfg
        known = len(check.problems)
        direction = check.choice("bias", sec, "direction", ("vertical", "horizontal"), "vertical")
        angle = math.pi / 2 if direction == "vertical" else 0.0
        angle = check.quantity("bias", sec, "angle", "rad", angle)
        for key in ("horizontal", "vertical"):
            if sec.get(key) is not None:
                vec = check.vector(f"bias.{key}", sec[key], None)
                if vec is not None:
                    setattr(cfg, key, vec)
        if sec.get("offset") is not None:
            vec = check.vector("bias.offset", sec["offset"], "T")
            if vec is not None:
                cfg.offset = vec
        if sec.get("depth") is not None:
            cfg.depth = CODATA.kB * check.quantity("bias", sec, "depth", "K")
            if sec.get("B") is not None:
                check.fail("bias", "give either 'B' or 'depth', not both")
        if sec.get("bias_range") is not None:
            rng = check.vector("bias.bias_range", sec["bias_range"], "T", size=2)
            if rng is not None:
                if not 0 < rng[0] < rng[1]:
                    check.fail("bias.bias_range", "expected 0 < low < high")
                cfg.bias_range = rng

        schedule = sec.get("schedule")
        magnitude = 0.0 if cfg.depth is not None else check.quantity("bias", sec, "B", "T", 0.0)
        cfg.magnitude_knots = ((0.0, magnitude),)
        cfg.angle_knots = ((0.0, angle),)
        if schedule is not None:
            if not isinstance(schedule, dict) or not set(schedule) <= {"magnitude", "angle"}:
                check.fail("bias.schedule", "expected an object with 'magnitude' and/or 'angle' knot lists")
            else:
                if "magnitude" in schedule:
                    knots = check.knots("bias.schedule.magnitude", schedule["magnitude"], "T")
                    if knots is not None:
                        cfg.magnitude_knots = knots
                if "angle" in schedule:
                    knots = check.knots("bias.schedule.angle", schedule["angle"], "rad")
                    if knots is not None:
                        cfg.angle_knots = knots
        if len(check.problems) == known:
            try:
                cfg.waveform()
            except WaveformError as e:
                check.fail("bias", str(e))
        return cfg

    def _parse_loading(self, check: _Checker, data: dict) -> Optional[Dict[str, float]]:
        sec = check.section(data, "loading")
        if not sec:
            return None
        out = {
            "t_ramp1": check.quantity("loading", sec, "t_ramp1", "s"),
            "t_ramp2": check.quantity("loading", sec, "t_ramp2", "s"),
            "single_current": check.quantity("loading", sec, "single_current", "A"),
            "pair_current": check.quantity("loading", sec, "pair_current", "A"),
            "bias": check.quantity("loading", sec, "B", "T"),
        }
        if self.geometry.preset not in (None, "loading"):
            check.fail("loading", f"needs the 'loading' geometry preset, not '{self.geometry.preset}'")
        return out

    def _parse_species(self, check: _Checker, data: dict) -> Optional[AtomState]:
        sec = check.section(data, "species")
        default = "Rb87" if isinstance(data.get("top"), dict) else "Li7"
        name = sec.get("name", default)
        overrides = {}
        if sec.get("mass") is not None:
            overrides["mass"] = check.quantity("species", sec, "mass", "kg")
        for key in ("F", "mF"):
            if sec.get(key) is not None:
                overrides[key] = check.integer("species", sec, key)
        if sec.get("gF") is not None:
            overrides["gF"] = check.number("species", sec, "gF")
        if any(v is None or (isinstance(v, float) and math.isnan(v)) for v in overrides.values()):
            return None
        try:
            state = species(name, **overrides)
        except (KeyError, ValueError) as e:
            check.fail("species", str(e).strip("'\""))
            return None
        if not state.weak_field_seeking:
            check.fail("species", f"state gF*mF = {state.gF * state.mF:g} of '{state.name}' is not weak-field seeking")
        return state

    def _parse_ensemble(self, check: _Checker, data: dict) -> Dict[str, Any]:
        sec = check.section(data, "ensemble")
        if not sec:
            return {}
        out = {
            "count": check.integer("ensemble", sec, "count", minimum=1),
            "T_transverse": check.quantity("ensemble", sec, "T_transverse", "K"),
            "T_longitudinal": check.quantity("ensemble", sec, "T_longitudinal", "K"),
            "longitudinal_sigma": check.quantity("ensemble", sec, "longitudinal_sigma", "m", 0.5e-3),
            "station": check.quantity("ensemble", sec, "station", "m", None),
            "energy_cutoff": check.number("ensemble", sec, "energy_cutoff", 12.0),
            "max_candidates": check.integer("ensemble", sec, "max_candidates", default=100000, minimum=1),
        }
        for key in ("T_transverse", "T_longitudinal"):
            if not out[key] > 0:
                check.fail(f"ensemble.{key}", "must be positive")
        return out

    def _parse_integration(self, check: _Checker, data: dict) -> Dict[str, Any]:
        sec = check.section(data, "integration")
        if not sec:
            return {}
        duration = check.quantity("integration", sec, "duration", "s")
        if "snapshots" in sec:
            snaps = check.axis("integration.snapshots", sec["snapshots"], "s")
        else:
            snaps = np.linspace(0.0, duration, 5) if math.isfinite(duration) else None
        default_limit = SPIRAL_DURATION_LIMIT if self.geometry.preset == "spiral" else None
        out = {
            "duration": duration,
            "snapshots": [] if snaps is None else [float(t) for t in snaps],
            "eta": check.number("integration", sec, "eta", 0.05),
            "dt": check.quantity("integration", sec, "dt", "s", None),
            "steps_per_period": check.integer("integration", sec, "steps_per_period", default=32, minimum=4),
            "potential": check.choice("integration", sec, "potential", ("instantaneous", "averaged"), "instantaneous"),
            "averaging_samples": check.integer("integration", sec, "averaging_samples", default=64, minimum=4),
            "gravity": check.flag("integration", sec, "gravity", False),
            "chunk_size": check.integer("integration", sec, "chunk_size", default=256, minimum=1),
            "duration_limit": check.quantity("integration", sec, "duration_limit", "s", default_limit),
        }
        if not duration > 0:
            check.fail("integration.duration", "must be positive")
        for t in out["snapshots"]:
            if math.isfinite(duration) and not 0.0 <= t <= duration:
                check.fail("integration.snapshots", f"time {t:g} s outside [0, {duration:g}] s")
        if not out["eta"] > 0:
            check.fail("integration.eta", "must be positive")
        return out

    def _parse_losses(self, check: _Checker, data: dict) -> LossConfig:
        sec = check.section(data, "losses")
        threshold = sec.get("majorana_threshold", 1.0)
        if isinstance(threshold, str) and threshold.strip().lower() in DISABLED:
            threshold = math.inf
        else:
            threshold = check.number("losses", sec, "majorana_threshold", 1.0)
        kwargs = {
            "tau_background": check.quantity("losses", sec, "tau_background", "s", math.inf, disabled=math.inf),
            "majorana_threshold": threshold,
            "Bfloor": check.quantity("losses", sec, "Bfloor", "T", 1e-7, disabled=0.0),
            "domain_margin": check.quantity("losses", sec, "domain_margin", "m", 1e-3),
            "velocity_cap": check.quantity("losses", sec, "velocity_cap", "m/s", math.inf, disabled=math.inf),
            "surface_clearance": check.quantity("losses", sec, "surface_clearance", "m", None),
        }
        if any(isinstance(v, float) and math.isnan(v) for v in kwargs.values()):
            return LossConfig()
        try:
            return LossConfig(**kwargs)
        except ScenarioError as e:
            check.fail("losses", str(e))
            return LossConfig()

    def _parse_field_map(self, check: _Checker, data: dict) -> Dict[str, np.ndarray]:
        sec = check.section(data, "field_map")
        if not sec:
            return {}
        out = {}
        for axis in ("x", "y", "z"):
            out[axis] = check.axis(f"field_map.{axis}", sec.get(axis, "0 m"), "m")
        out["times"] = check.axis("field_map.times", sec.get("times", "0 s"), "s")
        return out

    def _parse_scan(self, check: _Checker, data: dict) -> Dict[str, Any]:
        sec = check.section(data, "scan")
        if not sec:
            return {}
        if sec.get("biases") is None:
            check.fail("scan.biases", "missing")
            biases = None
        else:
            biases = check.axis("scan.biases", sec["biases"], "T")
        if biases is not None and np.any(~(biases > 0)):
            check.fail("scan.biases", "bias magnitudes must be positive")
        return {
            "biases": biases,
            "current": check.quantity("scan", sec, "current", "A", None),
            "station": check.quantity("scan", sec, "station", "m", None),
        }

    def _parse_top(self, check: _Checker, data: dict) -> Optional[Dict[str, Any]]:
        sec = check.section(data, "top")
        if not sec:
            return None
        if sec.get("omega_mod") is not None:
            omega = check.quantity("top", sec, "omega_mod", "rad/s")
        else:
            omega = 2.0 * math.pi * check.quantity("top", sec, "f_mod", "Hz", 50e3)
        out = {
            "d": check.quantity("top", sec, "d", "m"),
            "I0": check.quantity("top", sec, "I0", "A"),
            "Imod": check.quantity("top", sec, "Imod", "A"),
            "B": check.quantity("top", sec, "B", "T"),
            "omega_mod": omega,
            "delta_phi": check.quantity("top", sec, "delta_phi", "rad", math.pi / 2),
            "numeric": check.flag("top", sec, "numeric", False),
            "samples": check.integer("top", sec, "samples", default=256, minimum=8),
            "length": check.quantity("top", sec, "length", "m", 10e-3),
        }
        if self.state is not None and all(math.isfinite(out[k]) for k in ("d", "I0", "Imod", "B", "omega_mod")):
            try:
                self._top_config(out)
            except ValueError as e:
                check.fail("top", str(e))
        return out

    def _parse_profile(self, check: _Checker, data: dict) -> Dict[str, Any]:
        sec = check.section(data, "profile")
        out = {
            "bins": check.integer("profile", sec, "bins", default=100, minimum=2),
            "velocity_bins": check.integer("profile", sec, "velocity_bins", default=60, minimum=2),
            "range": None,
            "tube_radius": check.quantity("profile", sec, "tube_radius", "m", math.inf),
            "normalization": check.choice("profile", sec, "normalization", ("counts", "density"), "counts"),
            "smooth": check.flag("profile", sec, "smooth", False),
        }
        if sec.get("range") is not None:
            out["range"] = check.vector("profile.range", sec["range"], "m", size=2)
        return out

    def _parse_fit(self, check: _Checker, data: dict) -> Dict[str, Any]:
        sec = check.section(data, "fit")
        window = (0.3, math.inf)
        raw = sec.get("window")
        if raw is not None:
            if not isinstance(raw, list) or len(raw) != 2:
                check.fail("fit.window", "expected [low, high]")
            else:
                lo = check.convert("fit.window[0]", raw[0], "s")
                hi = math.inf if isinstance(raw[1], str) and raw[1].strip().lower() in DISABLED \
                    else check.convert("fit.window[1]", raw[1], "s")
                if not lo < hi:
                    check.fail("fit.window", "low must be below high")
                window = (lo, hi)
        return {
            "window": window,
            "split": check.quantity("fit", sec, "split", "s", 0.3),
            "horizon": check.quantity("fit", sec, "horizon", "s", 0.1),
            "bootstrap": check.integer("fit", sec, "bootstrap", default=0, minimum=0),
        }

    def _parse_outputs(self, check: _Checker, data: dict) -> Dict[str, bool]:
        sec = check.section(data, "outputs")
        return {key: check.flag("outputs", sec, key, True) for key in ("snapshots", "profiles", "counts", "loss_log")}

    # -- builders --------------------------------------------------------

    def build_layout(self) -> Tuple[WireLayout, GuidePath]:
        g = self.geometry
        if g.preset is None and g.file is None:
            raise ScenarioError("Validation failed:\ngeometry: missing section")
        if g.file is not None:
            layout = chipgeom.read_geometry(g.file)
            path = GuidePath.from_points(g.centerline, plane_height=float(g.centerline[0, 2]),
                                         half_separation=g.half_separation)
            return layout, path
        p = g.params
        extra = {} if g.cross_section is None else {"cross_section": g.cross_section}
        if g.preset == "spiral":
            spec = chipgeom.SpiralSpec(inner=p["inner"], outer=p["outer"], length=p["length"], d=p["d"], z=p["z"],
                                       points_per_turn=p["points_per_turn"], pad_distance=p["pad_distance"],
                                       pad_spread=p["pad_spread"], **extra)
            circuit, path = chipgeom.build_spiral_pair(spec)
            return WireLayout([circuit]), path
        if g.preset == "straight_pair":
            circuit, path = chipgeom.build_straight_pair(p["length"], p["d"], p["z"], **extra)
            return WireLayout([circuit]), path
        if g.preset == "separated_pair":
            wires, path = chipgeom.build_separated_pair(p["length"], p["d"], p["z"], **extra)
            return WireLayout(wires), path
        if g.preset == "side_wire":
            circuit, path = chipgeom.build_side_wire(p["length"], p["z"], p["y"], **extra)
            return WireLayout([circuit]), path
        if g.preset == "u_pair":
            return chipgeom.build_u_pair(p["length"], p["d"], p["lead_length"], p["z"], **extra)
        return chipgeom.build_loading_layout(p["length"], p["d"], p["z"], p["single_offset"])

    def _waveforms(self, layout: WireLayout) -> Tuple[Dict[str, CurrentWaveform], BiasWaveform]:
        bias = self.bias.waveform()
        if self.loading is not None:
            return loading_schedule(horizontal=self.bias.horizontal, vertical=self.bias.vertical,
                                    static_offset=self.bias.offset, **self.loading)
        waves = {}
        for circuit in layout.circuits:
            ref = circuit.waveform_ref
            spec = self.waveform_specs.get(ref, self.waveform_specs.get("default"))
            if spec is None:
                raise ScenarioError(f"Validation failed:\nwaveforms.{ref}: missing (circuit '{circuit.name}')")
            waves[ref] = CurrentWaveform(name=ref, **spec)
        return waves, bias

    def build_model(self) -> Tuple[FieldModel, GuidePath]:
        """Field model of the document's chip; a requested depth fixes the bias magnitude."""
        layout, path = self.build_layout()
        waves, bias = self._waveforms(layout)
        model = FieldModel(layout, waves, bias, min_distance_guard=self.geometry.guard,
                           filaments=self.geometry.filaments)
        if self.bias.depth is not None:
            solved = utrap_bias_for_depth(model, path, self.bias.depth, s=self.ensemble.get("station"),
                                          bias_range=self.bias.bias_range, state=self.state)
            model = with_bias_magnitude(model, solved)
        return model, path

    def _top_config(self, top: Dict[str, Any]) -> TopConfig:
        return TopConfig(d=top["d"], I0=top["I0"], Imod=top["Imod"], B=top["B"], omega_mod=top["omega_mod"],
                         delta_phi=top["delta_phi"], state=self.state)

    def top_config(self) -> TopConfig:
        self.require("top")
        return self._top_config(self.top)

    def field_map_points(self) -> Tuple[np.ndarray, np.ndarray]:
        self.require("field_map")
        fm = self.field_map
        gx, gy, gz = np.meshgrid(fm["x"], fm["y"], fm["z"], indexing="ij")
        points = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
        return points, fm["times"]

    def build_scenario(self, seed: int, threads: int = 1) -> Scenario:
        """Monte-Carlo scenario for mcsim.integrate."""
        self.require("geometry", "ensemble", "integration")
        model, path = self.build_model()
        ens, integ = self.ensemble, self.integration
        spec = EnsembleSpec(count=ens["count"], T_transverse=ens["T_transverse"], T_longitudinal=ens["T_longitudinal"],
                            longitudinal_sigma=ens["longitudinal_sigma"], seed=seed,
                            energy_cutoff=ens["energy_cutoff"], max_candidates=ens["max_candidates"])
        return Scenario(
            model=model, state=self.state, ensemble=spec, total_time=integ["duration"],
            snapshot_times=integ["snapshots"], path=path, station=ens["station"],
            dt_policy=DtPolicy(eta=integ["eta"], dt=integ["dt"], steps_per_period=integ["steps_per_period"]),
            losses=self.losses, potential_mode=integ["potential"], averaging_samples=integ["averaging_samples"],
            gravity=integ["gravity"], duration_warning=integ["duration_limit"], threads=threads,
            chunk_size=integ["chunk_size"],
        )


def resolve_scenario_path(name_or_path: str) -> str:
    if os.path.isfile(name_or_path):
        return name_or_path
    candidates = [os.path.join(PRESET_DIR, name_or_path)]
    if not name_or_path.endswith(".json"):
        candidates.append(os.path.join(PRESET_DIR, name_or_path + ".json"))
    for candidate in candidates:
        if os.path.isfile(candidate):
            return candidate
    raise ScenarioError(f"Scenario not found: {name_or_path} (not a file and not a shipped preset)")


def list_presets() -> List[str]:
    if not os.path.isdir(PRESET_DIR):
        return []
    return sorted(f for f in os.listdir(PRESET_DIR) if f.endswith(".json"))
