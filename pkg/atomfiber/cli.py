import argparse
import math
import os
import sys

import numpy as np

from . import __version__
from .analysis import (FitError, ProfileError, bootstrap_tau, density_profile, early_loss_fraction, find_modes,
                       fit_lifetime, fit_two_window, profile_moments, velocity_profile)
from .chipgeom import GeometryError, GeometryFileError
from .constants import CODATA, NotWeakFieldSeekingError
from .guideprops import FieldZeroError, GuideDoesNotFormError, SectionError, guide_scan
from .magnetics import ConductorGuardError, WaveformError, field_map
from .mcsim import EnsembleError, ScenarioError, integrate
from .outputs import (COUNTS_HEADER, FIELD_MAP_HEADER, FIT_HEADER, LOSS_HEADER, PROFILE_HEADER, SCAN_HEADER,
                      SNAPSHOT_HEADER, TOP_HEADER, OutputDir, OutputError, fit_row, profile_rows,
                      read_counts_csv, read_snapshot_csv, snapshot_rows)
from .scenario import ScenarioDocument, list_presets
from .topdynamics import (QuadratureError, StaticQuadrupoleLimit, adiabaticity_check, averaged_curvature,
                          averaged_minimum, averaged_potential, top_closed_form, top_model, zero_orbit)
from .units import QuantityError, parse_quantity
from .validator import ValidationError, validate_layout


THREADS_ENV = "ATOMFIBER_THREADS"
# counts series written by simulate are thinned to at most this many intervals
COUNTS_POINTS = 1000


class CliError(ValueError):
    """Bad command-line usage that argparse cannot detect."""
    pass


REPORTED_ERRORS = (
    CliError, ScenarioError, QuantityError, GeometryError, GeometryFileError, WaveformError,
    ConductorGuardError, GuideDoesNotFormError, FieldZeroError, SectionError, StaticQuadrupoleLimit,
    QuadratureError, EnsembleError, FitError, ProfileError, NotWeakFieldSeekingError, ValidationError,
    OutputError, OSError,
)


def _error_line(exc: Exception) -> str:
    lines = [line.strip() for line in str(exc).splitlines() if line.strip()]
    message = lines[0] if lines else ""
    if len(lines) > 1:
        message += " " + "; ".join(lines[1:])
    return f"error: {type(exc).__name__}: {message}"


def _warn(messages):
    for message in messages:
        print(f"Warning: {message}", file=sys.stderr)


def _threads(args, doc=None) -> int:
    if args.threads is not None:
        threads = args.threads
    elif os.environ.get(THREADS_ENV):
        try:
            threads = int(os.environ[THREADS_ENV])
        except ValueError:
            raise CliError(f"{THREADS_ENV} must be a positive integer, got {os.environ[THREADS_ENV]!r}") from None
    elif doc is not None and doc.threads is not None:
        threads = doc.threads
    else:
        threads = 1
    if threads < 1:
        raise CliError(f"thread count must be >= 1, got {threads}")
    return threads


def _document(args) -> ScenarioDocument:
    if not args.scenario:
        raise CliError(f"{args.command} needs --scenario")
    return ScenarioDocument.load(args.scenario)


def _check_layout(model):
    report = validate_layout(model.layout)
    _warn(report.warnings)
    report.raise_if_failed()


def cmd_field_map(args, out: OutputDir):
    doc = _document(args)
    model, _ = doc.build_model()
    _check_layout(model)
    points, times = doc.field_map_points()
    rows = field_map(model, points, times)
    invalid = int(np.isnan(rows[:, 7]).sum())
    if invalid:
        _warn([f"{invalid} grid sample(s) inside the conductor guard are marked nan"])
    out.write_csv("field_map.csv", FIELD_MAP_HEADER, rows)
    out.write_manifest("field-map", doc, doc.seed)


def cmd_guide_scan(args, out: OutputDir):
    doc = _document(args)
    doc.require("geometry", "scan")
    model, path = doc.build_model()
    _check_layout(model)
    scan = doc.scan
    table = guide_scan(model, path, scan["biases"], s=scan["station"], current=scan["current"],
                       state=doc.state, threads=_threads(args, doc))
    _warn(table.errors)
    _warn(table.check_monotonic())
    for row in table.rows:
        if row.section is not None:
            _warn(row.section.warnings)
    out.write_csv("scan.csv", SCAN_HEADER, table.to_rows())
    out.write_manifest("guide-scan", doc, doc.seed)


def _top_numeric(doc, cfg, params) -> list:
    """Averaged-potential minimum, trap frequencies and zero orbit, as report lines."""
    model, _ = top_model(cfg, doc.top["length"])
    samples = doc.top["samples"]
    seed = np.array([0.0, 0.0, params.h])
    center = averaged_minimum(model, seed, cfg.state, samples=samples)
    _, omegas = averaged_curvature(model, center, 0.2 * params.r0, cfg.state, samples=samples)
    u_min = averaged_potential(model, center, cfg.state, samples=samples)
    orbit = zero_orbit(model, seed)
    shift = float(np.linalg.norm(center - orbit.center))
    return [
        "",
        "numeric time average",
        f"  minimum at (y, z) = ({center[1] * 1e6:.4f}, {center[2] * 1e6:.4f}) um",
        f"  <U> at minimum = {u_min / CODATA.kB * 1e6:.4f} uK",
        f"  f_trap (y, z) = ({omegas[0] / (2 * math.pi) * 1e-3:.4f}, {omegas[1] / (2 * math.pi) * 1e-3:.4f}) kHz",
        f"  zero orbit mean radius = {orbit.mean_radius * 1e6:.4f} um, eccentricity = {orbit.eccentricity:.4f}",
        f"  minimum offset from orbit center = {shift * 1e9:.2f} nm ({shift / params.r0:.4f} r0)",
    ]


def cmd_top_params(args, out: OutputDir):
    doc = _document(args)
    cfg = doc.top_config()
    params = top_closed_form(cfg)
    _warn(params.warnings)
    check = adiabaticity_check(cfg, params)
    f_lar = params.omega_larmor / (2 * math.pi)
    f_trap = params.omega_trap / (2 * math.pi)
    out.write_csv("top.csv", TOP_HEADER, [(
        cfg.d * 1e6, cfg.I0 * 1e3, cfg.Imod * 1e3, cfg.B * 1e4, f_lar * 1e-3, f_trap * 1e-3,
        params.r0 * 1e6, params.h * 1e6, check.passed,
    )])
    lines = [
        f"TOP parameters for {cfg.state.name} (F={cfg.state.F}, mF={cfg.state.mF})",
        f"  d = {cfg.d * 1e6:.4g} um, I0 = {cfg.I0 * 1e3:.4g} mA, Imod = {cfg.Imod * 1e3:.4g} mA, B = {cfg.B * 1e4:.4g} G",
        f"  f_mod = {cfg.omega_mod / (2 * math.pi) * 1e-3:.4g} kHz, phase shift = {math.degrees(cfg.delta_phi):.4g} deg",
        f"  f_Lar = {f_lar * 1e-3:.4f} kHz",
        f"  f_trap = {f_trap * 1e-3:.4f} kHz",
        f"  r0 = {params.r0 * 1e6:.4f} um, h = {params.h * 1e6:.4f} um",
        f"  omega_mod/omega_Lar = {check.larmor_ratio:.4f}, omega_trap/omega_mod = {check.trap_ratio:.4f}",
        f"  adiabaticity: {'pass' if check.passed else 'fail'}",
    ]
    lines += [f"  {m}" for m in check.messages]
    if doc.top["numeric"]:
        lines += _top_numeric(doc, cfg, params)
    out.write_text("top_report.txt", "\n".join(lines) + "\n")
    out.write_manifest("top-params", doc, doc.seed)


def cmd_simulate(args, out: OutputDir):
    doc = _document(args)
    seed = args.seed if args.seed is not None else doc.seed
    if seed is None:
        raise CliError("simulate needs --seed (or a 'seed' entry in the scenario)")
    scenario = doc.build_scenario(seed, _threads(args, doc))
    _check_layout(scenario.model)
    result = integrate(scenario)
    _warn(result.warnings)

    path = scenario.path
    prof = doc.profile
    listing = []
    for k, snap in enumerate(result.snapshots):
        entry = {"t": snap.t}
        if doc.outputs["snapshots"]:
            entry["snapshot"] = f"snapshot_{k:03d}.csv"
            out.write_csv(entry["snapshot"], SNAPSHOT_HEADER, snapshot_rows(snap))
        if doc.outputs["profiles"] and path is not None:
            dens = density_profile(snap, path, prof["bins"], prof["range"], prof["tube_radius"],
                                   prof["normalization"], prof["smooth"])
            vel = velocity_profile(snap, path, prof["velocity_bins"], None, prof["tube_radius"],
                                   prof["normalization"], prof["smooth"])
            entry["density"] = f"density_profile_{k:03d}.csv"
            entry["velocity"] = f"velocity_profile_{k:03d}.csv"
            out.write_csv(entry["density"], PROFILE_HEADER, profile_rows(dens))
            out.write_csv(entry["velocity"], PROFILE_HEADER, profile_rows(vel))
        listing.append(entry)
    if doc.outputs["loss_log"]:
        out.write_csv("loss_log.csv", LOSS_HEADER, ((e.id, e.t, e.cause) for e in result.losses))
    if doc.outputs["counts"]:
        intervals = min(result.steps, COUNTS_POINTS)
        times = np.linspace(0.0, result.steps * result.dt, intervals + 1)
        t, alive = result.counts_series(times)
        out.write_csv("counts.csv", COUNTS_HEADER, zip(map(float, t), map(int, alive)))
    out.write_manifest("simulate", doc, seed, extra={
        "dt": result.dt, "steps": result.steps, "count": result.count,
        "snapshots": listing, "lost_by_cause": result.lost_by_cause(),
    })


def _window(args, doc):
    if args.window is None:
        return doc.fit["window"] if doc is not None else (0.3, math.inf)
    lo = parse_quantity(args.window[0], "s")
    hi = math.inf if args.window[1].strip().lower() == "inf" else parse_quantity(args.window[1], "s")
    return lo, hi


def cmd_lifetime_fit(args, out: OutputDir):
    doc = ScenarioDocument.load(args.scenario) if args.scenario else None
    series = read_counts_csv(args.input)
    window = _window(args, doc)
    fit = fit_lifetime(series, window)
    out.write_csv("fit.csv", FIT_HEADER, [fit_row(fit)])

    split = doc.fit["split"] if doc is not None else 0.3
    horizon = doc.fit["horizon"] if doc is not None else 0.1
    draws = args.bootstrap if args.bootstrap is not None else (doc.fit["bootstrap"] if doc is not None else 0)
    lines = [
        f"single exponential in [{fit.window[0]:.6g}, {fit.window[1]:.6g}] s over {fit.points} points",
        f"  tau = {fit.tau:.6g} s, N0 = {fit.N0:.6g}, rms log residual = {fit.residual:.4g}",
    ]
    try:
        early, late = fit_two_window(series, split)
        if early is not None:
            lines.append(f"  early tau (t < {split:g} s) = {early.tau:.6g} s")
        lines.append(f"  late tau (t >= {split:g} s) = {late.tau:.6g} s")
    except FitError as e:
        _warn([f"two-window fit skipped: {e}"])
    try:
        lines.append(f"  lost by {horizon:g} s: {early_loss_fraction(series, horizon):.4f}")
    except FitError as e:
        _warn([f"early loss fraction skipped: {e}"])
    if draws > 0:
        seed = args.seed if args.seed is not None else 0
        boot = bootstrap_tau(series, window, draws, seed)
        lines.append(f"  bootstrap stderr of tau = {boot.stderr:.4g} s from {boot.draws} draws")
    out.write_text("fit_report.txt", "\n".join(lines) + "\n")
    out.write_manifest("lifetime-fit", doc, args.seed, extra={"input": os.path.abspath(args.input)})


def cmd_profile(args, out: OutputDir):
    doc = _document(args)
    _, path = doc.build_layout()
    snap = read_snapshot_csv(args.input)
    prof = doc.profile
    dens = density_profile(snap, path, prof["bins"], prof["range"], prof["tube_radius"],
                           prof["normalization"], prof["smooth"])
    vel = velocity_profile(snap, path, prof["velocity_bins"], None, prof["tube_radius"],
                           prof["normalization"], prof["smooth"])
    out.write_csv("density_profile.csv", PROFILE_HEADER, profile_rows(dens))
    out.write_csv("velocity_profile.csv", PROFILE_HEADER, profile_rows(vel))
    lines = [f"{dens.total} atoms on the guide, {dens.off_guide} off-guide, {dens.lost} lost"]
    if not dens.empty:
        mean, var = profile_moments(dens)
        lines.append(f"  arclength mean = {mean * 1e3:.6g} mm, variance = {var * 1e6:.6g} mm^2")
    for mode in find_modes(vel):
        lines.append(f"  velocity mode at {mode.center:.4g} m/s, height {mode.height:.4g}, width {mode.width:.4g} m/s")
    out.write_text("profile_report.txt", "\n".join(lines) + "\n")
    out.write_manifest("profile", doc, doc.seed, extra={"input": os.path.abspath(args.input)})


COMMANDS = {
    "field-map": cmd_field_map,
    "guide-scan": cmd_guide_scan,
    "top-params": cmd_top_params,
    "simulate": cmd_simulate,
    "lifetime-fit": cmd_lifetime_fit,
    "profile": cmd_profile,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="Scenario JSON file or shipped preset name")
    common.add_argument("--out", default="atomfiber_out", help="Output directory")
    common.add_argument("--seed", type=int, help="Random seed (required by simulate)")
    common.add_argument("--threads", type=int, help=f"Worker threads (overrides {THREADS_ENV})")

    ap = argparse.ArgumentParser(
        prog="atomfiber",
        description="Magnetic wire guides for cold atoms: fields, guide scans, TOP parameters and Monte-Carlo runs",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--list-presets", action="store_true", help="List shipped scenario presets and exit")
    sub = ap.add_subparsers(dest="command")
    sub.add_parser("field-map", parents=[common], help="Sample B on a grid")
    sub.add_parser("guide-scan", parents=[common], help="Guide height, gradient and depth versus bias")
    sub.add_parser("top-params", parents=[common], help="Time-orbiting potential parameters")
    sub.add_parser("simulate", parents=[common], help="Monte-Carlo trajectories, snapshots and profiles")
    fit = sub.add_parser("lifetime-fit", parents=[common], help="Exponential fit of an alive-count series")
    fit.add_argument("input", help="counts.csv or a simulate output directory")
    fit.add_argument("--window", nargs=2, metavar=("LO", "HI"), help="Fit window, e.g. '300 ms' inf")
    fit.add_argument("--bootstrap", type=int, help="Bootstrap draws for the tau standard error")
    prof = sub.add_parser("profile", parents=[common], help="Arclength and velocity profiles of a snapshot")
    prof.add_argument("input", help="Snapshot CSV written by simulate")
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)

    if args.list_presets:
        for name in list_presets():
            print(name)
        return 0
    if args.command is None:
        ap.print_usage(sys.stderr)
        print("error: CliError: a subcommand is required", file=sys.stderr)
        sys.exit(2)
    if args.seed is not None and args.seed < 0:
        print("error: CliError: --seed must be a non-negative integer", file=sys.stderr)
        sys.exit(2)

    try:
        out = OutputDir(args.out)
        COMMANDS[args.command](args, out)
    except REPORTED_ERRORS as e:
        print(_error_line(e), file=sys.stderr)
        sys.exit(1)

    print(f"Wrote {len(out.written)} files to {out.path}")
    return 0


if __name__ == "__main__":
    main()
