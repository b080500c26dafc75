"""Reductions of trajectory snapshots: arclength and velocity profiles, lifetime fits."""
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.signal import find_peaks, peak_widths

from .layout import GuidePath


# point-segment pairs per vectorized projection block
PROJECTION_BLOCK = 1 << 20


class FitError(ValueError):
    """Lifetime fit impossible on the given data."""
    pass


class ProfileError(ValueError):
    """Profile request is malformed."""
    pass


@dataclass
class Profile1D:
    edges: np.ndarray
    counts: np.ndarray
    values: np.ndarray
    normalization: str = "counts"
    off_guide: int = 0
    lost: int = 0
    empty: bool = False

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class LifetimeFit:
    tau: float
    N0: float
    residual: float
    window: Tuple[float, float]
    model: str = "single"
    points: int = 0


@dataclass
class Mode:
    center: float
    height: float
    width: float


def project_arclength(positions, path: GuidePath, tube_radius: float = math.inf):
    """Arclength of the nearest centerline point for each position.

    Returns (s, distance, segment index); s is nan where distance exceeds
    tube_radius (off-guide).
    """
    x = np.atleast_2d(np.asarray(positions, dtype=float))
    a = path.points[:-1]
    d = np.diff(path.points, axis=0)
    seg_len2 = np.einsum("ij,ij->i", d, d)
    best_dist = np.full(len(x), np.inf)
    best_s = np.full(len(x), np.nan)
    best_seg = np.zeros(len(x), dtype=int)
    rows = max(1, PROJECTION_BLOCK // max(len(a), 1))
    for lo in range(0, len(x), rows):
        p = x[lo:lo + rows, None, :]
        u = np.clip(np.einsum("mnk,nk->mn", p - a[None], d) / seg_len2[None], 0.0, 1.0)
        foot = a[None] + u[..., None] * d[None]
        dist = np.linalg.norm(p - foot, axis=2)
        k = np.argmin(dist, axis=1)
        r = np.arange(len(k))
        best_dist[lo:lo + rows] = dist[r, k]
        best_seg[lo:lo + rows] = k
        best_s[lo:lo + rows] = path.arclength[k] + u[r, k] * np.sqrt(seg_len2[k])
    best_s[best_dist > tube_radius] = np.nan
    return best_s, best_dist, best_seg


def _split_snapshot(snapshot):
    status = np.asarray(snapshot.status)
    alive = status == "alive"
    return np.asarray(snapshot.positions)[alive], np.asarray(snapshot.velocities)[alive], int((~alive).sum())


def _edges(bins, default_range):
    if np.ndim(bins) == 0:
        if int(bins) < 2:
            raise ProfileError(f"Profiles need at least 2 bins, got {bins}")
        lo, hi = default_range
        return np.linspace(lo, hi, int(bins) + 1)
    edges = np.asarray(bins, dtype=float)
    if len(edges) < 3 or np.any(np.diff(edges) <= 0):
        raise ProfileError("Bin edges must be strictly increasing with at least 2 bins")
    return edges


def _finish(edges, counts, normalization, smooth, off_guide, lost):
    if normalization not in ("counts", "density"):
        raise ProfileError(f"Unknown normalization '{normalization}'")
    values = counts.astype(float)
    if normalization == "density" and counts.sum() > 0:
        values = values / (counts.sum() * np.diff(edges))
    if smooth:
        values = gaussian_filter1d(values, sigma=1.0, mode="constant")
    return Profile1D(edges=edges, counts=counts, values=values, normalization=normalization,
                     off_guide=off_guide, lost=lost, empty=counts.sum() == 0)


def density_profile(snapshot, path: GuidePath, bins=100, value_range=None, tube_radius: float = math.inf,
                    normalization: str = "counts", smooth: bool = False) -> Profile1D:
    """Histogram of arclength over alive, on-guide particles."""
    pos, _, lost = _split_snapshot(snapshot)
    edges = _edges(bins, value_range or (0.0, path.length))
    if len(pos) == 0:
        return _finish(edges, np.zeros(len(edges) - 1, dtype=int), normalization, smooth, 0, lost)
    s, _, _ = project_arclength(pos, path, tube_radius)
    on = np.isfinite(s)
    counts, _ = np.histogram(s[on], bins=edges)
    return _finish(edges, counts, normalization, smooth, int((~on).sum()), lost)


def velocity_profile(snapshot, path: GuidePath, bins=60, value_range=None, tube_radius: float = math.inf,
                     normalization: str = "counts", smooth: bool = False) -> Profile1D:
    """Histogram of the velocity component along the local path tangent."""
    pos, vel, lost = _split_snapshot(snapshot)
    if len(pos) == 0:
        edges = _edges(bins, value_range or (-1.0, 1.0))
        return _finish(edges, np.zeros(len(edges) - 1, dtype=int), normalization, smooth, 0, lost)
    s, _, seg = project_arclength(pos, path, tube_radius)
    on = np.isfinite(s)
    tangents = path.segment_tangents()[seg]
    vt = np.einsum("ij,ij->i", vel, tangents)[on]
    if value_range is None:
        reach = float(np.max(np.abs(vt))) * 1.05 if len(vt) else 0.0
        reach = reach if reach > 0 else 1e-3
        value_range = (-reach, reach)
    edges = _edges(bins, value_range)
    counts, _ = np.histogram(vt, bins=edges)
    return _finish(edges, counts, normalization, smooth, int((~on).sum()), lost)


def profile_moments(profile: Profile1D) -> Tuple[float, float]:
    """Mean and second central moment of the raw counts."""
    total = profile.counts.sum()
    if total == 0:
        raise ProfileError("Moments of an empty profile are undefined")
    c = profile.centers
    mean = float((profile.counts * c).sum() / total)
    var = float((profile.counts * (c - mean) ** 2).sum() / total)
    return mean, var


def find_modes(profile: Profile1D, smooth_sigma: float = 1.0, min_fraction: float = 0.1) -> List[Mode]:
    """Peaks of the (smoothed) profile with full widths at half maximum, in value units."""
    values = profile.counts.astype(float)
    if smooth_sigma > 0:
        values = gaussian_filter1d(values, sigma=smooth_sigma, mode="constant")
    if values.max() <= 0:
        return []
    padded = np.concatenate([[0.0], values, [0.0]])
    peaks, _ = find_peaks(padded, prominence=min_fraction * values.max())
    if len(peaks) == 0:
        return []
    widths, _, _, _ = peak_widths(padded, peaks, rel_height=0.5)
    step = float(np.mean(np.diff(profile.edges)))
    centers = profile.centers
    return [Mode(center=float(centers[p - 1]), height=float(values[p - 1]), width=float(w * step))
            for p, w in zip(peaks, widths)]


def _series(series):
    t, n = series
    t = np.asarray(t, dtype=float)
    n = np.asarray(n, dtype=float)
    if t.shape != n.shape:
        raise FitError("Time and count series differ in length")
    return t, n


def fit_lifetime(series, window: Tuple[float, float] = (0.3, math.inf)) -> LifetimeFit:
    """Single exponential N0*exp(-t/tau) by least squares on log counts inside window."""
    t, n = _series(series)
    lo, hi = window
    if len(t) == 0 or lo > t.max():
        raise FitError(f"Fit window [{lo:g}, {hi:g}] s lies outside the data range")
    sel = (t >= lo) & (t <= hi)
    if sel.sum() < 4:
        raise FitError(f"Need at least 4 points in the fit window, got {int(sel.sum())}")
    ts, ns = t[sel], n[sel]
    if np.any(ns <= 0):
        raise FitError("Counts in the fit window must be positive")
    y = np.log(ns)
    slope, intercept = np.polyfit(ts, y, 1)
    if not slope < 0:
        raise FitError("Degenerate data: counts do not decay inside the fit window")
    resid = y - (slope * ts + intercept)
    return LifetimeFit(tau=float(-1.0 / slope), N0=float(math.exp(intercept)),
                       residual=float(np.sqrt(np.mean(resid ** 2))),
                       window=(float(ts.min()), float(ts.max())), points=int(sel.sum()))


def fit_two_window(series, split: float = 0.3) -> Tuple[Optional[LifetimeFit], LifetimeFit]:
    """Separate fits before and after split; the early fit is None when it cannot be made."""
    try:
        early = fit_lifetime(series, (0.0, split))
        early.model = "early"
    except FitError:
        early = None
    late = fit_lifetime(series, (split, math.inf))
    late.model = "late"
    return early, late


def early_loss_fraction(series, horizon: float = 0.1) -> float:
    """Fraction of the initial population lost by t = horizon."""
    t, n = _series(series)
    if len(t) == 0 or n[0] <= 0:
        raise FitError("Series needs a positive initial count")
    return float(1.0 - np.interp(horizon, t, n) / n[0])


@dataclass
class BootstrapResult:
    tau: float
    stderr: float
    draws: int
    samples: np.ndarray = field(default_factory=lambda: np.zeros(0))


def bootstrap_tau(series, window: Tuple[float, float] = (0.3, math.inf), draws: int = 200,
                  seed: int = 0) -> BootstrapResult:
    """Standard error of tau from resampling (t, N) pairs with replacement."""
    t, n = _series(series)
    fit = fit_lifetime((t, n), window)
    sel = (t >= window[0]) & (t <= window[1])
    ts, ns = t[sel], n[sel]
    rng = np.random.Generator(np.random.Philox(seed))
    taus = []
    for _ in range(draws):
        pick = rng.integers(0, len(ts), len(ts))
        if len(np.unique(ts[pick])) < 4:
            continue
        try:
            taus.append(fit_lifetime((ts[pick], ns[pick]), (-math.inf, math.inf)).tau)
        except FitError:
            continue
    taus = np.array(taus)
    if len(taus) < 2:
        raise FitError("Bootstrap produced fewer than 2 valid fits")
    return BootstrapResult(tau=fit.tau, stderr=float(taus.std(ddof=1)), draws=len(taus), samples=taus)
