"""Rate maps, spatial autocorrelograms and gridness scores.

Arrays are indexed ``[i, j]`` with ``i`` along x and ``j`` along y.  Missing
values are NaN throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, signal

from .errors import InsufficientDataError, InvalidInputError

N_MIN_OVERLAP = 20
MIN_RING_PIXELS = 8
HEX_ANGLES = (30, 60, 90, 120, 150)
SQUARE_ANGLES = (45, 90, 135)
ALL_ANGLES = (30, 45, 60, 90, 120, 135, 150)


@dataclass
class RateMap:
    bins: np.ndarray
    visit_time: np.ndarray
    bin_size: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=float)
        self.visit_time = np.asarray(self.visit_time, dtype=float)
        if self.bins.shape != self.visit_time.shape or self.bins.ndim != 2:
            raise InvalidInputError("bins and visit_time must be 2-D arrays of equal shape")

    @property
    def visited(self) -> np.ndarray:
        return self.visit_time > 0


@dataclass
class Autocorrelogram:
    values: np.ndarray  # shape (2*nx - 1, 2*ny - 1)

    @property
    def center_index(self) -> tuple[int, int]:
        return (self.values.shape[0] // 2, self.values.shape[1] // 2)

    def at(self, dx: int, dy: int) -> float:
        cx, cy = self.center_index
        return float(self.values[cx + dx, cy + dy])

    @property
    def half_extent(self) -> int:
        return min(self.values.shape) // 2


@dataclass(frozen=True)
class AnnulusSpec:
    r_min: float
    r_max: float

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise InvalidInputError(f"annulus needs 0 < r_min < r_max, got ({self.r_min}, {self.r_max})")


@dataclass
class GridnessReport:
    g60: float
    g90: float
    best_annulus_60: AnnulusSpec
    best_annulus_90: AnnulusSpec
    ring_correlations: dict[int, float] = field(default_factory=dict)


def build_rate_map(positions, dwell, activations, arena, bin_size: float) -> RateMap:
    """Occupancy-normalised rate map: summed activation over summed dwell time.

    ``arena`` is ``(xmin, xmax, ymin, ymax)``.  Samples outside it are dropped;
    a sample lying exactly on the upper edge goes into the last bin.
    """
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    dwell = np.asarray(dwell, dtype=float).reshape(-1)
    activations = np.asarray(activations, dtype=float).reshape(-1)
    if len(positions) == 0:
        raise InvalidInputError("empty trajectory")
    if not (len(positions) == len(dwell) == len(activations)):
        raise InvalidInputError("trajectory, dwell and activations differ in length")
    if not bin_size > 0:
        raise InvalidInputError("bin_size must be positive")
    if np.any(dwell < 0):
        raise InvalidInputError("dwell times must be non-negative")
    xmin, xmax, ymin, ymax = (float(v) for v in arena)
    nx = max(1, int(math.ceil((xmax - xmin) / bin_size - 1e-9)))
    ny = max(1, int(math.ceil((ymax - ymin) / bin_size - 1e-9)))

    ix = np.floor((positions[:, 0] - xmin) / bin_size).astype(int)
    iy = np.floor((positions[:, 1] - ymin) / bin_size).astype(int)
    ix[positions[:, 0] == xmax] = nx - 1
    iy[positions[:, 1] == ymax] = ny - 1
    inside = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)

    total = np.zeros((nx, ny))
    occupancy = np.zeros((nx, ny))
    np.add.at(total, (ix[inside], iy[inside]), activations[inside])
    np.add.at(occupancy, (ix[inside], iy[inside]), dwell[inside])
    with np.errstate(invalid="ignore", divide="ignore"):
        rate = np.where(occupancy > 0, total / np.where(occupancy > 0, occupancy, 1.0), np.nan)
    return RateMap(rate, occupancy, bin_size, (xmin, ymin))


def sample_rate_map(fn, n_bins: int, extent: float, origin=(0.0, 0.0)) -> RateMap:
    """Fully visited rate map holding ``fn`` evaluated at bin centres."""
    bin_size = extent / n_bins
    ticks = (np.arange(n_bins) + 0.5) * bin_size
    xx, yy = np.meshgrid(origin[0] + ticks, origin[1] + ticks, indexing="ij")
    values = np.asarray(fn(np.stack([xx, yy], axis=-1)), dtype=float)
    return RateMap(values, np.ones_like(values), bin_size, tuple(origin))


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = max(1, int(math.ceil(4 * sigma)))
    t = np.arange(-radius, radius + 1)
    g = np.exp(-(t**2) / (2 * sigma**2))
    return np.outer(g, g) / g.sum() ** 2


def smooth_rate_map(m: RateMap, sigma_bins: float = 1.0) -> RateMap:
    """Gaussian blur that ignores missing bins and renormalises the kernel."""
    if sigma_bins < 0:
        raise InvalidInputError("sigma_bins must be non-negative")
    if sigma_bins == 0:
        return RateMap(m.bins.copy(), m.visit_time.copy(), m.bin_size, m.origin)
    valid = ~np.isnan(m.bins)
    k = _gaussian_kernel(sigma_bins)
    num = ndimage.correlate(np.where(valid, m.bins, 0.0), k, mode="constant", cval=0.0)
    den = ndimage.correlate(valid.astype(float), k, mode="constant", cval=0.0)
    out = np.full_like(m.bins, np.nan)
    out[valid] = num[valid] / den[valid]
    return RateMap(out, m.visit_time.copy(), m.bin_size, m.origin)


def _xcorr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # out[d + n - 1] = sum_i a[i] * b[i + d]
    return signal.correlate(b, a, mode="full", method="fft")


def spatial_autocorrelogram(m: RateMap, n_min: int = N_MIN_OVERLAP) -> Autocorrelogram:
    """Pearson correlation of the map with each shifted copy of itself.

    Means and standard deviations are recomputed over the overlapping valid
    bins of every shift.  Offsets with fewer than ``n_min`` overlapping bins,
    or with zero variance on either side, are missing.
    """
    valid = ~np.isnan(m.bins)
    if valid.sum() < 2:
        raise InsufficientDataError("rate map needs at least two visited bins")
    # Pearson is shift-invariant; centring first keeps the FFT sums well conditioned.
    x = np.where(valid, m.bins - m.bins[valid].mean(), 0.0)
    w = valid.astype(float)
    n = np.rint(_xcorr(w, w))
    s1 = _xcorr(x, w)
    s2 = _xcorr(w, x)
    s11 = _xcorr(x * x, w)
    s22 = _xcorr(w, x * x)
    s12 = _xcorr(x, x)

    with np.errstate(invalid="ignore", divide="ignore"):
        safe_n = np.where(n > 0, n, 1.0)
        cov = s12 - s1 * s2 / safe_n
        v1 = s11 - s1 * s1 / safe_n
        v2 = s22 - s2 * s2 / safe_n
        scale = float(np.max(x * x)) if np.any(x) else 0.0
        tol = 1e-10 * max(scale, 1e-300) * safe_n
        r = cov / np.sqrt(np.clip(v1, 0, None) * np.clip(v2, 0, None))
    cx, cy = valid.shape[0] - 1, valid.shape[1] - 1
    defined = (n >= n_min) & (v1 > tol) & (v2 > tol)
    center_ok = v1[cx, cy] > tol[cx, cy]
    r = np.where(defined, np.clip(r, -1.0, 1.0), np.nan)
    r = 0.5 * (r + r[::-1, ::-1])
    r[cx, cy] = 1.0 if center_ok else np.nan
    return Autocorrelogram(r)


def _bilinear(img: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Sample at fractional array coordinates; NaN if any contributing pixel is missing."""
    snap_x = np.abs(px - np.rint(px)) < 1e-9
    snap_y = np.abs(py - np.rint(py)) < 1e-9
    px = np.where(snap_x, np.rint(px), px)
    py = np.where(snap_y, np.rint(py), py)
    x0 = np.floor(px).astype(int)
    y0 = np.floor(py).astype(int)
    fx = px - x0
    fy = py - y0
    nx, ny = img.shape
    out = np.zeros(px.shape)
    ok = np.ones(px.shape, dtype=bool)
    for ddx, wx in ((0, 1 - fx), (1, fx)):
        for ddy, wy in ((0, 1 - fy), (1, fy)):
            wgt = wx * wy
            xi, yi = x0 + ddx, y0 + ddy
            used = wgt > 0
            inb = (xi >= 0) & (xi < nx) & (yi >= 0) & (yi < ny)
            vals = np.full(px.shape, np.nan)
            vals[inb] = img[xi[inb], yi[inb]]
            bad = used & (~inb | np.isnan(vals))
            ok &= ~bad
            out += np.where(used & ~bad, wgt * np.nan_to_num(vals), 0.0)
    return np.where(ok, out, np.nan)


class _RingSampler:
    """Caches the SAC pixels within the half extent and their rotated copies."""

    def __init__(self, sac: Autocorrelogram):
        self.sac = sac
        cx, cy = sac.center_index
        h = sac.half_extent
        dx, dy = np.meshgrid(np.arange(-h, h + 1), np.arange(-h, h + 1), indexing="ij")
        radius = np.hypot(dx, dy)
        keep = radius <= h
        self.dx = dx[keep].astype(float)
        self.dy = dy[keep].astype(float)
        self.radius = radius[keep]
        self.values = sac.values[cx + dx[keep], cy + dy[keep]]
        self._rotated: dict[float, np.ndarray] = {}

    def rotated(self, angle_deg: float) -> np.ndarray:
        if angle_deg not in self._rotated:
            th = math.radians(angle_deg)
            c, s = math.cos(th), math.sin(th)
            cx, cy = self.sac.center_index
            rx = c * self.dx - s * self.dy
            ry = s * self.dx + c * self.dy
            self._rotated[angle_deg] = _bilinear(self.sac.values, rx + cx, ry + cy)
        return self._rotated[angle_deg]

    def check(self, annulus: AnnulusSpec):
        if annulus.r_max > self.sac.half_extent:
            raise InvalidInputError(f"r_max {annulus.r_max} exceeds SAC half extent {self.sac.half_extent}")

    def ring_mask(self, annulus: AnnulusSpec) -> np.ndarray:
        return (self.radius >= annulus.r_min) & (self.radius <= annulus.r_max)

    def correlation(self, ring: np.ndarray, angle_deg: float) -> float:
        s = self.values
        st = self.rotated(angle_deg)
        use = ring & ~np.isnan(s) & ~np.isnan(st)
        if use.sum() < MIN_RING_PIXELS:
            raise InsufficientDataError(f"annulus has {int(use.sum())} valid pixels, need {MIN_RING_PIXELS}")
        a = s[use]
        b = st[use]
        mean = a.mean()
        den = float(np.sum((a - mean) ** 2))
        if den <= 1e-300:
            raise InsufficientDataError("SAC is constant on the annulus")
        return float(np.sum((a - mean) * (b - mean)) / den)


def ring_correlation(sac: Autocorrelogram, annulus: AnnulusSpec, angle: float) -> float:
    """Correlation between the annulus and its copy rotated by ``angle`` degrees."""
    sampler = _RingSampler(sac)
    sampler.check(annulus)
    return sampler.correlation(sampler.ring_mask(annulus), angle)


def _g60(c: dict) -> float:
    return (c[60] + c[120]) / 2.0 - (c[30] + c[90] + c[150]) / 3.0


def _g90(c: dict) -> float:
    return c[90] - (c[45] + c[135]) / 2.0


def _correlations(sampler: _RingSampler, annulus: AnnulusSpec, angles) -> dict[int, float]:
    ring = sampler.ring_mask(annulus)
    return {a: sampler.correlation(ring, a) for a in angles}


def gridness_60(sac: Autocorrelogram, annulus: AnnulusSpec) -> float:
    sampler = _RingSampler(sac)
    sampler.check(annulus)
    return _g60(_correlations(sampler, annulus, HEX_ANGLES))


def gridness_90(sac: Autocorrelogram, annulus: AnnulusSpec) -> float:
    sampler = _RingSampler(sac)
    sampler.check(annulus)
    return _g90(_correlations(sampler, annulus, SQUARE_ANGLES))


def annulus_search_set(sac: Autocorrelogram, r_min_values=range(2, 7), min_width: int = 3) -> list[AnnulusSpec]:
    h = sac.half_extent
    return [AnnulusSpec(r0, r1) for r0 in r_min_values for r1 in range(r0 + min_width, h + 1)]


def best_gridness(sac: Autocorrelogram, annuli: list[AnnulusSpec] | None = None) -> GridnessReport:
    """Maximise G60 and, separately, G90 over a set of annuli.

    Annuli without enough valid pixels for every angle are skipped.
    """
    sampler = _RingSampler(sac)
    annuli = annulus_search_set(sac) if annuli is None else annuli
    best60 = best90 = None
    for ann in annuli:
        sampler.check(ann)
        try:
            c = _correlations(sampler, ann, ALL_ANGLES)
        except InsufficientDataError:
            continue
        g60, g90 = _g60(c), _g90(c)
        if best60 is None or g60 > best60[0]:
            best60 = (g60, ann, c)
        if best90 is None or g90 > best90[0]:
            best90 = (g90, ann)
    if best60 is None:
        raise InsufficientDataError("no annulus had enough valid SAC pixels")
    return GridnessReport(best60[0], best90[0], best60[1], best90[1], dict(best60[2]))


def radial_profile(sac: Autocorrelogram) -> tuple[np.ndarray, np.ndarray]:
    """Mean SAC value per integer radius (NaN-aware)."""
    sampler = _RingSampler(sac)
    rbin = np.rint(sampler.radius).astype(int)
    ok = ~np.isnan(sampler.values)
    sums = np.bincount(rbin[ok], weights=sampler.values[ok], minlength=rbin.max() + 1)
    counts = np.bincount(rbin[ok], minlength=rbin.max() + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        prof = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return np.arange(len(prof)), prof
