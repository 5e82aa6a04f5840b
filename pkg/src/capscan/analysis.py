"""Quantitative scan evaluation: line profiles, per-defect peak extraction,
linear fits with RMSE, and SNR estimates."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import BoundsError, DegenerateRangeError, DimensionMismatchError
from .geometry import SampleSpec
from .scanner import ScanImage, ScanPlan


@dataclass
class LineProfile:
    """Values sampled along a line, positions in meters along the line."""

    positions: np.ndarray
    values: np.ndarray
    channel: str

    def __post_init__(self):
        if len(self.positions) != len(self.values) or len(self.positions) < 2:
            raise DimensionMismatchError("profile needs >= 2 matched samples")
        if not np.all(np.diff(self.positions) > 0):
            raise ValueError("profile positions must be strictly increasing")


@dataclass(frozen=True)
class FitResult:
    """Ordinary least squares line y = slope * x + intercept."""

    slope: float
    intercept: float
    rmse: float          # sqrt(mean squared residual), 1/n convention
    n_points: int


@dataclass
class DefectPeak:
    value: float
    pixel: tuple[int, int]               # (row, col)
    position: tuple[float, float]        # meters
    localization_error: float | None = None


@dataclass
class DefectReport:
    peaks: list[DefectPeak]

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.peaks])


def line_profile(img: ScanImage, row: int | None = None,
                 endpoints=None) -> LineProfile:
    """Profile along an image row, or along a segment via nearest pixels.

    endpoints is a ((x_a, y_a), (x_b, y_b)) pair in meters; sampling steps
    once per pixel along the dominant axis, positions measured as distance
    along the segment.
    """
    if (row is None) == (endpoints is None):
        raise ValueError("give exactly one of row or endpoints")
    if row is not None:
        if not 0 <= row < img.ny:
            raise BoundsError(f"row {row} outside image of {img.ny} rows")
        positions = img.x0 + np.arange(img.nx) * img.dx
        return LineProfile(positions, img.values[row].copy(), img.channel)
    (xa, ya), (xb, yb) = endpoints
    ca, ra = (xa - img.x0) / img.dx, (ya - img.y0) / img.dy
    cb, rb = (xb - img.x0) / img.dx, (yb - img.y0) / img.dy
    n = int(max(abs(cb - ca), abs(rb - ra))) + 1
    if n < 2:
        raise BoundsError("endpoints collapse to a single pixel")
    cc = np.rint(np.linspace(ca, cb, n)).astype(int)
    rr = np.rint(np.linspace(ra, rb, n)).astype(int)
    if cc.min() < 0 or rr.min() < 0 or cc.max() >= img.nx or rr.max() >= img.ny:
        raise BoundsError("line leaves the image")
    length = math.hypot(xb - xa, yb - ya)
    positions = np.linspace(0.0, length, n)
    return LineProfile(positions, img.values[rr, cc], img.channel)


def dilate_mask(mask: np.ndarray, px: int) -> np.ndarray:
    """Grow a footprint by px pixels (Chebyshev / 8-connected)."""
    if px <= 0:
        return mask
    return ndimage.binary_dilation(mask, structure=np.ones((3, 3), bool),
                                   iterations=px)


def peaks_per_defect(img: ScanImage, footprints, dilate_px: int = 0,
                     true_centers=None) -> DefectReport:
    """Maximum value and its location inside each dilated footprint."""
    peaks = []
    for n, fp in enumerate(footprints):
        fp = np.asarray(fp, dtype=bool)
        if fp.shape != img.values.shape:
            raise DimensionMismatchError(f"footprint {n} shape {fp.shape} "
                                         f"!= image {img.values.shape}")
        if not fp.any():
            raise BoundsError(f"footprint {n} is empty")
        region = dilate_mask(fp, dilate_px)
        masked = np.where(region, img.values, -np.inf)
        flat = int(np.argmax(masked))
        r, c = np.unravel_index(flat, img.values.shape)
        pos = (img.x0 + c * img.dx, img.y0 + r * img.dy)
        err = None
        if true_centers is not None:
            tx, ty = true_centers[n]
            err = math.hypot(pos[0] - tx, pos[1] - ty)
        peaks.append(DefectPeak(float(img.values[r, c]), (int(r), int(c)), pos, err))
    return DefectReport(peaks)


def linear_fit(x, y) -> FitResult:
    """OLS fit; rmse uses the 1/n convention (not 1/(n-2))."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise DimensionMismatchError("need matched 1D arrays of length >= 2")
    if np.ptp(x) == 0.0:
        raise DegenerateRangeError("x values are all equal; fit is degenerate")
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    return FitResult(slope=float(coef[0]), intercept=float(coef[1]),
                     rmse=float(np.sqrt(np.mean(resid ** 2))), n_points=len(x))


def normalize_peaks(values) -> np.ndarray:
    """Min-max normalize a peak set before fitting (normalized-amplitude axis)."""
    v = np.asarray(values, dtype=float)
    rng = v.max() - v.min()
    if rng == 0.0:
        raise DegenerateRangeError("peak set is constant; cannot normalize")
    return (v - v.min()) / rng


def compare_channels(img_a: ScanImage, img_b: ScanImage, footprints, depths,
                     dilate_px: int = 0) -> tuple[FitResult, FitResult]:
    """Per-defect normalized peaks of both channels fitted against depth.

    Returns (fit_a, fit_b) for a side-by-side RMSE comparison.
    """
    if img_a.values.shape != img_b.values.shape:
        raise DimensionMismatchError("channel images differ in shape")
    depths = np.asarray(depths, dtype=float)
    if len(depths) != len(footprints):
        raise DimensionMismatchError("need one depth per footprint")
    fits = []
    for img in (img_a, img_b):
        pk = peaks_per_defect(img, footprints, dilate_px).values
        fits.append(linear_fit(depths, normalize_peaks(pk)))
    return fits[0], fits[1]


def snr_db(img: ScanImage, signal_region, background_region) -> float:
    """20 log10(|mean(signal) - mean(background)| / std(background)).

    Zero background spread yields an infinite sentinel (+inf, or -inf when
    the means also coincide) and a warning rather than an exception.
    """
    sig = np.asarray(signal_region, dtype=bool)
    bg = np.asarray(background_region, dtype=bool)
    if not sig.any() or not bg.any():
        raise BoundsError("signal and background regions must be non-empty")
    if (sig & bg).any():
        raise BoundsError("signal and background regions overlap")
    diff = abs(float(img.values[sig].mean()) - float(img.values[bg].mean()))
    spread = float(img.values[bg].std())
    if spread == 0.0:
        warnings.warn("background has zero spread; SNR is an infinite sentinel")
        return math.inf if diff > 0 else -math.inf
    if diff == 0.0:
        return -math.inf
    return 20.0 * math.log10(diff / spread)


def _pixel_grid(geom) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-center coordinate grids for a ScanPlan or ScanImage."""
    if isinstance(geom, ScanPlan):
        xs, ys = geom.x_positions(), geom.y_positions()
    else:
        xs = geom.x0 + np.arange(geom.nx) * geom.dx
        ys = geom.y0 + np.arange(geom.ny) * geom.dy
    return np.meshgrid(xs, ys)          # shape (ny, nx) to match images


def defect_footprints(sample: SampleSpec, geom) -> list[np.ndarray]:
    """Scan-pixel masks of each defect's lateral footprint.

    geom is the ScanPlan or any ScanImage (cropped images carry shifted
    offsets, so footprints follow the crop).
    """
    X, Y = _pixel_grid(geom)
    out = []
    for d in sample.defects:
        lx, ly = d.lateral_extent()
        cx, cy = d.center
        if d.kind == "rect_void":
            m = (np.abs(X - cx) <= lx / 2) & (np.abs(Y - cy) <= ly / 2)
        else:
            m = ((X - cx) / (lx / 2)) ** 2 + ((Y - cy) / (ly / 2)) ** 2 <= 1.0
        out.append(m)
    return out


def voronoi_cells(geom, centers) -> list[np.ndarray]:
    """Partition scan pixels by nearest defect center (metric in meters)."""
    X, Y = _pixel_grid(geom)
    d2 = np.stack([(X - cx) ** 2 + (Y - cy) ** 2 for cx, cy in centers])
    label = np.argmin(d2, axis=0)
    return [label == k for k in range(len(centers))]
