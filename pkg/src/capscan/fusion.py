"""Amplitude-phase image fusion: min-max normalization, the Delta and Xi
operators and their sign-flipped variants, plus thresholding and margin
cropping.

All operators are elementwise and affine-invariant end to end: rescaling
the raw R or phi image by any positive-affine map before normalization
leaves Delta unchanged and Xi unchanged up to float rounding of the
division guard.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRangeError, DimensionMismatchError
from .scanner import ScanImage

FUSION_MODES = ("delta", "xi", "delta_prime", "xi_prime")

_MODE_CHANNEL = {"delta": "DELTA", "xi": "XI",
                 "delta_prime": "DELTA_P", "xi_prime": "XI_P"}


@dataclass(frozen=True)
class FusionConfig:
    """Which fusion operator to apply and how to guard the Xi division."""

    mode: str = "delta"
    xi_guard: float = 1e-3
    renormalize_output: bool = True

    def __post_init__(self):
        if self.mode not in FUSION_MODES:
            raise ValueError(f"unknown fusion mode {self.mode!r}")
        if self.mode in ("xi", "xi_prime") and self.xi_guard <= 0:
            raise ValueError("xi_guard must be positive for Xi modes")
        if self.xi_guard < 0:
            raise ValueError("xi_guard must be >= 0")

    def xi_mode(self) -> str:
        """Xi variant with the same phase orientation as the configured mode."""
        return "xi_prime" if self.mode in ("delta_prime", "xi_prime") else "xi"

    def delta_mode(self) -> str:
        return "delta_prime" if self.mode in ("delta_prime", "xi_prime") else "delta"


def _check_same_shape(a: ScanImage, b: ScanImage):
    if a.values.shape != b.values.shape:
        raise DimensionMismatchError(
            f"image shapes differ: {a.values.shape} vs {b.values.shape}")


def _minmax(v: np.ndarray) -> np.ndarray:
    lo = v.min()
    hi = v.max()
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise DegenerateRangeError("image contains non-finite values")
    if hi == lo:
        raise DegenerateRangeError("constant image has no range to normalize")
    return (v - lo) / (hi - lo)


def minmax_normalize(img: ScanImage) -> ScanImage:
    """Affine rescale to [0, 1]; min maps to 0 and max to 1.

    Raises DegenerateRangeError for a constant image rather than emitting
    NaN; the caller decides what a flat image should mean.
    """
    return img.with_values(_minmax(img.values),
                           channel=img.channel + "_NORM"
                           if not img.channel.endswith("_NORM") else img.channel,
                           units="1")


def center_phase(img: ScanImage) -> ScanImage:
    """Rotate phases so their circular mean is zero, then treat linearly.

    Raw lock-in phases live on the circle and may straddle the +-pi cut;
    shifting the circular mean to 0 makes min-max normalization meaningful
    for the small phase spreads the loss model produces.  Documented
    limitation: spreads approaching +-pi stay ambiguous.
    """
    v = img.values
    mean_angle = np.angle(np.mean(np.exp(1j * v)))
    centered = np.angle(np.exp(1j * (v - mean_angle)))
    return img.with_values(centered)


def fuse_delta(r_norm: ScanImage, phi_norm: ScanImage) -> ScanImage:
    """Delta(i,j) = phi_norm * (1 - r_norm); range [0, 1] by construction."""
    _check_same_shape(r_norm, phi_norm)
    return r_norm.with_values(phi_norm.values * (1.0 - r_norm.values),
                              channel="DELTA", units="1")


def fuse_delta_prime(r_norm: ScanImage, phi_norm: ScanImage) -> ScanImage:
    """Delta variant for a sign-flipped phase chain: (1 - phi_norm) * (1 - r_norm)."""
    _check_same_shape(r_norm, phi_norm)
    return r_norm.with_values((1.0 - phi_norm.values) * (1.0 - r_norm.values),
                              channel="DELTA_P", units="1")


def fuse_xi(r_norm: ScanImage, phi_norm: ScanImage, xi_guard: float = 1e-3,
            renormalize: bool = True) -> ScanImage:
    """Xi(i,j) = phi_norm / (r_norm + guard).

    The additive guard bounds the division at the pixel where min-max
    normalization puts r_norm = 0 while preserving ordering; with
    renormalize the output is min-max rescaled back to [0, 1].
    """
    _check_same_shape(r_norm, phi_norm)
    if xi_guard < 0:
        raise ValueError("xi_guard must be >= 0")
    if xi_guard == 0.0 and r_norm.values.min() <= 0.0:
        raise DegenerateRangeError("xi_guard = 0 requires min(r_norm) > 0")
    vals = phi_norm.values / (r_norm.values + xi_guard)
    if renormalize:
        vals = _minmax(vals)
    return r_norm.with_values(vals, channel="XI", units="1")


def fuse_xi_prime(r_norm: ScanImage, phi_norm: ScanImage, xi_guard: float = 1e-3,
                  renormalize: bool = True) -> ScanImage:
    """Xi variant for a sign-flipped phase chain: (1 - phi_norm) / (r_norm + guard)."""
    flipped = phi_norm.with_values(1.0 - phi_norm.values)
    out = fuse_xi(r_norm, flipped, xi_guard, renormalize)
    return out.with_values(out.values, channel="XI_P")


def fuse(r_norm: ScanImage, phi_norm: ScanImage, config: FusionConfig) -> ScanImage:
    """Apply the configured fusion operator."""
    if config.mode == "delta":
        return fuse_delta(r_norm, phi_norm)
    if config.mode == "delta_prime":
        return fuse_delta_prime(r_norm, phi_norm)
    if config.mode == "xi":
        return fuse_xi(r_norm, phi_norm, config.xi_guard, config.renormalize_output)
    return fuse_xi_prime(r_norm, phi_norm, config.xi_guard, config.renormalize_output)


def fuse_scan(r_img: ScanImage, phi_img: ScanImage, config: FusionConfig) -> ScanImage:
    """Full pipeline from raw R and phi images: center phase, normalize, fuse."""
    r_norm = minmax_normalize(r_img)
    phi_norm = minmax_normalize(center_phase(phi_img))
    return fuse(r_norm, phi_norm, config)


def crop_margin(img: ScanImage, margin_px: int) -> ScanImage:
    """Drop margin_px pixels from every image edge; offsets updated.

    Note crop and normalize do not commute in general (the extrema may sit
    in the margin), so crop placement in a pipeline is a deliberate choice.
    """
    if margin_px < 0:
        raise ValueError("margin must be >= 0")
    if margin_px == 0:
        return img.with_values(img.values.copy())
    ny, nx = img.values.shape
    if 2 * margin_px >= ny or 2 * margin_px >= nx:
        raise DimensionMismatchError(
            f"margin {margin_px} px leaves no interior in a {ny}x{nx} image")
    out = ScanImage(img.channel,
                    img.values[margin_px:ny - margin_px, margin_px:nx - margin_px],
                    img.dx, img.dy,
                    img.x0 + margin_px * img.dx, img.y0 + margin_px * img.dy,
                    img.units, img.plan)
    return out


def threshold(img: ScanImage, t: float) -> ScanImage:
    """Binary mask: 1 where img >= t, else 0."""
    if not np.isfinite(t):
        raise ValueError("threshold must be finite")
    return img.with_values((img.values >= t).astype(float),
                           channel="MASK", units="1")
