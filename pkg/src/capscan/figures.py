"""Matplotlib report figures written next to the delimited outputs.

Figures carry no timestamps (metadata Date stripped) so repeated runs
produce stable files; byte-exactness is only contractual for CSV/PGM.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SAVE_KW = dict(dpi=150, bbox_inches="tight", metadata={"Date": None})


def _extent(img):
    return (img.x0 - img.dx / 2, img.x0 + (img.nx - 0.5) * img.dx,
            img.y0 - img.dy / 2, img.y0 + (img.ny - 0.5) * img.dy)


def save_heatmap(img, path, title=None, cmap="viridis"):
    """Scan channel as a physical-coordinates heatmap."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    m = ax.imshow(img.values, origin="lower", extent=_extent(img), cmap=cmap,
                  aspect="equal")
    fig.colorbar(m, ax=ax, label=f"{img.channel} [{img.units}]")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(title or img.channel)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_profiles(profiles, path, title="Line profiles", normalized=True):
    """Overlay line profiles; each entry is (label, LineProfile)."""
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    for label, prof in profiles:
        v = prof.values
        if normalized and v.max() > v.min():
            v = (v - v.min()) / (v.max() - v.min())
        ax.plot(prof.positions, v, label=label)
    ax.set_xlabel("position along line [m]")
    ax.set_ylabel("normalized amplitude" if normalized else "amplitude")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_peak_fits(entries, depths, path, title="Peak amplitude vs defect depth"):
    """Normalized per-defect peaks with their linear fits.

    entries: list of (label, normalized_peaks, FitResult).
    """
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    depths = np.asarray(depths, dtype=float)
    ds = np.linspace(depths.min(), depths.max(), 50)
    for label, peaks, fit in entries:
        line, = ax.plot(depths, peaks, "o", label=f"{label} (RMSE {fit.rmse:.3f})")
        ax.plot(ds, fit.slope * ds + fit.intercept, "--", color=line.get_color())
    ax.set_xlabel("defect depth [m]")
    ax.set_ylabel("normalized peak amplitude")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_depth_profile(depths, sensitivities, path,
                       title="Sensitivity below the gap midpoint"):
    """Sensitivity magnitude vs depth, with the zero crossing visible."""
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    ax.plot(np.asarray(depths) * 1e3, sensitivities, "o-")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("depth below sample surface [mm]")
    ax.set_ylabel("d|q| / d eps' [C]")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
