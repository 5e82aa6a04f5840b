"""Binary PGM (P5) export: byte-exact, no compression ambiguity."""

from __future__ import annotations

import warnings

import numpy as np


def export_pgm(img, path, bit_depth: int = 8) -> None:
    """Write an image min-max mapped onto [0, maxval] as binary PGM.

    Accepts a ScanImage or a bare 2D array; matrix row 0 is the top image
    row.  A constant image maps to all zeros (degenerate range) with a
    warning.  Identical inputs produce byte-identical files.
    """
    values = np.asarray(getattr(img, "values", img), dtype=float)
    if values.ndim != 2:
        raise ValueError("PGM export needs a 2D image")
    if not np.all(np.isfinite(values)):
        raise ValueError("PGM export needs finite values")
    if bit_depth == 8:
        maxval, dtype = 255, np.dtype(">u1")
    elif bit_depth == 16:
        maxval, dtype = 65535, np.dtype(">u2")
    else:
        raise ValueError("bit_depth must be 8 or 16")
    lo = values.min()
    hi = values.max()
    if hi == lo:
        warnings.warn("constant image: PGM pixels all map to 0")
        scaled = np.zeros_like(values)
    else:
        scaled = (values - lo) / (hi - lo) * maxval
    pixels = np.clip(np.rint(scaled), 0, maxval).astype(dtype)
    h, w = values.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        f.write(pixels.tobytes())
