"""Voxelized sample models and probe electrode rasterization.

Length unit is meters throughout.  The sample sits with its bottom face at
z = 0 and its top (probed) face at z = thickness; it is centered laterally
on the origin.  Grids are voxel-centered: voxel (i, j, k) has its center at
``origin + (i + 0.5, j + 0.5, k + 0.5) * h``.  A voxel belongs to a shape
when its center lies inside (center-in-shape rasterization), which makes
rasterization deterministic and exactly mirror-symmetric for symmetric
inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import BoundsError, GeometryError, ResolutionError

DEFECT_KINDS = ("flat_bottomed_hole", "rect_void", "ellipsoid_blob")
PROBE_KINDS = ("back_to_back", "concentric")
OUTER_KINDS = ("neumann", "dirichlet0")


@dataclass(frozen=True)
class DefectSpec:
    """One defect inside the sample.

    kind
        "flat_bottomed_hole": cylinder of diameter ``lateral_size`` milled
        from the back (z = 0) face, extending ``depth`` upward.
        "rect_void": rectangular pocket milled from the back face;
        ``lateral_size`` is a single edge length or an (lx, ly) pair.
        "ellipsoid_blob": ellipsoid with lateral diameter ``lateral_size``
        and vertical extent ``depth``, its top touching the probed face
        (an impact-damage analogue).
    fill_eps
        Complex relative permittivity of the defect interior. Voids use 1.
    """

    kind: str
    center: tuple[float, float]
    lateral_size: float | tuple[float, float]
    depth: float
    fill_eps: complex = 1.0 + 0.0j

    def __post_init__(self):
        if self.kind not in DEFECT_KINDS:
            raise GeometryError(f"unknown defect kind {self.kind!r}")
        if self.depth <= 0:
            raise GeometryError("defect depth must be positive")
        lx, ly = self.lateral_extent()
        if lx <= 0 or ly <= 0:
            raise GeometryError("defect lateral_size must be positive")
        if complex(self.fill_eps).real <= 0:
            raise GeometryError("Re(fill_eps) must be positive")

    def lateral_extent(self) -> tuple[float, float]:
        if isinstance(self.lateral_size, (tuple, list)):
            lx, ly = self.lateral_size
            return float(lx), float(ly)
        return float(self.lateral_size), float(self.lateral_size)


@dataclass(frozen=True)
class SampleSpec:
    """Slab sample: width along x, length along y, thickness along z."""

    width: float
    length: float
    thickness: float
    eps_r: complex
    defects: tuple[DefectSpec, ...] = ()

    def __post_init__(self):
        if min(self.width, self.length, self.thickness) <= 0:
            raise GeometryError("sample dimensions must be positive")
        eps = complex(self.eps_r)
        if eps.real < 1.0:
            raise GeometryError("Re(eps_r) must be >= 1")
        if eps.imag > 0.0:
            raise GeometryError("Im(eps_r) must be <= 0 (eps = eps' - j eps'')")
        object.__setattr__(self, "defects", tuple(self.defects))
        for n, d in enumerate(self.defects):
            if d.depth > self.thickness + 1e-12:
                raise BoundsError(f"defect {n}: depth {d.depth} exceeds thickness")
            lx, ly = d.lateral_extent()
            cx, cy = d.center
            if (abs(cx) + lx / 2 > self.width / 2 + 1e-12
                    or abs(cy) + ly / 2 > self.length / 2 + 1e-12):
                raise BoundsError(f"defect {n}: lateral extent outside sample bounds")

    def min_defect_feature(self) -> float | None:
        """Smallest defect dimension, for resolution checks."""
        sizes = []
        for d in self.defects:
            lx, ly = d.lateral_extent()
            sizes += [lx, ly, d.depth]
        return min(sizes) if sizes else None


@dataclass(frozen=True)
class Probe:
    """Coplanar electrode pair plus lift-off and in-plane orientation.

    back_to_back params: s (gap), b (plate width, across the main axis),
    h (plate length, along the main axis).  The two b-by-h rectangles sit
    at x in [-s/2 - h, -s/2] (drive) and [s/2, s/2 + h] (sense) in the
    probe frame.  Rotating the probe by pi swaps the two footprints.

    concentric params: R1 (drive disc radius), R2..R3 (sense annulus).
    """

    kind: str
    params: dict
    lift_off: float = 0.0
    orientation: float = 0.0

    def __post_init__(self):
        if self.kind not in PROBE_KINDS:
            raise GeometryError(f"unknown probe kind {self.kind!r}")
        if self.lift_off < 0:
            raise GeometryError("lift_off must be >= 0")

    def extent(self) -> tuple[float, float]:
        """Axis-aligned bounding box of the electrode footprints (probe frame)."""
        if self.kind == "back_to_back":
            ex = 2 * self.params["h"] + self.params["s"]
            ey = self.params["b"]
        else:
            ex = ey = 2 * self.params["r3"]
        if self.orientation != 0.0:
            c, s = abs(math.cos(self.orientation)), abs(math.sin(self.orientation))
            ex, ey = ex * c + ey * s, ex * s + ey * c
        return ex, ey

    def min_feature(self) -> float:
        if self.kind == "back_to_back":
            return min(self.params["s"], self.params["b"], self.params["h"])
        return min(self.params["r1"], self.params["r2"] - self.params["r1"],
                   self.params["r3"] - self.params["r2"])

    def footprints(self, x, y):
        """Drive and sense masks for probe-frame center coordinates x, y."""
        if self.orientation != 0.0:
            c, s = math.cos(-self.orientation), math.sin(-self.orientation)
            x, y = x * c - y * s, x * s + y * c
        if self.kind == "back_to_back":
            s_, b, h = self.params["s"], self.params["b"], self.params["h"]
            inside_y = np.abs(y) <= b / 2
            drive = (x >= -s_ / 2 - h) & (x <= -s_ / 2) & inside_y
            sense = (x >= s_ / 2) & (x <= s_ / 2 + h) & inside_y
        else:
            r2 = x * x + y * y
            drive = r2 <= self.params["r1"] ** 2
            sense = (r2 >= self.params["r2"] ** 2) & (r2 <= self.params["r3"] ** 2)
        return drive, sense

    def mirrored(self) -> "Probe":
        """Probe mirrored about the gap axis (drive and sense swap)."""
        return replace(self, orientation=self.orientation + math.pi)


def make_back_to_back(s: float, b: float, h: float,
                      lift_off: float = 0.0, orientation: float = 0.0) -> Probe:
    """Two coplanar b-by-h plates separated by gap s along the main axis."""
    if min(s, b, h) <= 0:
        raise GeometryError("back-to-back probe dimensions must be positive")
    return Probe("back_to_back", {"s": s, "b": b, "h": h}, lift_off, orientation)


def make_concentric(r1: float, r2: float, r3: float,
                    lift_off: float = 0.0, orientation: float = 0.0) -> Probe:
    """Inner drive disc of radius r1, sense annulus from r2 to r3."""
    if not (0 < r1 < r2 < r3):
        raise GeometryError("concentric probe requires 0 < R1 < R2 < R3")
    return Probe("concentric", {"r1": r1, "r2": r2, "r3": r3}, lift_off, orientation)


@dataclass
class PermittivityGrid:
    """Uniform voxel lattice of complex relative permittivity."""

    nx: int
    ny: int
    nz: int
    h: float
    eps: np.ndarray
    origin: tuple[float, float, float]
    sample_mask: np.ndarray | None = None

    def __post_init__(self):
        if self.eps.shape != (self.nx, self.ny, self.nz):
            raise GeometryError("eps array shape does not match voxel counts")
        if not np.all(np.isfinite(self.eps)):
            raise GeometryError("eps must be finite")
        if np.any(self.eps.real <= 0):
            raise GeometryError("Re(eps) must be positive everywhere")
        self.eps.flags.writeable = False
        if self.sample_mask is not None:
            self.sample_mask.flags.writeable = False

    def centers(self, axis: int) -> np.ndarray:
        n = (self.nx, self.ny, self.nz)[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.h


@dataclass
class BoundaryConditions:
    """Fixed-potential node sets and the outer boundary treatment.

    drive nodes hold the drive amplitude, sense and shield nodes hold 0
    (virtual ground).  outer is "neumann" (mirror) or "dirichlet0"
    (grounded box, the one-voxel border held at 0).
    """

    drive: np.ndarray
    sense: np.ndarray
    shield: np.ndarray
    outer: str = "neumann"

    def __post_init__(self):
        if self.outer not in OUTER_KINDS:
            raise GeometryError(f"unknown outer boundary {self.outer!r}")
        if not self.drive.any():
            raise GeometryError("drive node set is empty")
        if not self.sense.any():
            raise GeometryError("sense node set is empty")
        if (self.drive & self.sense).any() or (self.drive & self.shield).any() \
                or (self.sense & self.shield).any():
            raise GeometryError("drive, sense and shield node sets overlap")
        for a in (self.drive, self.sense, self.shield):
            a.flags.writeable = False

    def outer_mask(self) -> np.ndarray:
        """Border voxels held at 0 when outer == 'dirichlet0'."""
        m = np.zeros(self.drive.shape, dtype=bool)
        if self.outer == "dirichlet0":
            m[0, :, :] = m[-1, :, :] = True
            m[:, 0, :] = m[:, -1, :] = True
            m[:, :, 0] = m[:, :, -1] = True
            m &= ~(self.drive | self.sense | self.shield)
        return m

    def fixed_mask(self) -> np.ndarray:
        return self.drive | self.sense | self.shield | self.outer_mask()


def _normalize_padding(domain_padding) -> tuple[float, float, float]:
    if isinstance(domain_padding, (tuple, list)):
        lat, below, above = domain_padding
    else:
        lat = below = above = float(domain_padding)
    if min(lat, below, above) <= 0:
        raise GeometryError("domain padding must be positive")
    return float(lat), float(below), float(above)


def build_grid(sample: SampleSpec, probe: Probe, domain_padding,
               resolution: float, *, probe_center: tuple[float, float] = (0.0, 0.0),
               outer: str = "neumann", shield: bool = True,
               ) -> tuple[PermittivityGrid, BoundaryConditions]:
    """Rasterize sample and probe onto a probe-centered voxel grid.

    domain_padding is either a scalar (air margin on all sides) or a
    (lateral, below, above) triple.  resolution is voxels per meter.
    The electrode layer is the first voxel-center plane at or above
    sample top + lift_off; a grounded shield plane one voxel above it is
    added when shield is True.

    Raises ResolutionError when the gap or the smallest defect is resolved
    by fewer than 2 voxels.
    """
    h = 1.0 / float(resolution)
    feat = probe.min_feature()
    feat_name = "probe feature"
    dmin = sample.min_defect_feature()
    if dmin is not None and dmin < feat:
        feat, feat_name = dmin, "smallest defect"
    if feat / h < 2.0 - 1e-9:
        raise ResolutionError(
            f"{feat_name} ({feat:.4g} m) resolved by {feat / h:.2f} voxels; need >= 2")

    pad_lat, pad_below, pad_above = _normalize_padding(domain_padding)
    ex, ey = probe.extent()
    nx = int(math.ceil((ex + 2 * pad_lat) / h))
    ny = int(math.ceil((ey + 2 * pad_lat) / h))
    lift_vox = int(round(probe.lift_off / h))
    t_vox = int(round(sample.thickness / h))
    pad_b_vox = max(2, int(math.ceil(pad_below / h)))
    pad_a_vox = max(3, int(math.ceil(pad_above / h)))
    k_e = pad_b_vox + t_vox + lift_vox       # electrode voxel layer
    nz = k_e + 1 + pad_a_vox

    px, py = probe_center
    origin = (px - nx * h / 2, py - ny * h / 2, -pad_b_vox * h)
    xs = origin[0] + (np.arange(nx) + 0.5) * h
    ys = origin[1] + (np.arange(ny) + 0.5) * h
    zs = origin[2] + (np.arange(nz) + 0.5) * h
    X, Y = np.meshgrid(xs, ys, indexing="ij")

    eps = np.ones((nx, ny, nz), dtype=np.complex128)
    in_slab_xy = (np.abs(X) <= sample.width / 2) & (np.abs(Y) <= sample.length / 2)
    in_slab_z = (zs > 0) & (zs < sample.thickness)
    slab = in_slab_xy[:, :, None] & in_slab_z[None, None, :]
    eps[slab] = complex(sample.eps_r)

    sample_mask = slab.copy()
    for d in sample.defects:                 # later defects win on overlap
        dm = _defect_mask(d, X, Y, zs, sample.thickness) & slab
        eps[dm] = complex(d.fill_eps)

    drive2d, sense2d = probe.footprints(X - px, Y - py)
    drive = np.zeros((nx, ny, nz), dtype=bool)
    sense = np.zeros((nx, ny, nz), dtype=bool)
    shld = np.zeros((nx, ny, nz), dtype=bool)
    drive[:, :, k_e] = drive2d
    sense[:, :, k_e] = sense2d
    if shield:
        union = drive2d | sense2d
        bbox = _dilate_bbox(union, X, Y, h)
        shld[:, :, k_e + 1] = bbox

    grid = PermittivityGrid(nx, ny, nz, h, eps, origin, sample_mask=sample_mask)
    bc = BoundaryConditions(drive, sense, shld, outer=outer)
    return grid, bc


def _defect_mask(d: DefectSpec, X, Y, zs, thickness):
    lx, ly = d.lateral_extent()
    cx, cy = d.center
    if d.kind == "flat_bottomed_hole":
        lat = (X - cx) ** 2 + (Y - cy) ** 2 <= (lx / 2) ** 2
        zin = (zs > 0) & (zs < d.depth)
    elif d.kind == "rect_void":
        lat = (np.abs(X - cx) <= lx / 2) & (np.abs(Y - cy) <= ly / 2)
        zin = (zs > 0) & (zs < d.depth)
    else:  # ellipsoid_blob, top tangent to the probed face
        cz = thickness - d.depth / 2
        zin = None
        lat = None
        Z = zs[None, None, :]
        r = ((X[:, :, None] - cx) / (lx / 2)) ** 2 \
            + ((Y[:, :, None] - cy) / (ly / 2)) ** 2 \
            + ((Z - cz) / (d.depth / 2)) ** 2
        return r <= 1.0
    return lat[:, :, None] & zin[None, None, :]


def _dilate_bbox(mask2d, X, Y, h):
    """Bounding box of a footprint mask, grown by one voxel."""
    ii, jj = np.nonzero(mask2d)
    if ii.size == 0:
        return np.zeros_like(mask2d)
    out = np.zeros_like(mask2d)
    i0, i1 = max(ii.min() - 1, 0), min(ii.max() + 1, mask2d.shape[0] - 1)
    j0, j1 = max(jj.min() - 1, 0), min(jj.max() + 1, mask2d.shape[1] - 1)
    out[i0:i1 + 1, j0:j1 + 1] = True
    return out
