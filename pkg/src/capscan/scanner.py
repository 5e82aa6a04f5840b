"""Virtual 2D scan orchestration and scan-image CSV interchange.

Each scan position rebuilds a probe-centered local grid (constant per-point
cost; sample edges enter the local window naturally), solves the field,
pushes the induced charge through the charge-amplifier and lock-in models,
and records X, Y, R, phi.  Images are reproducible: the per-position noise
seed is base seed + linear index (j * nx_points + i), and warm starts only
chain along rows, so row-major and column-major evaluation give identical
results.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, CsvParseError, DimensionMismatchError
from .geometry import Probe, SampleSpec, build_grid
from .lockin import (NOISE_NONE, NoiseModel, ReferenceSignal, charge_to_voltage,
                     demodulate, synthesize)
from .solver import induced_charge, solve_potential

CHANNELS = ("X", "Y", "R", "PHI", "R_NORM", "PHI_NORM",
            "DELTA", "XI", "DELTA_P", "XI_P", "MASK")

CHANNEL_UNITS = {"X": "V2", "Y": "V2", "R": "V2", "PHI": "rad"}


def channel_units(channel: str) -> str:
    return CHANNEL_UNITS.get(channel, "1")


@dataclass(frozen=True)
class ScanPlan:
    """Grid of probe positions plus the electronics settings."""

    x0: float
    y0: float
    dx: float
    dy: float
    nx_points: int
    ny_points: int
    lift_off: float
    orientation: float = 0.0
    f_in: float = 15e3
    v_drive: float = 10.0
    gain: float = 1e12
    n_periods: int = 40
    fs: float = 1e6
    noise: NoiseModel = NOISE_NONE

    def __post_init__(self):
        if self.dx <= 0 or self.dy <= 0:
            raise ValueError("dx and dy must be positive")
        if self.nx_points < 1 or self.ny_points < 1:
            raise ValueError("need at least one scan point per axis")
        if self.lift_off < 0:
            raise ValueError("lift_off must be >= 0")
        if self.fs <= 2 * self.f_in:
            raise ValueError("fs must exceed 2 * f_in")

    def x_positions(self) -> np.ndarray:
        return self.x0 + np.arange(self.nx_points) * self.dx

    def y_positions(self) -> np.ndarray:
        return self.y0 + np.arange(self.ny_points) * self.dy


@dataclass
class ScanImage:
    """One channel of a scan as an ny-by-nx matrix (row j = y index j)."""

    channel: str
    values: np.ndarray
    dx: float = 1.0
    dy: float = 1.0
    x0: float = 0.0
    y0: float = 0.0
    units: str = "1"
    plan: ScanPlan | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise DimensionMismatchError("scan image values must be 2D")

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    def with_values(self, values, channel=None, units=None) -> "ScanImage":
        return ScanImage(channel or self.channel, np.asarray(values, dtype=float),
                         self.dx, self.dy, self.x0, self.y0,
                         units if units is not None else self.units, self.plan)


class ScanResult(NamedTuple):
    r: ScanImage
    phi: ScanImage
    x: ScanImage
    y: ScanImage


@dataclass(frozen=True)
class SolverOptions:
    """Grid build and solver settings shared by all scan positions."""

    tol: float = 1e-8
    max_iter: int = 20000
    padding: object = 0.012          # scalar or (lateral, below, above), meters
    resolution: float = 1000.0       # voxels per meter
    outer: str = "neumann"
    shield: bool = True
    warm_start: bool = True


def run_scan(sample: SampleSpec, probe: Probe, plan: ScanPlan,
             solver: SolverOptions = SolverOptions(),
             order: str = "row-major") -> ScanResult:
    """Run the full measurement chain at every scan position.

    The probe's lift-off and orientation are taken from the plan.  Noise
    seeds derive from the plan's noise seed plus the position's linear
    index, so images are reproducible run to run; with noise kind "none"
    they are exactly reproducible bit for bit.
    """
    if order not in ("row-major", "column-major"):
        raise ValueError("order must be 'row-major' or 'column-major'")
    probe_at = replace(probe, lift_off=plan.lift_off, orientation=plan.orientation)
    ref = ReferenceSignal(f_in=plan.f_in, v_ref=1.0, theta_ref=0.0)
    shape = (plan.ny_points, plan.nx_points)
    imgs = {c: np.zeros(shape) for c in ("X", "Y", "R", "PHI")}
    xs = plan.x_positions()
    ys = plan.y_positions()

    prev_field = {}  # row j -> field at column i-1 (warm-start chains along rows)
    if order == "row-major":
        order_iter = ((i, j) for j in range(plan.ny_points) for i in range(plan.nx_points))
    else:
        order_iter = ((i, j) for i in range(plan.nx_points) for j in range(plan.ny_points))

    for i, j in order_iter:
        grid, bc = build_grid(sample, probe_at, solver.padding, solver.resolution,
                              probe_center=(float(xs[i]), float(ys[j])),
                              outer=solver.outer, shield=solver.shield)
        x0 = prev_field.get(j) if solver.warm_start else None
        try:
            field = solve_potential(grid, bc, plan.v_drive,
                                    tol=solver.tol, max_iter=solver.max_iter, x0=x0)
        except ConvergenceError as e:
            raise ConvergenceError(
                f"scan position (i={i}, j={j}) at x={xs[i]:.6g}, y={ys[j]:.6g}: {e}",
                residual=e.residual, iterations=e.iterations) from e
        if solver.warm_start:
            prev_field[j] = field
        q = induced_charge(field, grid, bc, plan.v_drive)
        v_out, theta_out = charge_to_voltage(q, plan.gain)
        seed = plan.noise.seed + j * plan.nx_points + i
        ts = synthesize(v_out, theta_out, ref, plan.fs, plan.n_periods,
                        noise=plan.noise.with_seed(seed))
        dem = demodulate(ts, ref)
        imgs["X"][j, i] = dem.x
        imgs["Y"][j, i] = dem.y
        imgs["R"][j, i] = dem.r
        imgs["PHI"][j, i] = dem.phi

    def mk(ch):
        return ScanImage(ch, imgs[ch], plan.dx, plan.dy, plan.x0, plan.y0,
                         channel_units(ch), plan)

    return ScanResult(r=mk("R"), phi=mk("PHI"), x=mk("X"), y=mk("Y"))


def write_scan_csv(img: ScanImage, path) -> None:
    """Documented interchange format: two header lines, then ny rows of nx values."""
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(f"# channel={img.channel}\n")
        f.write(f"# nx={img.nx},ny={img.ny},dx={img.dx:.17g},dy={img.dy:.17g},"
                f"units={img.units}\n")
        for j in range(img.ny):
            f.write(",".join(f"{v:.17g}" for v in img.values[j]) + "\n")


def read_scan_csv(path) -> ScanImage:
    """Parse a scan CSV; missing headers fall back to documented defaults."""
    meta = {}
    rows = []
    with open(path, "r", encoding="ascii") as f:
        for ln, line in enumerate(f):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for part in line[1:].split(","):
                    if "=" in part:
                        k, v = part.split("=", 1)
                        meta[k.strip()] = v.strip()
                continue
            cells = line.split(",")
            row = []
            for cn, cell in enumerate(cells):
                try:
                    row.append(float(cell))
                except ValueError as e:
                    raise CsvParseError(f"non-numeric cell {cell!r}",
                                        row=ln, col=cn) from e
            rows.append(row)
    if not rows:
        raise CsvParseError("no data rows")
    width = len(rows[0])
    for ln, row in enumerate(rows):
        if len(row) != width:
            raise CsvParseError(f"ragged row: {len(row)} cells, expected {width}",
                                row=ln)
    if not {"dx", "dy"} <= meta.keys():
        warnings.warn(f"{path}: missing scan header, assuming dx=dy=1 (arbitrary units)")
    values = np.array(rows)
    if {"nx", "ny"} <= meta.keys():
        want = (int(meta["ny"]), int(meta["nx"]))
        if values.shape != want:
            raise CsvParseError(
                f"header says ny,nx={want}, data is {values.shape}")
    return ScanImage(meta.get("channel", "R"), values,
                     dx=float(meta.get("dx", 1.0)), dy=float(meta.get("dy", 1.0)),
                     units=meta.get("units", "1"))


def ingest_csv(r_path, phi_path) -> tuple[ScanImage, ScanImage]:
    """Load externally measured R and phi grids for the fusion pipeline."""
    r = read_scan_csv(r_path)
    phi = read_scan_csv(phi_path)
    if r.values.shape != phi.values.shape:
        raise DimensionMismatchError(
            f"R grid {r.values.shape} vs phi grid {phi.values.shape}")
    return r, phi
