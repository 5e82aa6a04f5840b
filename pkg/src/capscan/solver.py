"""Quasi-static potential solver and induced-charge evaluation.

Solves div(eps grad V) = 0 on the voxel grid with a flux-conservative
7-point finite-volume stencil, face permittivity being the harmonic mean
of the two adjacent voxels.  The linear system is complex symmetric (not
Hermitian) for lossy permittivity, so a conjugate-orthogonal CG iteration
(COCG) with a Jacobi preconditioner is used; the contract is the relative
residual, not the method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import BoundaryConditionError, ConvergenceError
from .geometry import BoundaryConditions, PermittivityGrid

EPSILON_0 = 8.8541878128e-12  # vacuum permittivity, F/m


@dataclass
class PotentialField:
    """Complex node potentials plus solver diagnostics."""

    values: np.ndarray
    residual_norm: float
    iterations: int


@dataclass(frozen=True)
class InducedCharge:
    """Complex charge on the sensing electrode."""

    q: complex

    @property
    def magnitude(self) -> float:
        return abs(self.q)

    @property
    def phase(self) -> float:
        return float(np.angle(self.q))


@dataclass
class SensitivityMap:
    """d|q| per unit real-permittivity perturbation, per voxel."""

    values: np.ndarray
    delta_eps: float


def _face_weights(eps: np.ndarray, h: float, axis: int):
    """Harmonic-mean flux coefficients for all faces along one axis."""
    lo = [slice(None)] * 3
    hi = [slice(None)] * 3
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    e1 = eps[tuple(lo)]
    e2 = eps[tuple(hi)]
    return (2.0 * e1 * e2 / (e1 + e2)) * h, tuple(lo), tuple(hi)


def _bincount_c(idx, weights, n):
    return (np.bincount(idx, weights.real, minlength=n)
            + 1j * np.bincount(idx, weights.imag, minlength=n))


def _assemble(grid: PermittivityGrid, bc: BoundaryConditions, v_drive: float):
    """Reduced system A x = b over non-fixed nodes."""
    eps = grid.eps
    n = eps.size
    idx = np.arange(n).reshape(eps.shape)
    fixed = bc.fixed_mask()
    vals_fixed = np.zeros(eps.shape)
    vals_fixed[bc.drive] = v_drive
    unknown = ~fixed.ravel()
    n_red = int(unknown.sum())
    if n_red == 0:
        raise BoundaryConditionError("no unknown nodes: everything is fixed")
    red = -np.ones(n, dtype=np.int64)
    red[unknown] = np.arange(n_red)

    all_i = []
    all_w = []
    rows = []
    cols = []
    data = []
    b = np.zeros(n_red, dtype=np.complex128)
    vf = vals_fixed.ravel()
    for axis in range(3):
        w, lo, hi = _face_weights(eps, grid.h, axis)
        i_lo = idx[lo].ravel()
        i_hi = idx[hi].ravel()
        wf = w.ravel()
        all_i += [i_lo, i_hi]
        all_w += [wf, wf]
        u_lo = unknown[i_lo]
        u_hi = unknown[i_hi]
        both = u_lo & u_hi
        rows += [red[i_lo[both]], red[i_hi[both]]]
        cols += [red[i_hi[both]], red[i_lo[both]]]
        data += [-wf[both], -wf[both]]
        m = u_hi & ~u_lo  # lo fixed, contributes to hi's RHS
        if m.any():
            b += _bincount_c(red[i_hi[m]], wf[m] * vf[i_lo[m]], n_red)
        m = u_lo & ~u_hi
        if m.any():
            b += _bincount_c(red[i_lo[m]], wf[m] * vf[i_hi[m]], n_red)

    diag = _bincount_c(np.concatenate(all_i), np.concatenate(all_w), n)
    ui = np.flatnonzero(unknown)
    rows.append(red[ui])
    cols.append(red[ui])
    data.append(diag[ui])
    a = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_red, n_red))
    return a, b, red, vals_fixed


def _cocg(a, b, tol, max_iter, x0=None):
    """Conjugate-orthogonal CG for complex symmetric systems, Jacobi preconditioned."""
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros_like(b), 0.0, 0
    x = np.zeros_like(b) if x0 is None else x0.astype(np.complex128, copy=True)
    dinv = 1.0 / a.diagonal()
    r = b - a @ x
    z = dinv * r
    p = z.copy()
    rho = np.dot(r, z)  # unconjugated inner product
    res = np.linalg.norm(r) / norm_b
    for it in range(max_iter):
        if res <= tol:
            return x, res, it
        if rho == 0.0:
            raise ConvergenceError("COCG breakdown (rho = 0)",
                                   residual=res, iterations=it)
        w = a @ p
        pw = np.dot(p, w)
        if pw == 0.0:
            raise ConvergenceError("COCG breakdown (p'Ap = 0)",
                                   residual=res, iterations=it)
        alpha = rho / pw
        x = x + alpha * p
        r = r - alpha * w
        res = np.linalg.norm(r) / norm_b
        z = dinv * r
        rho_new = np.dot(r, z)
        p = z + (rho_new / rho) * p
        rho = rho_new
    raise ConvergenceError(
        f"no convergence in {max_iter} iterations (residual {res:.3e})",
        residual=res, iterations=max_iter)


def solve_potential(grid: PermittivityGrid, bc: BoundaryConditions, v_drive: float,
                    tol: float = 1e-8, max_iter: int = 20000,
                    x0: PotentialField | None = None) -> PotentialField:
    """Solve for the complex potential; relative residual <= tol on return.

    x0 warm-starts the iteration from a previous solution on the same
    grid shape and boundary layout; it does not affect the converged
    answer, only the iteration count.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if bc.drive.shape != grid.eps.shape:
        raise BoundaryConditionError("boundary-condition arrays do not match grid")
    a, b, red, vals_fixed = _assemble(grid, bc, v_drive)
    x_init = None
    if x0 is not None:
        x_init = x0.values.ravel()[red >= 0]
    x, res, it = _cocg(a, b, tol, max_iter, x0=x_init)
    v = vals_fixed.astype(np.complex128).ravel()
    v[red >= 0] = x
    return PotentialField(v.reshape(grid.eps.shape), float(res), it)


def _gauss_charge(v: np.ndarray, grid: PermittivityGrid, mask: np.ndarray) -> complex:
    """Charge enclosed by the discrete Gauss surface around a node set.

    q = -eps0 * sum over surface faces of eps_face * dV/dn_outward * area.
    """
    q = 0.0 + 0.0j
    for axis in range(3):
        w, lo, hi = _face_weights(grid.eps, grid.h, axis)
        m_lo = mask[lo]
        m_hi = mask[hi]
        v_lo = v[lo]
        v_hi = v[hi]
        out = m_lo & ~m_hi
        q += -EPSILON_0 * np.sum(w[out] * (v_hi[out] - v_lo[out]))
        inw = m_hi & ~m_lo
        q += -EPSILON_0 * np.sum(w[inw] * (v_lo[inw] - v_hi[inw]))
    return complex(q)


def induced_charge(field: PotentialField, grid: PermittivityGrid,
                   bc: BoundaryConditions, v_drive: float) -> InducedCharge:
    """Complex induced charge on the sensing electrode."""
    if field.values.shape != grid.eps.shape:
        raise BoundaryConditionError("field does not match grid")
    return InducedCharge(_gauss_charge(field.values, grid, bc.sense))


def conductor_charges(field: PotentialField, grid: PermittivityGrid,
                      bc: BoundaryConditions) -> dict[str, complex]:
    """Gauss charges of every conductor node set (plus the grounded border)."""
    out = {
        "drive": _gauss_charge(field.values, grid, bc.drive),
        "sense": _gauss_charge(field.values, grid, bc.sense),
    }
    if bc.shield.any():
        out["shield"] = _gauss_charge(field.values, grid, bc.shield)
    border = bc.outer_mask()
    if border.any():
        out["outer"] = _gauss_charge(field.values, grid, border)
    return out


def sensitivity_map(grid: PermittivityGrid, bc: BoundaryConditions, v_drive: float,
                    delta_eps: float, *, voxels: np.ndarray | None = None,
                    tol: float = 1e-10, max_iter: int = 20000) -> SensitivityMap:
    """Brute-force sensitivity of |q| to a real permittivity bump per voxel.

    Each voxel in the perturbation set gets eps' += delta_eps, the field is
    re-solved (warm-started from the unperturbed solution), and
    (|q_perturbed| - |q_base|) / delta_eps is recorded.  The perturbation
    set defaults to the grid's sample mask (else all non-air voxels); pass
    a boolean mask to restrict it, e.g. to a single column for depth
    profiles.  Entries outside the set stay zero.
    """
    if delta_eps <= 0:
        raise ValueError("delta_eps must be positive")
    if voxels is None:
        voxels = grid.sample_mask
    if voxels is None:
        voxels = grid.eps != (1.0 + 0.0j)
    voxels = voxels & ~bc.fixed_mask()

    base = solve_potential(grid, bc, v_drive, tol=tol, max_iter=max_iter)
    q_base = abs(_gauss_charge(base.values, grid, bc.sense))
    out = np.zeros(grid.eps.shape)
    for ijk in np.argwhere(voxels):
        eps2 = grid.eps.copy()
        eps2[tuple(ijk)] += delta_eps
        g2 = PermittivityGrid(grid.nx, grid.ny, grid.nz, grid.h, eps2, grid.origin)
        f2 = solve_potential(g2, bc, v_drive, tol=tol, max_iter=max_iter, x0=base)
        q2 = abs(_gauss_charge(f2.values, g2, bc.sense))
        out[tuple(ijk)] = (q2 - q_base) / delta_eps
    return SensitivityMap(out, delta_eps)


def dump_volume_csv(values: np.ndarray, path) -> None:
    """Write a real 3D volume as CSV: z-major slabs of row-major (y, x) planes.

    Header records the shape; each line holds nx comma-separated values,
    lines cycle fastest over y within a z slab.
    """
    a = np.asarray(values)
    if np.iscomplexobj(a):
        raise ValueError("dump_volume_csv takes a real volume; pass .real/.imag/abs()")
    nx, ny, nz = a.shape
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(f"# nx={nx},ny={ny},nz={nz}\n")
        for k in range(nz):
            for j in range(ny):
                f.write(",".join(f"{v:.17g}" for v in a[:, j, k]) + "\n")
