"""Seven-point Laplacian pressure system: assembly, solvers, projection.

The matrix is never stored: each fluid-cell row keeps its diagonal count
and the dense row ids of its six neighbors (-1 where the neighbor carries
zero pressure). Row r of the operator is
``scale * (diag[r] * p[r] - sum of fluid-neighbor p)`` with
``scale = dt / (rho * dtau**2)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import _kernels
from .errors import SingularSystemError, SolverBreakdownError
from .grid import AIR, FLUID, MacGrid, SOLID, _solid_face_masks

log = logging.getLogger(__name__)

# neighbor direction order used throughout: -x, +x, -y, +y, -z, +z
_DIR_SHIFTS = ((-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1))


@dataclass
class LaplacianSystem:
    """Matrix-free pressure equations over the (unpinned) fluid cells."""

    nx: int
    ny: int
    nz: int
    cells: np.ndarray      # raw cell index per row, ascending
    row_of: np.ndarray     # raw cell -> row id, -1 for non-rows
    diag: np.ndarray       # count of non-SOLID neighbors, per row
    nbr_rows: np.ndarray   # (n, 6) neighbor row ids, -1 = zero-pressure
    rhs: np.ndarray        # negative divergence per row
    scale: float
    pinned: np.ndarray     # raw indices pinned to zero pressure
    red_rows: np.ndarray = field(default=None)
    black_rows: np.ndarray = field(default=None)

    @property
    def nrows(self) -> int:
        return len(self.cells)

    def pressure_field(self, x: np.ndarray) -> np.ndarray:
        """Dense cell-centered pressure: solution on rows, zero elsewhere."""
        p = np.zeros(self.nx * self.ny * self.nz)
        p[self.cells] = x
        return p

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return _kernels.active().laplacian_matvec(
            self.diag, self.nbr_rows, x, self.scale, _kernels.workers())

    def residual_norm(self, x: np.ndarray) -> float:
        if self.nrows == 0:
            return 0.0
        return float(np.abs(self.rhs - self.matvec(x)).max())


def _neighbor_views(arr3: np.ndarray, fill):
    """The six shifted copies of a cell field, exterior filled."""
    padded = np.pad(arr3, 1, constant_values=fill)
    out = []
    for di, dj, dk in _DIR_SHIFTS:
        out.append(padded[1 + dk:arr3.shape[0] + 1 + dk,
                          1 + dj:arr3.shape[1] + 1 + dj,
                          1 + di:arr3.shape[2] + 1 + di].reshape(-1))
    return out


def assemble(grid: MacGrid, dt: float, rho: float,
             fluid_cells: np.ndarray | None = None) -> LaplacianSystem:
    """Build the pressure equations for the current labels and velocities.

    AIR neighbors keep their diagonal contribution with zero pressure (free
    surface); SOLID neighbors drop out of the diagonal (wall). Fluid regions
    sealed away from any AIR cell would be singular, so the lowest-index
    cell of each such region is pinned to zero pressure and removed from
    the unknowns (its neighbors then treat it like a free surface).
    The right-hand side is the negative divergence with solid-face
    velocities taken as zero.
    """
    if dt <= 0 or rho <= 0:
        raise ValueError("dt and rho must be positive")
    d = grid.dims
    lab3 = grid.label3()
    labels = grid.label
    if fluid_cells is None:
        fluid = np.flatnonzero(labels == FLUID).astype(np.int64)
    else:
        fluid = np.asarray(fluid_cells, dtype=np.int64)
        fluid = fluid[labels[fluid] == FLUID]

    nbr_lab = _neighbor_views(lab3, SOLID)
    raw3 = np.arange(d.ncells, dtype=np.int64).reshape(d.nz, d.ny, d.nx)
    nbr_raw = _neighbor_views(raw3, -1)

    nonsolid_count = np.zeros(d.ncells, dtype=np.int64)
    air_count = np.zeros(d.ncells, dtype=np.int64)
    for nl in nbr_lab:
        nonsolid_count += nl != SOLID
        air_count += nl == AIR

    # pin one cell per fluid component that touches no air anywhere
    pinned = np.zeros(0, dtype=np.int64)
    if len(fluid):
        comp3, ncomp = ndimage.label(lab3 == FLUID,
                                     structure=ndimage.generate_binary_structure(3, 1))
        comp = comp3.reshape(-1)[fluid]
        has_air = np.zeros(ncomp + 1, dtype=bool)
        np.logical_or.at(has_air, comp, air_count[fluid] > 0)
        sealed = np.flatnonzero(~has_air[1:]) + 1
        if len(sealed):
            first = np.full(ncomp + 1, d.ncells, dtype=np.int64)
            np.minimum.at(first, comp, fluid)
            pinned = np.sort(first[sealed])
            log.debug("pinned %d sealed fluid region(s) to zero pressure",
                      len(pinned))

    if len(pinned):
        keep = np.ones(len(fluid), dtype=bool)
        keep[np.searchsorted(fluid, pinned)] = False
        rows_cells = fluid[keep]
    else:
        rows_cells = fluid

    row_of = np.full(d.ncells, -1, dtype=np.int64)
    row_of[rows_cells] = np.arange(len(rows_cells), dtype=np.int64)

    n = len(rows_cells)
    nbr_rows = np.full((n, 6), -1, dtype=np.int64)
    for dir_idx in range(6):
        is_fluid_nbr = nbr_lab[dir_idx][rows_cells] == FLUID
        raws = nbr_raw[dir_idx][rows_cells]
        m = is_fluid_nbr & (raws >= 0)
        nbr_rows[m, dir_idx] = row_of[raws[m]]

    # negative divergence with solid faces contributing zero velocity
    mu, mv, mw = _solid_face_masks(grid)
    u3 = np.where(mu, 0.0, grid.u3())
    v3 = np.where(mv, 0.0, grid.v3())
    w3 = np.where(mw, 0.0, grid.w3())
    div = (u3[:, :, 1:] - u3[:, :, :-1]
           + v3[:, 1:, :] - v3[:, :-1, :]
           + w3[1:, :, :] - w3[:-1, :, :]).reshape(-1) / d.dtau
    rhs = -div[rows_cells]

    i = rows_cells % d.nx
    j = (rows_cells // d.nx) % d.ny
    k = rows_cells // (d.nx * d.ny)
    parity = (i + j + k) & 1
    red = np.flatnonzero(parity == 0).astype(np.int64)
    black = np.flatnonzero(parity == 1).astype(np.int64)

    return LaplacianSystem(
        nx=d.nx, ny=d.ny, nz=d.nz,
        cells=rows_cells, row_of=row_of,
        diag=nonsolid_count[rows_cells].astype(np.float64),
        nbr_rows=nbr_rows, rhs=rhs, scale=dt / (rho * d.dtau ** 2),
        pinned=pinned, red_rows=red, black_rows=black,
    )


@dataclass
class SolveResult:
    """Pressure solution with convergence bookkeeping."""

    p: np.ndarray
    iterations: int
    residual: float
    converged: bool
    residual_history: np.ndarray

    @property
    def residual_monotone(self) -> bool:
        h = self.residual_history
        return bool(np.all(np.diff(h) <= 0)) if len(h) > 1 else True


def _check_diagonal(sys: LaplacianSystem) -> None:
    if sys.nrows and not np.all(sys.diag > 0):
        bad = int(np.argmax(sys.diag <= 0))
        raise SingularSystemError(int(sys.cells[bad]))


def _target(sys: LaplacianSystem, tol: float) -> float:
    rhs_max = float(np.abs(sys.rhs).max()) if sys.nrows else 0.0
    return tol * max(1.0, rhs_max)


def _empty_result() -> SolveResult:
    return SolveResult(np.zeros(0), 0, 0.0, True, np.zeros(0))


def _relaxation_solve(sys: LaplacianSystem, max_iters: int, tol: float,
                      sweep) -> SolveResult:
    _check_diagonal(sys)
    if sys.nrows == 0:
        return _empty_result()
    target = _target(sys, tol)
    x = np.zeros(sys.nrows)
    history = []
    res = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        x = sweep(x)
        res = sys.residual_norm(x)
        history.append(res)
        if res <= target:
            break
    result = SolveResult(x, it, res, res <= target, np.asarray(history))
    if not result.residual_monotone:
        log.warning("relaxation residual increased during solve "
                    "(final %.3e after %d iterations)", res, it)
    return result


def solve_jacobi(sys: LaplacianSystem, max_iters: int = 2000,
                 tol: float = 1e-6) -> SolveResult:
    """Simultaneous-displacement relaxation from the previous iterate."""
    k = _kernels.active()
    workers = _kernels.workers()

    def sweep(x):
        return k.jacobi_iter(sys.diag, sys.nbr_rows, sys.rhs, x, sys.scale,
                             workers)

    return _relaxation_solve(sys, max_iters, tol, sweep)


def solve_gauss_seidel(sys: LaplacianSystem, max_iters: int = 2000,
                       tol: float = 1e-6) -> SolveResult:
    """In-place relaxation sweeping rows in ascending order."""
    k = _kernels.active()

    def sweep(x):
        k.gs_sweep(sys.diag, sys.nbr_rows, sys.rhs, x, sys.scale)
        return x

    return _relaxation_solve(sys, max_iters, tol, sweep)


def solve_rbgs(sys: LaplacianSystem, max_iters: int = 2000,
               tol: float = 1e-6) -> SolveResult:
    """Two-color relaxation: even-parity cells first, then odd-parity.

    Cells of one color never couple in the seven-point stencil, so each
    half-sweep may update its rows in any order (or in parallel) without
    changing the iterate.
    """
    k = _kernels.active()
    workers = _kernels.workers()

    def sweep(x):
        k.gs_sweep_rows(sys.red_rows, sys.diag, sys.nbr_rows, sys.rhs, x,
                        sys.scale, workers)
        k.gs_sweep_rows(sys.black_rows, sys.diag, sys.nbr_rows, sys.rhs, x,
                        sys.scale, workers)
        return x

    return _relaxation_solve(sys, max_iters, tol, sweep)


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    # fixed-order pairwise reduction; deterministic across runs
    return float(np.add.reduce(a * b))


def solve_pcg(sys: LaplacianSystem, max_iters: int = 100, tol: float = 1e-6,
              precond: str = "mic0") -> SolveResult:
    """Preconditioned conjugate gradients on the implicit operator.

    `precond` is "mic0" (modified incomplete Cholesky, tuning 0.97),
    "jacobi" (diagonal) or "none".
    """
    _check_diagonal(sys)
    if sys.nrows == 0:
        return _empty_result()
    k = _kernels.active()
    workers = _kernels.workers()

    if precond == "mic0":
        pc = k.mic0_build(sys.diag, sys.nbr_rows, sys.scale, 0.97, 0.25,
                          workers)

        def apply_pc(r):
            return k.mic0_apply(pc, sys.nbr_rows, r, sys.scale, workers)
    elif precond == "jacobi":
        inv_diag = 1.0 / (sys.scale * sys.diag)

        def apply_pc(r):
            return r * inv_diag
    elif precond == "none":
        def apply_pc(r):
            return r
    else:
        raise ValueError(f"unknown preconditioner {precond!r}")

    target = _target(sys, tol)
    x = np.zeros(sys.nrows)
    r = sys.rhs.copy()
    res = float(np.abs(r).max())
    history = []
    if res <= target:
        return SolveResult(x, 0, res, True, np.asarray(history))
    z = apply_pc(r)
    s = z.copy()
    sigma = _dot(z, r)
    for it in range(1, max_iters + 1):
        q = sys.matvec(s)
        curvature = _dot(s, q)
        if curvature <= 0.0:
            raise SolverBreakdownError(
                f"conjugate-gradient breakdown: curvature {curvature:.3e} "
                f"at iteration {it}")
        alpha = sigma / curvature
        x += alpha * s
        r -= alpha * q
        res = float(np.abs(r).max())
        history.append(res)
        if res <= target:
            return SolveResult(x, it, res, True, np.asarray(history))
        z = apply_pc(r)
        sigma_new = _dot(z, r)
        s = z + (sigma_new / sigma) * s
        sigma = sigma_new
    return SolveResult(x, max_iters, res, False, np.asarray(history))


SOLVERS = {
    "jacobi": solve_jacobi,
    "gs": solve_gauss_seidel,
    "rbgs": solve_rbgs,
    "pcg": solve_pcg,
}


def apply_pressure_gradient(grid: MacGrid, p: np.ndarray, dt: float,
                            rho: float) -> None:
    """Subtract the pressure gradient from face velocities.

    `p` is the dense cell-centered pressure (zero in AIR cells). Faces
    between two non-SOLID cells with at least one FLUID side get the
    central-difference update; faces touching SOLID (or the domain edge)
    are set to zero.
    """
    d = grid.dims
    lab3 = grid.label3()
    p3 = p.reshape(d.nz, d.ny, d.nx)
    scale = dt / (rho * d.dtau)

    def update(face3, axis):
        sl_lo = [slice(None)] * 3
        sl_hi = [slice(None)] * 3
        sl_lo[axis] = slice(None, -1)
        sl_hi[axis] = slice(1, None)
        lab_lo = lab3[tuple(sl_lo)]
        lab_hi = lab3[tuple(sl_hi)]
        interior = [slice(None)] * 3
        interior[axis] = slice(1, -1)
        faces = face3[tuple(interior)]
        solid = (lab_lo == SOLID) | (lab_hi == SOLID)
        active = ~solid & ((lab_lo == FLUID) | (lab_hi == FLUID))
        faces[active] -= scale * (p3[tuple(sl_hi)] - p3[tuple(sl_lo)])[active]
        faces[solid] = 0.0
        lo_face = [slice(None)] * 3
        lo_face[axis] = 0
        hi_face = [slice(None)] * 3
        hi_face[axis] = face3.shape[axis] - 1
        face3[tuple(lo_face)] = 0.0
        face3[tuple(hi_face)] = 0.0

    update(grid.u3(), 2)
    update(grid.v3(), 1)
    update(grid.w3(), 0)
