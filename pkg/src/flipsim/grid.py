"""Staggered (MAC) grid: flattened storage, sampling and difference operators.

Velocity components live on cell faces, one flat array per component;
pressure and labels are cell-centered. Cell (i, j, k) spans
``origin + (i, j, k) * dtau`` to ``origin + (i+1, j+1, k+1) * dtau`` and
flat indices are x-fastest: ``i + j*nx + k*nx*ny``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels

SOLID = 0
FLUID = 1
AIR = 2


@dataclass(frozen=True)
class GridDims:
    """Cell counts, cell edge length and world position of the min corner."""

    nx: int
    ny: int
    nz: int
    dtau: float
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise ValueError("grid needs at least one cell per axis")
        if not self.dtau > 0:
            raise ValueError("cell size must be positive")

    @property
    def ncells(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)


def flat_index(i: int, j: int, k: int, dims: GridDims) -> int:
    """Flatten cell coordinates, x-fastest. Coordinates must be in range."""
    assert 0 <= i < dims.nx and 0 <= j < dims.ny and 0 <= k < dims.nz, (i, j, k)
    return i + j * dims.nx + k * dims.nx * dims.ny


def cell_coords(index: int, dims: GridDims) -> tuple[int, int, int]:
    """Inverse of flat_index."""
    assert 0 <= index < dims.ncells, index
    i = index % dims.nx
    j = (index // dims.nx) % dims.ny
    k = index // (dims.nx * dims.ny)
    return i, j, k


class MacGrid:
    """Face-sampled velocities plus cell-centered pressure and labels."""

    def __init__(self, dims: GridDims):
        self.dims = dims
        nx, ny, nz = dims.nx, dims.ny, dims.nz
        self.u = np.zeros((nx + 1) * ny * nz)
        self.v = np.zeros(nx * (ny + 1) * nz)
        self.w = np.zeros(nx * ny * (nz + 1))
        self.p = np.zeros(nx * ny * nz)
        self.label = np.full(nx * ny * nz, AIR, dtype=np.uint8)

    # 3D views indexed [k, j, i]; they alias the flat arrays.
    def u3(self):
        d = self.dims
        return self.u.reshape(d.nz, d.ny, d.nx + 1)

    def v3(self):
        d = self.dims
        return self.v.reshape(d.nz, d.ny + 1, d.nx)

    def w3(self):
        d = self.dims
        return self.w.reshape(d.nz + 1, d.ny, d.nx)

    def p3(self):
        d = self.dims
        return self.p.reshape(d.nz, d.ny, d.nx)

    def label3(self):
        d = self.dims
        return self.label.reshape(d.nz, d.ny, d.nx)

    def clone(self) -> "MacGrid":
        other = MacGrid(self.dims)
        other.u[:] = self.u
        other.v[:] = self.v
        other.w[:] = self.w
        other.p[:] = self.p
        other.label[:] = self.label
        return other

    def copy_velocities_from(self, other: "MacGrid") -> None:
        np.copyto(self.u, other.u)
        np.copyto(self.v, other.v)
        np.copyto(self.w, other.w)


def set_solid_shell(grid: MacGrid) -> None:
    """Mark the outermost cell layer SOLID (the domain walls)."""
    lab = grid.label3()
    lab[0, :, :] = SOLID
    lab[-1, :, :] = SOLID
    lab[:, 0, :] = SOLID
    lab[:, -1, :] = SOLID
    lab[:, :, 0] = SOLID
    lab[:, :, -1] = SOLID


def interior_box(grid: MacGrid) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned bounding box of the non-SOLID cells, in world units."""
    lab = grid.label3()
    nonsolid = lab != SOLID
    if not nonsolid.any():
        raise ValueError("grid has no non-solid cells")
    ks, js, is_ = np.nonzero(nonsolid)
    d = grid.dims
    o = np.asarray(d.origin)
    lo = o + np.array([is_.min(), js.min(), ks.min()]) * d.dtau
    hi = o + (np.array([is_.max(), js.max(), ks.max()]) + 1) * d.dtau
    return lo, hi


def divergence(grid: MacGrid, i: int, j: int, k: int) -> float:
    """Central-difference divergence at cell (i, j, k), in 1/time units."""
    d = grid.dims
    assert 0 <= i < d.nx and 0 <= j < d.ny and 0 <= k < d.nz
    u3, v3, w3 = grid.u3(), grid.v3(), grid.w3()
    return (
        u3[k, j, i + 1] - u3[k, j, i]
        + v3[k, j + 1, i] - v3[k, j, i]
        + w3[k + 1, j, i] - w3[k, j, i]
    ) / d.dtau


def divergence_field(grid: MacGrid) -> np.ndarray:
    """Divergence at every cell, flattened."""
    d = grid.dims
    u3, v3, w3 = grid.u3(), grid.v3(), grid.w3()
    div = (
        u3[:, :, 1:] - u3[:, :, :-1]
        + v3[:, 1:, :] - v3[:, :-1, :]
        + w3[1:, :, :] - w3[:-1, :, :]
    ) / d.dtau
    return div.reshape(d.ncells)


def sample_velocity(grid: MacGrid, pos) -> np.ndarray:
    """Trilinearly interpolated velocity at a world position.

    Out-of-bounds queries are clamped to the interpolable domain of each
    staggered lattice, so the result always stays within stored samples.
    """
    pos = np.asarray(pos, dtype=np.float64)
    vx, vy, vz = sample_velocity_many(
        grid, pos[0:1].copy(), pos[1:2].copy(), pos[2:3].copy()
    )
    return np.array([vx[0], vy[0], vz[0]])


def sample_velocity_many(grid: MacGrid, px, py, pz):
    d = grid.dims
    ox, oy, oz = d.origin
    return _kernels.active().sample_velocity_many(
        grid.u, grid.v, grid.w,
        d.nx, d.ny, d.nz, d.dtau, ox, oy, oz,
        np.ascontiguousarray(px, dtype=np.float64),
        np.ascontiguousarray(py, dtype=np.float64),
        np.ascontiguousarray(pz, dtype=np.float64),
        _kernels.workers(),
    )


def classify_cells(grid: MacGrid, hash) -> None:
    """Label non-SOLID cells FLUID where they hold particles, else AIR."""
    nonsolid = grid.label != SOLID
    occupied = hash.count > 0
    grid.label[nonsolid & occupied] = FLUID
    grid.label[nonsolid & ~occupied] = AIR


def add_body_force(grid: MacGrid, g, dt: float) -> None:
    """Accelerate every face sample by g*dt (applied before projection)."""
    assert dt > 0
    gx, gy, gz = g
    if gx:
        grid.u += gx * dt
    if gy:
        grid.v += gy * dt
    if gz:
        grid.w += gz * dt


def _solid_face_masks(grid: MacGrid):
    """Boolean face masks (3D views) where a face touches SOLID or the exterior."""
    d = grid.dims
    lab = grid.label3()
    solid = lab == SOLID
    mu = np.ones((d.nz, d.ny, d.nx + 1), dtype=bool)
    mu[:, :, 1:-1] = solid[:, :, :-1] | solid[:, :, 1:]
    mv = np.ones((d.nz, d.ny + 1, d.nx), dtype=bool)
    mv[:, 1:-1, :] = solid[:, :-1, :] | solid[:, 1:, :]
    mw = np.ones((d.nz + 1, d.ny, d.nx), dtype=bool)
    mw[1:-1, :, :] = solid[:-1, :, :] | solid[1:, :, :]
    return mu, mv, mw


def enforce_solid_boundaries(grid: MacGrid) -> None:
    """Zero the normal velocity on every face touching a SOLID cell.

    Faces on the domain boundary count as solid-adjacent (the exterior is
    treated as solid). Idempotent.
    """
    mu, mv, mw = _solid_face_masks(grid)
    grid.u3()[mu] = 0.0
    grid.v3()[mv] = 0.0
    grid.w3()[mw] = 0.0


def _extrapolate_component(arr3: np.ndarray, known3: np.ndarray, layers: int) -> np.ndarray:
    """Layered breadth-first fill of unknown samples from known neighbors.

    Each layer is synchronous: new values average only samples known before
    the layer started, so the result is order-independent.
    """
    known = known3.copy()
    for _ in range(layers):
        vals = np.where(known, arr3, 0.0)
        cnt = np.zeros(arr3.shape, dtype=np.int64)
        acc = np.zeros_like(arr3)
        for axis in range(3):
            for sign in (-1, 1):
                src_known = np.zeros_like(known)
                src_vals = np.zeros_like(vals)
                dst = [slice(None)] * 3
                src = [slice(None)] * 3
                if sign == 1:
                    dst[axis] = slice(1, None)
                    src[axis] = slice(None, -1)
                else:
                    dst[axis] = slice(None, -1)
                    src[axis] = slice(1, None)
                src_known[tuple(dst)] = known[tuple(src)]
                src_vals[tuple(dst)] = vals[tuple(src)]
                cnt += src_known
                acc += src_vals
        fill = ~known & (cnt > 0)
        arr3[fill] = acc[fill] / cnt[fill]
        known |= fill
        if not fill.any():
            break
    return known


def extrapolate_velocities(grid: MacGrid, known_u, known_v, known_w, layers: int = 2):
    """Propagate face velocities into unknown faces, `layers` rings deep.

    Returns the updated known masks. Unknown faces beyond the fill depth
    keep their current (zero) values.
    """
    d = grid.dims
    ku = _extrapolate_component(grid.u3(), known_u.reshape(d.nz, d.ny, d.nx + 1), layers)
    kv = _extrapolate_component(grid.v3(), known_v.reshape(d.nz, d.ny + 1, d.nx), layers)
    kw = _extrapolate_component(grid.w3(), known_w.reshape(d.nz + 1, d.ny, d.nx), layers)
    return ku.reshape(-1), kv.reshape(-1), kw.reshape(-1)
