"""Cell hashing, prefix-sum scan and counting-sort particle reordering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import GridDims
from .particles import ParticleSet


@dataclass
class SpaceHash:
    """Per-cell segment bookkeeping into the cell-sorted particle arrays."""

    offset: np.ndarray       # exclusive prefix sum of count
    count: np.ndarray        # particles per cell
    fluid_cells: np.ndarray  # ascending raw indices of cells with count > 0

    def segment(self, cell: int) -> slice:
        start = int(self.offset[cell])
        return slice(start, start + int(self.count[cell]))


def cell_index(pos, dims: GridDims) -> int:
    """Raw index of the cell containing a world position (axes clamped)."""
    x, y, z = pos
    ox, oy, oz = dims.origin
    i = min(max(int(np.floor((x - ox) / dims.dtau)), 0), dims.nx - 1)
    j = min(max(int(np.floor((y - oy) / dims.dtau)), 0), dims.ny - 1)
    k = min(max(int(np.floor((z - oz) / dims.dtau)), 0), dims.nz - 1)
    return i + j * dims.nx + k * dims.nx * dims.ny


def cell_index_many(px, py, pz, dims: GridDims) -> np.ndarray:
    ox, oy, oz = dims.origin
    i = np.clip(np.floor((px - ox) / dims.dtau).astype(np.int64), 0, dims.nx - 1)
    j = np.clip(np.floor((py - oy) / dims.dtau).astype(np.int64), 0, dims.ny - 1)
    k = np.clip(np.floor((pz - oz) / dims.dtau).astype(np.int64), 0, dims.nz - 1)
    return i + j * dims.nx + k * dims.nx * dims.ny


def exclusive_scan(values) -> np.ndarray:
    """Exclusive prefix sum: out[0] = 0, out[i] = sum(values[:i]).

    Large inputs use the two-sweep (up/down) balanced-tree scan on a
    power-of-two buffer; small ones use a direct shifted running sum.
    Values must be non-negative integers whose total fits int64.
    """
    a = np.asarray(values)
    if a.dtype.kind not in "iu":
        raise TypeError("exclusive_scan expects integer values")
    a = a.astype(np.int64, copy=False)
    n = a.size
    out = np.zeros(n, dtype=np.int64)
    if n <= 1:
        return out
    if n < 4096:
        np.cumsum(a[:-1], out=out[1:])
        return out
    m = 1 << (n - 1).bit_length()
    buf = np.zeros(m, dtype=np.int64)
    buf[:n] = a
    d = 1
    while d < m:  # up-sweep: partial sums toward the root
        step = d * 2
        buf[step - 1::step] += buf[d - 1::step]
        d = step
    buf[m - 1] = 0
    d = m >> 1
    while d >= 1:  # down-sweep: push prefixes back to the leaves
        step = d * 2
        left = buf[d - 1::step].copy()
        buf[d - 1::step] = buf[step - 1::step]
        buf[step - 1::step] += left
        d >>= 1
    return buf[:n]


def bin_particles(particles: ParticleSet, dims: GridDims):
    """Sort particles by cell index (stable) and build the space hash.

    The reorder scatters into the particle set's second buffer and swaps.
    Returns (particles, SpaceHash); sorting preserves within-cell order.
    """
    cells = cell_index_many(particles.pos_x, particles.pos_y, particles.pos_z,
                            dims)
    count = np.bincount(cells, minlength=dims.ncells).astype(np.int64)
    offset = exclusive_scan(count)
    perm = _kernels.active().counting_sort_perm(cells, offset,
                                                _kernels.workers())
    particles.reorder(perm)
    fluid_cells = np.flatnonzero(count > 0).astype(np.int64)
    return particles, SpaceHash(offset=offset, count=count,
                                fluid_cells=fluid_cells)
