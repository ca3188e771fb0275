"""Particle storage (SoA), jittered seeding, CFL timestep and advection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .grid import FLUID, MacGrid, interior_box, sample_velocity_many


class ParticleSet:
    """Structure-of-arrays particle state: positions and velocities.

    Arrays are float64 and always share one length. `reorder` writes into a
    kept second buffer and swaps, so re-binning does not reallocate.
    """

    __slots__ = ("pos_x", "pos_y", "pos_z", "vel_x", "vel_y", "vel_z", "_back")

    def __init__(self, pos_x, pos_y, pos_z, vel_x, vel_y, vel_z):
        self.pos_x = np.asarray(pos_x, dtype=np.float64)
        self.pos_y = np.asarray(pos_y, dtype=np.float64)
        self.pos_z = np.asarray(pos_z, dtype=np.float64)
        self.vel_x = np.asarray(vel_x, dtype=np.float64)
        self.vel_y = np.asarray(vel_y, dtype=np.float64)
        self.vel_z = np.asarray(vel_z, dtype=np.float64)
        lengths = {len(a) for a in self.arrays()}
        if len(lengths) != 1:
            raise ValueError("particle arrays must share one length")
        self._back = None

    @classmethod
    def empty(cls) -> "ParticleSet":
        z = np.zeros(0)
        return cls(z, z.copy(), z.copy(), z.copy(), z.copy(), z.copy())

    @property
    def count(self) -> int:
        return len(self.pos_x)

    def arrays(self):
        return (self.pos_x, self.pos_y, self.pos_z,
                self.vel_x, self.vel_y, self.vel_z)

    def copy(self) -> "ParticleSet":
        return ParticleSet(*(a.copy() for a in self.arrays()))

    def extend(self, other: "ParticleSet") -> "ParticleSet":
        return ParticleSet(*(np.concatenate([a, b])
                             for a, b in zip(self.arrays(), other.arrays())))

    def reorder(self, perm: np.ndarray) -> None:
        """Apply a permutation via the spare buffer, then swap buffers."""
        if self._back is None or len(self._back[0]) != self.count:
            self._back = tuple(np.empty(self.count) for _ in range(6))
        back = self._back
        for arr, spare in zip(self.arrays(), back):
            np.take(arr, perm, out=spare)
        old = self.arrays()
        (self.pos_x, self.pos_y, self.pos_z,
         self.vel_x, self.vel_y, self.vel_z) = back
        self._back = old


@dataclass(frozen=True)
class SeedRegion:
    """Axis-aligned box or sphere emission region with a subcell density."""

    kind: str                 # "box" | "sphere"
    a: tuple                  # box: min corner; sphere: center
    b: tuple | float          # box: max corner; sphere: radius
    density: int = 2          # subcells per axis inside each covered cell

    def __post_init__(self):
        if self.kind not in ("box", "sphere"):
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.density < 1:
            raise ValueError("seed density must be >= 1")

    @classmethod
    def box(cls, lo, hi, density: int = 2) -> "SeedRegion":
        return cls("box", tuple(float(x) for x in lo),
                   tuple(float(x) for x in hi), density)

    @classmethod
    def sphere(cls, center, radius: float, density: int = 2) -> "SeedRegion":
        return cls("sphere", tuple(float(x) for x in center),
                   float(radius), density)

    def contains(self, px, py, pz) -> np.ndarray:
        if self.kind == "box":
            (lx, ly, lz), (hx, hy, hz) = self.a, self.b
            return ((px >= lx) & (px <= hx)
                    & (py >= ly) & (py <= hy)
                    & (pz >= lz) & (pz <= hz))
        cx, cy, cz = self.a
        r = self.b
        return ((px - cx) ** 2 + (py - cy) ** 2 + (pz - cz) ** 2) <= r * r


def covered_cells(region: SeedRegion, d) -> np.ndarray:
    """Raw indices of the grid cells whose center lies inside the region."""
    ox, oy, oz = d.origin
    idx = np.arange(d.ncells, dtype=np.int64)
    cx = ox + (idx % d.nx + 0.5) * d.dtau
    cy = oy + ((idx // d.nx) % d.ny + 0.5) * d.dtau
    cz = oz + (idx // (d.nx * d.ny) + 0.5) * d.dtau
    return idx[region.contains(cx, cy, cz)]


def _jittered_positions(cells, subs, density, dims, rng_seed):
    """World positions for (cell, subcell) pairs; jitter is a pure function
    of (rng_seed, cell, subcell) so seeding order never matters."""
    sub_len = dims.dtau / density
    ox, oy, oz = dims.origin
    ci = cells % dims.nx
    cj = (cells // dims.nx) % dims.ny
    ck = cells // (dims.nx * dims.ny)
    si = subs % density
    sj = (subs // density) % density
    sk = subs // (density * density)
    jx = rng.uniform01(rng_seed, cells, subs * 4 + 0)
    jy = rng.uniform01(rng_seed, cells, subs * 4 + 1)
    jz = rng.uniform01(rng_seed, cells, subs * 4 + 2)
    px = ox + ci * dims.dtau + (si + jx) * sub_len
    py = oy + cj * dims.dtau + (sj + jy) * sub_len
    pz = oz + ck * dims.dtau + (sk + jz) * sub_len
    return px, py, pz


def seed(region: SeedRegion, grid: MacGrid, rng_seed: int) -> ParticleSet:
    """Seed one particle into every subcell of every covered cell.

    A cell is covered when its center lies inside the region; it then gets
    exactly density**3 particles, each uniformly placed in its own subcell.
    Velocities start at zero. Deterministic for a given rng_seed.
    """
    rho = region.density
    cells = covered_cells(region, grid.dims)
    nsub = rho ** 3
    if len(cells) == 0:
        return ParticleSet.empty()
    cells_rep = np.repeat(cells, nsub)
    subs = np.tile(np.arange(nsub, dtype=np.int64), len(cells))
    px, py, pz = _jittered_positions(cells_rep, subs, rho, grid.dims, rng_seed)
    zeros = np.zeros(len(px))
    return ParticleSet(px, py, pz, zeros, zeros.copy(), zeros.copy())


# Bridson's guidance: keep between 3 and 12 particles in a fluid cell.
MIN_PER_CELL = 3
MAX_PER_CELL = 12


def reseed(particles: ParticleSet, grid: MacGrid, hash, density: int,
           rng_seed: int):
    """Restore per-cell particle counts and return (particles, fresh hash).

    FLUID cells under the minimum are refilled toward density**3 (capped at
    the maximum); overfull cells drop their highest within-cell indices.
    Requires `particles` in binned order consistent with `hash`. New
    particles take the grid velocity at their position. The returned
    ParticleSet is again in binned order and the returned hash matches it.
    """
    from .binning import SpaceHash, exclusive_scan  # local import: avoid cycle

    d = grid.dims
    count = hash.count
    offset = hash.offset
    fluid = grid.label == FLUID
    target_fill = min(density ** 3, MAX_PER_CELL)

    n_add = np.where(fluid & (count < MIN_PER_CELL),
                     np.maximum(0, target_fill - count), 0)
    new_count = np.minimum(count, MAX_PER_CELL) + n_add
    new_offset = exclusive_scan(new_count)
    total = int(new_count.sum())

    # Survivors: the first min(count, MAX) particles of each cell segment
    # keep their within-cell index, so their destination is directly known.
    n = particles.count
    cells_of = np.repeat(np.arange(d.ncells, dtype=np.int64), count)
    within = np.arange(n, dtype=np.int64) - offset[cells_of]
    keep = within < MAX_PER_CELL
    dest = new_offset[cells_of[keep]] + within[keep]

    out = tuple(np.zeros(total) for _ in range(6))
    for src, dst in zip(particles.arrays(), out):
        dst[dest] = src[keep]

    add_cells = np.flatnonzero(n_add > 0)
    if len(add_cells):
        adds = n_add[add_cells]
        cells_rep = np.repeat(add_cells, adds)
        # new particles use the first free subcell slots, per cell
        base = count[add_cells]
        subs = (np.arange(int(adds.sum()), dtype=np.int64)
                - np.repeat(exclusive_scan(adds), adds)) + np.repeat(base, adds)
        px, py, pz = _jittered_positions(cells_rep, subs, density, d, rng_seed)
        vx, vy, vz = sample_velocity_many(grid, px, py, pz)
        dest_add = (new_offset[cells_rep]
                    + np.minimum(count[cells_rep], MAX_PER_CELL)
                    + (subs - np.repeat(base, adds)))
        for dst, vals in zip(out, (px, py, pz, vx, vy, vz)):
            dst[dest_add] = vals

    new_hash = SpaceHash(offset=new_offset, count=new_count,
                         fluid_cells=np.flatnonzero(new_count > 0).astype(np.int64))
    return ParticleSet(*out), new_hash


def compute_dt(particles: ParticleSet, dtau: float, alpha: float,
               dt_max: float) -> float:
    """CFL-limited timestep: min(dt_max, alpha * dtau / max speed)."""
    assert alpha > 0 and dt_max > 0
    if particles.count == 0:
        return dt_max
    s2 = (particles.vel_x ** 2 + particles.vel_y ** 2 + particles.vel_z ** 2)
    s_max = float(np.sqrt(s2.max()))
    if s_max == 0.0:
        return dt_max
    return min(dt_max, alpha * dtau / s_max)


def advect(particles: ParticleSet, grid: MacGrid, dt: float,
           skin: float) -> ParticleSet:
    """Forward-Euler move by each particle's carried velocity, then clamp.

    Particles leaving the non-SOLID domain are pushed back to `skin`
    distance inside the nearest legal face, per violated axis.
    """
    assert dt > 0
    assert 0 < skin < grid.dims.dtau / 2
    lo, hi = interior_box(grid)
    for axis, pos, vel in ((0, particles.pos_x, particles.vel_x),
                           (1, particles.pos_y, particles.vel_y),
                           (2, particles.pos_z, particles.vel_z)):
        pos += vel * dt
        # only escapees move: in-domain positions stay untouched
        low = pos <= lo[axis]
        high = pos >= hi[axis]
        if low.any():
            pos[low] = lo[axis] + skin
        if high.any():
            pos[high] = hi[axis] - skin
    return particles
