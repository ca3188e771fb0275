"""Particle-grid transfers: hat-kernel gather onto faces, blended readback."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .binning import SpaceHash
from .grid import MacGrid, sample_velocity_many
from .particles import ParticleSet


@dataclass(frozen=True)
class BlendParams:
    """Velocity-change blending weight: 0 is pure smoothing transfer (PIC),
    1 transfers only the grid velocity delta (FLIP)."""

    flip_fraction: float = 0.95

    def __post_init__(self):
        if not 0.0 <= self.flip_fraction <= 1.0:
            raise ValueError("flip_fraction must lie in [0, 1]")


def hat_kernel(dx, dy, dz, dtau: float):
    """Separable triangular kernel with support one cell width per axis."""
    hx = np.maximum(0.0, 1.0 - np.abs(dx / dtau))
    hy = np.maximum(0.0, 1.0 - np.abs(dy / dtau))
    hz = np.maximum(0.0, 1.0 - np.abs(dz / dtau))
    return hx * hy * hz


def p2g(particles: ParticleSet, hash: SpaceHash, grid: MacGrid):
    """Gather kernel-weighted particle velocities onto the face lattices.

    Each face sample becomes the normalized weighted average of nearby
    particle components; faces no particle reaches are set to 0 and
    reported unknown so the extrapolation pass can fill them.
    Returns (known_u, known_v, known_w) boolean masks.
    """
    d = grid.dims
    ox, oy, oz = d.origin
    k = _kernels.active()
    workers = _kernels.workers()
    known = []
    for comp, vel, dst in ((0, particles.vel_x, grid.u),
                           (1, particles.vel_y, grid.v),
                           (2, particles.vel_z, grid.w)):
        values, weights = k.p2g_component(
            comp, vel, particles.pos_x, particles.pos_y, particles.pos_z,
            hash.offset, hash.count, d.nx, d.ny, d.nz, d.dtau, ox, oy, oz,
            workers)
        dst[:] = values
        known.append(weights > 0.0)
    return tuple(known)


def g2p(grid_new: MacGrid, grid_old: MacGrid, particles: ParticleSet,
        blend: BlendParams) -> ParticleSet:
    """Update particle velocities from the grids.

    v <- (1-f) * sample(new) + f * (v + sample(new) - sample(old)), with f
    the flip fraction and trilinear sampling per component.
    """
    if grid_new.dims != grid_old.dims:
        raise ValueError("grid dims mismatch between new and old grids")
    f = blend.flip_fraction
    nx, ny, nz = sample_velocity_many(grid_new, particles.pos_x,
                                      particles.pos_y, particles.pos_z)
    if f == 0.0:
        particles.vel_x[:] = nx
        particles.vel_y[:] = ny
        particles.vel_z[:] = nz
        return particles
    ox, oy, oz = sample_velocity_many(grid_old, particles.pos_x,
                                      particles.pos_y, particles.pos_z)
    particles.vel_x[:] = (1.0 - f) * nx + f * (particles.vel_x + nx - ox)
    particles.vel_y[:] = (1.0 - f) * ny + f * (particles.vel_y + ny - oy)
    particles.vel_z[:] = (1.0 - f) * nz + f * (particles.vel_z + nz - oz)
    return particles
