"""Surface reconstruction: particle SDF, cube-marching triangulation, OBJ.

The scalar field is sampled on its own corner lattice, decoupled from the
simulation grid, so mesh resolution is a free knob.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .binning import SpaceHash
from .grid import GridDims
from .mc_tables import CORNER_OFFSETS, EDGE_CANON, TRI_TABLE_PACKED
from .particles import ParticleSet

log = logging.getLogger(__name__)


@dataclass
class ScalarField:
    """Signed distances on an (mx, my, mz) corner lattice, x-fastest flat."""

    values: np.ndarray
    dims: tuple[int, int, int]
    spacing: float
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        mx, my, mz = self.dims
        if len(self.values) != mx * my * mz:
            raise ValueError("field value count does not match lattice dims")


@dataclass(frozen=True)
class FieldParams:
    """Search radius and per-particle influence radius (uniform)."""

    radius: float
    particle_radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("search radius must be positive")
        if not 0 < self.particle_radius <= self.radius:
            raise ValueError("particle radius must lie in (0, radius]")

    @classmethod
    def defaults(cls, dtau: float) -> "FieldParams":
        r = 0.5 * dtau
        return cls(radius=2.0 * r, particle_radius=r)


@dataclass
class TriangleMesh:
    vertices: np.ndarray   # (n, 3)
    normals: np.ndarray    # (n, 3) unit vectors
    triangles: np.ndarray  # (m, 3) vertex indices

    @classmethod
    def empty(cls) -> "TriangleMesh":
        return cls(np.zeros((0, 3)), np.zeros((0, 3)),
                   np.zeros((0, 3), dtype=np.int64))


def decay_kernel(s):
    """Smooth weight max(0, (1 - s^2)^3); zero from s = 1 outward."""
    s = np.asarray(s, dtype=np.float64)
    out = np.maximum(0.0, (1.0 - s * s) ** 3)
    return float(out) if out.ndim == 0 else out


def build_field(particles: ParticleSet, hash: SpaceHash, sim_dims: GridDims,
                lattice_dims: tuple[int, int, int], spacing: float,
                lattice_origin, params: FieldParams) -> ScalarField:
    """Smooth-blob signed distance at every lattice corner.

    phi(x) = |x - weighted mean of nearby particle positions| minus the
    weighted mean influence radius, weights from the decay kernel over
    distance / search radius. Corners reached by no particle get +radius.
    """
    mx, my, mz = lattice_dims
    ox, oy, oz = sim_dims.origin
    fox, foy, foz = lattice_origin
    phi = _kernels.active().build_field(
        particles.pos_x, particles.pos_y, particles.pos_z,
        hash.offset, hash.count,
        sim_dims.nx, sim_dims.ny, sim_dims.nz, sim_dims.dtau, ox, oy, oz,
        mx, my, mz, spacing, fox, foy, foz,
        params.radius, params.particle_radius, _kernels.workers())
    return ScalarField(phi, (mx, my, mz), spacing, tuple(lattice_origin))


def _edge_offsets_flat(mx: int, my: int):
    off = np.empty(12, dtype=np.int64)
    axis = np.empty(12, dtype=np.int8)
    for e, ((dx, dy, dz), ax) in enumerate(EDGE_CANON):
        off[e] = dx + dy * mx + dz * mx * my
        axis[e] = ax
    return off, axis


def marching_cubes(field: ScalarField, isovalue: float = 0.0) -> TriangleMesh:
    """Triangulate the isosurface with the 256-case cube tables.

    Corners strictly below the isovalue count as inside. Shared edge
    vertices are deduplicated via canonical edge keys; each vertex sits at
    the linear-interpolation root along its edge. Winding follows the case
    table, oriented so normals point toward increasing field values.
    """
    mx, my, mz = field.dims
    if min(mx, my, mz) < 2:
        raise ValueError("field needs at least 2 corners per axis")
    vals = field.values
    if np.isnan(vals).any():
        raise ValueError("field contains NaN")
    v3 = vals.reshape(mz, my, mx)
    inside3 = v3 < isovalue

    cx, cy, cz = mx - 1, my - 1, mz - 1
    case3 = np.zeros((cz, cy, cx), dtype=np.int64)
    for bit, (dx, dy, dz) in enumerate(CORNER_OFFSETS):
        block = inside3[dz:cz + dz, dy:cy + dy, dx:cx + dx]
        case3 += block.astype(np.int64) << bit
    case_flat = np.ascontiguousarray(case3.reshape(-1))

    # crossed-edge flags, stored per (corner, axis); flattening this
    # [k, j, i, axis] array yields the canonical key order 3*corner + axis
    crossed = np.zeros((mz, my, mx, 3), dtype=bool)
    crossed[:, :, :-1, 0] = inside3[:, :, :-1] != inside3[:, :, 1:]
    crossed[:, :-1, :, 1] = inside3[:, :-1, :] != inside3[:, 1:, :]
    crossed[:-1, :, :, 2] = inside3[:-1, :, :] != inside3[1:, :, :]
    cr_flat = crossed.reshape(-1)
    keys = np.flatnonzero(cr_flat)
    nverts = len(keys)
    ids_flat = np.full(3 * mx * my * mz, -1, dtype=np.int64)
    ids_flat[keys] = np.arange(nverts, dtype=np.int64)
    ids = np.ascontiguousarray(ids_flat.reshape(-1, 3).T)

    corners = keys // 3
    axes = keys % 3
    strides = np.array([1, mx, mx * my], dtype=np.int64)
    fa = vals[corners]
    fb = vals[corners + strides[axes]]
    t = (isovalue - fa) / (fb - fa)
    ci = corners % mx
    cj = (corners // mx) % my
    ck = corners // (mx * my)
    fox, foy, foz = field.origin
    verts = np.empty((nverts, 3))
    verts[:, 0] = fox + (ci + t * (axes == 0)) * field.spacing
    verts[:, 1] = foy + (cj + t * (axes == 1)) * field.spacing
    verts[:, 2] = foz + (ck + t * (axes == 2)) * field.spacing

    off, axis_tab = _edge_offsets_flat(mx, my)
    tris = _kernels.active().mc_emit(case_flat, ids, mx, my, mz,
                                     TRI_TABLE_PACKED, off, axis_tab,
                                     _kernels.workers())
    # table winding faces the below-isovalue side; flip so triangle normals
    # point toward increasing field values (outward for a signed distance)
    tris = np.ascontiguousarray(tris[:, ::-1])
    mesh = TriangleMesh(verts, np.zeros((nverts, 3)), tris)
    vertex_normals(mesh)
    return mesh


def vertex_normals(mesh: TriangleMesh) -> TriangleMesh:
    """Area-inverse-weighted normals: small incident faces dominate.

    Face orientation comes from the triangle winding; exactly degenerate
    (zero-area) triangles are dropped from the weighting.
    """
    tris = mesh.triangles
    verts = mesh.vertices
    if len(tris) == 0:
        mesh.normals[:] = 0.0
        if len(mesh.normals):
            mesh.normals[:, 2] = 1.0
        return mesh
    a = verts[tris[:, 0]]
    b = verts[tris[:, 1]]
    c = verts[tris[:, 2]]
    n = np.cross(b - a, c - a)
    n2 = np.einsum("ij,ij->i", n, n)
    keep = n2 > 1e-300
    dropped = int((~keep).sum())
    if dropped:
        log.info("dropped %d zero-area triangle(s) from normal weighting",
                 dropped)
    # unit normal / area = 2 n / |n|^2
    contrib = 2.0 * n[keep] / n2[keep, None]
    acc = np.zeros_like(mesh.normals)
    for corner in range(3):
        np.add.at(acc, tris[keep, corner], contrib)
    norms = np.sqrt(np.einsum("ij,ij->i", acc, acc))
    ok = norms > 0
    mesh.normals[ok] = acc[ok] / norms[ok, None]
    mesh.normals[~ok] = (0.0, 0.0, 1.0)
    return mesh


def export_mesh(mesh: TriangleMesh, path) -> None:
    """Write Wavefront OBJ: v/vn lines then f with 1-based v//vn indices."""
    lines = []
    for x, y, z in mesh.vertices:
        lines.append(f"v {float(x)!r} {float(y)!r} {float(z)!r}")
    for x, y, z in mesh.normals:
        lines.append(f"vn {float(x)!r} {float(y)!r} {float(z)!r}")
    for i, j, k in mesh.triangles + 1:
        lines.append(f"f {i}//{i} {j}//{j} {k}//{k}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
        if lines:
            fh.write("\n")
