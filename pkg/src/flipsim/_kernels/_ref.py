"""Pure-NumPy fallback implementations of the hot kernels.

Signatures mirror the compiled ``_core`` extension. Everything here is
single-threaded (the ``workers`` arguments are accepted and ignored) and
deterministic: scatter accumulation uses ``np.bincount``/``np.argsort``
which process elements in a fixed order.
"""

from __future__ import annotations

import numpy as np

# Per-component face-lattice transforms: a component's sample lattice has
# integer coordinates along its own axis and half-offset coordinates along
# the other two. _OFF[comp] is subtracted from position/dtau per axis.
_OFF = {
    0: (0.0, 0.5, 0.5),
    1: (0.5, 0.0, 0.5),
    2: (0.5, 0.5, 0.0),
}


def _lattice_dims(comp: int, nx: int, ny: int, nz: int) -> tuple[int, int, int]:
    if comp == 0:
        return nx + 1, ny, nz
    if comp == 1:
        return nx, ny + 1, nz
    return nx, ny, nz + 1


def _axis_cell(t: np.ndarray, m: int):
    """Clamped base index and fraction for interpolation on an m-sample axis."""
    t = np.clip(t, 0.0, float(m - 1))
    i0 = np.minimum(t.astype(np.int64), max(m - 2, 0))
    return i0, t - i0


def _tri_sample(arr: np.ndarray, mx: int, my: int, mz: int, gx, gy, gz) -> np.ndarray:
    i0, fx = _axis_cell(gx, mx)
    j0, fy = _axis_cell(gy, my)
    k0, fz = _axis_cell(gz, mz)
    i1 = np.minimum(i0 + 1, mx - 1)
    j1 = np.minimum(j0 + 1, my - 1)
    k1 = np.minimum(k0 + 1, mz - 1)

    def at(i, j, k):
        return arr[i + j * mx + k * mx * my]

    c00 = at(i0, j0, k0) * (1 - fx) + at(i1, j0, k0) * fx
    c10 = at(i0, j1, k0) * (1 - fx) + at(i1, j1, k0) * fx
    c01 = at(i0, j0, k1) * (1 - fx) + at(i1, j0, k1) * fx
    c11 = at(i0, j1, k1) * (1 - fx) + at(i1, j1, k1) * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    return c0 * (1 - fz) + c1 * fz


def sample_velocity_many(u, v, w, nx, ny, nz, dtau, ox, oy, oz, px, py, pz, workers=1):
    """Trilinear staggered-lattice velocity samples at each position."""
    gx = (px - ox) / dtau
    gy = (py - oy) / dtau
    gz = (pz - oz) / dtau
    vx = _tri_sample(u, nx + 1, ny, nz, gx, gy - 0.5, gz - 0.5)
    vy = _tri_sample(v, nx, ny + 1, nz, gx - 0.5, gy, gz - 0.5)
    vz = _tri_sample(w, nx, ny, nz + 1, gx - 0.5, gy - 0.5, gz)
    return vx, vy, vz


def p2g_component(comp, vel_p, px, py, pz, offset, count, nx, ny, nz,
                  dtau, ox, oy, oz, workers=1):
    """Kernel-weighted average of particle velocities on one face lattice.

    Returns (values, weights); faces with zero total weight get value 0.
    Implemented as a trilinear scatter over the 8 faces each particle
    touches, which sums exactly the same terms as the per-face gather.
    """
    mx, my, mz = _lattice_dims(comp, nx, ny, nz)
    offx, offy, offz = _OFF[comp]
    gx = (px - ox) / dtau - offx
    gy = (py - oy) / dtau - offy
    gz = (pz - oz) / dtau - offz
    bx = np.floor(gx).astype(np.int64)
    by = np.floor(gy).astype(np.int64)
    bz = np.floor(gz).astype(np.int64)
    fx, fy, fz = gx - bx, gy - by, gz - bz

    nfaces = mx * my * mz
    num = np.zeros(nfaces)
    den = np.zeros(nfaces)
    for dx in (0, 1):
        wx = fx if dx else 1.0 - fx
        ix = bx + dx
        okx = (ix >= 0) & (ix < mx)
        for dy in (0, 1):
            wy = fy if dy else 1.0 - fy
            jy = by + dy
            oky = okx & (jy >= 0) & (jy < my)
            for dz in (0, 1):
                wz = fz if dz else 1.0 - fz
                kz = bz + dz
                ok = oky & (kz >= 0) & (kz < mz)
                wgt = (wx * wy * wz)[ok]
                idx = (ix[ok] + jy[ok] * mx + kz[ok] * mx * my)
                num += np.bincount(idx, weights=wgt * vel_p[ok], minlength=nfaces)
                den += np.bincount(idx, weights=wgt, minlength=nfaces)
    values = np.divide(num, den, out=np.zeros(nfaces), where=den > 0)
    return values, den


def counting_sort_perm(cells, offset, workers=1):
    """Stable permutation ordering particles by cell index."""
    return np.argsort(cells, kind="stable").astype(np.int64)


def _nbr_sum(nbr_rows, x):
    xpad = np.append(x, 0.0)  # nbr index -1 picks up the zero sentinel
    return xpad[nbr_rows].sum(axis=1)


def laplacian_matvec(diag, nbr_rows, x, scale, workers=1):
    return scale * (diag * x - _nbr_sum(nbr_rows, x))


def jacobi_iter(diag, nbr_rows, rhs, x, scale, workers=1):
    return (rhs / scale + _nbr_sum(nbr_rows, x)) / diag


def gs_sweep(diag, nbr_rows, rhs, x, scale):
    """In-place Gauss-Seidel sweep in ascending row order."""
    n = len(diag)
    nbr = nbr_rows
    for r in range(n):
        s = 0.0
        for d in range(6):
            q = nbr[r, d]
            if q >= 0:
                s += x[q]
        x[r] = (rhs[r] / scale + s) / diag[r]


def gs_sweep_rows(rows, diag, nbr_rows, rhs, x, scale, workers=1):
    """Gauss-Seidel update of a mutually uncoupled row subset, in place."""
    xpad = np.append(x, 0.0)
    s = xpad[nbr_rows[rows]].sum(axis=1)
    x[rows] = (rhs[rows] / scale + s) / diag[rows]


def mic0_build(diag, nbr_rows, scale, tau=0.97, sigma=0.25, workers=1):
    """Modified incomplete Cholesky(0) scaling vector, rows in ascending order."""
    n = len(diag)
    precon = np.zeros(n)
    nbr = nbr_rows
    for r in range(n):
        e = diag[r] * scale
        for dprev, o1, o2 in ((0, 3, 5), (2, 1, 5), (4, 1, 3)):
            q = nbr[r, dprev]
            if q >= 0:
                pq = precon[q]
                e -= (scale * pq) ** 2
                others = 0.0
                if nbr[q, o1] >= 0:
                    others -= scale
                if nbr[q, o2] >= 0:
                    others -= scale
                e -= tau * (-scale) * others * pq * pq
        if e < sigma * diag[r] * scale:
            e = diag[r] * scale
        precon[r] = 1.0 / np.sqrt(e)
    return precon


def mic0_apply(precon, nbr_rows, r_vec, scale, workers=1):
    """Apply the MIC(0) preconditioner: forward then backward substitution."""
    n = len(precon)
    nbr = nbr_rows
    q = np.zeros(n)
    for i in range(n):
        t = r_vec[i]
        for dprev in (0, 2, 4):
            nb = nbr[i, dprev]
            if nb >= 0:
                t += scale * precon[nb] * q[nb]
        q[i] = t * precon[i]
    z = np.zeros(n)
    for i in range(n - 1, -1, -1):
        t = q[i]
        for dplus in (1, 3, 5):
            nb = nbr[i, dplus]
            if nb >= 0:
                t += scale * precon[i] * z[nb]
        z[i] = t * precon[i]
    return z


def build_field(px, py, pz, offset, count, nx, ny, nz, dtau, ox, oy, oz,
                mx, my, mz, spacing, fox, foy, foz, radius, particle_radius,
                workers=1):
    """Signed distance from particles on a corner lattice (smooth-blob form).

    Scatter formulation: each particle contributes its decay-kernel weight
    to every lattice corner within the search radius; corners reached by no
    particle get the +radius sentinel.
    """
    ncorners = mx * my * mz
    sk = np.zeros(ncorners)
    sx = np.zeros(ncorners)
    sy = np.zeros(ncorners)
    sz = np.zeros(ncorners)
    if len(px):
        reach = int(np.ceil(radius / spacing))
        bx = np.floor((px - fox) / spacing).astype(np.int64)
        by = np.floor((py - foy) / spacing).astype(np.int64)
        bz = np.floor((pz - foz) / spacing).astype(np.int64)
        for dx in range(-reach, reach + 2):
            ix = bx + dx
            okx = (ix >= 0) & (ix < mx)
            for dy in range(-reach, reach + 2):
                jy = by + dy
                oky = okx & (jy >= 0) & (jy < my)
                for dz in range(-reach, reach + 2):
                    kz = bz + dz
                    ok = oky & (kz >= 0) & (kz < mz)
                    if not ok.any():
                        continue
                    cx = fox + ix[ok] * spacing
                    cy = foy + jy[ok] * spacing
                    cz = foz + kz[ok] * spacing
                    ddx = px[ok] - cx
                    ddy = py[ok] - cy
                    ddz = pz[ok] - cz
                    s2 = (ddx * ddx + ddy * ddy + ddz * ddz) / (radius * radius)
                    k = np.maximum(0.0, 1.0 - s2) ** 3
                    near = k > 0.0
                    if not near.any():
                        continue
                    idx = (ix[ok] + jy[ok] * mx + kz[ok] * mx * my)[near]
                    kk = k[near]
                    sk += np.bincount(idx, weights=kk, minlength=ncorners)
                    sx += np.bincount(idx, weights=kk * px[ok][near], minlength=ncorners)
                    sy += np.bincount(idx, weights=kk * py[ok][near], minlength=ncorners)
                    sz += np.bincount(idx, weights=kk * pz[ok][near], minlength=ncorners)

    phi = np.full(ncorners, radius)
    hit = np.flatnonzero(sk > 0.0)
    if len(hit):
        cxp = fox + (hit % mx) * spacing
        cyp = foy + ((hit // mx) % my) * spacing
        czp = foz + (hit // (mx * my)) * spacing
        dist = np.sqrt(
            (cxp - sx[hit] / sk[hit]) ** 2
            + (cyp - sy[hit] / sk[hit]) ** 2
            + (czp - sz[hit] / sk[hit]) ** 2
        )
        phi[hit] = dist - particle_radius
    return phi


def mc_emit(case_idx, ids, mx, my, mz, tri_packed, edge_corner_off, edge_axis,
            workers=1):
    """Emit triangles as vertex-id triples, in (cube scanline, slot) order.

    ``ids`` is a (3, ncorners) array of per-edge vertex ids (-1 where the
    edge is not crossed); ``tri_packed`` is the 256x16 case table.
    """
    cx = mx - 1
    cy = my - 1
    active = np.flatnonzero((case_idx != 0) & (case_idx != 255))
    tris = []
    for cube in active:
        ci = cube % cx
        cj = (cube // cx) % cy
        ck = cube // (cx * cy)
        base = ci + cj * mx + ck * mx * my
        row = tri_packed[case_idx[cube]]
        for t in range(0, 16, 3):
            e0 = row[t]
            if e0 < 0:
                break
            e1 = row[t + 1]
            e2 = row[t + 2]
            tris.append((
                ids[edge_axis[e0], base + edge_corner_off[e0]],
                ids[edge_axis[e1], base + edge_corner_off[e1]],
                ids[edge_axis[e2], base + edge_corner_off[e2]],
            ))
    if not tris:
        return np.zeros((0, 3), dtype=np.int64)
    return np.array(tris, dtype=np.int64)
