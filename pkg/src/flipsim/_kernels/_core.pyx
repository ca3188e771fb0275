# cython: language_level=3
"""Compiled kernels: gather-style transfers, solver sweeps, field build, MC.

Parallel loops are pure gathers (each iteration owns one output element and
accumulates in a fixed order), so results are bit-identical for any thread
count. Serial loops (counting sort, Gauss-Seidel, incomplete Cholesky) keep
their mandated orderings.
"""

import numpy as np

cimport cython
from cython.parallel cimport prange
from libc.math cimport fabs, floor, sqrt


cdef inline double _hat(double r) noexcept nogil:
    r = fabs(r)
    return 1.0 - r if r < 1.0 else 0.0


cdef inline double _tri_one(const double[::1] arr, Py_ssize_t mx, Py_ssize_t my,
                            Py_ssize_t mz, double gx, double gy, double gz) noexcept nogil:
    cdef Py_ssize_t i0, j0, k0, i1, j1, k1
    cdef double fx, fy, fz, c00, c10, c01, c11, c0, c1
    if gx < 0.0:
        gx = 0.0
    if gx > mx - 1.0:
        gx = mx - 1.0
    if gy < 0.0:
        gy = 0.0
    if gy > my - 1.0:
        gy = my - 1.0
    if gz < 0.0:
        gz = 0.0
    if gz > mz - 1.0:
        gz = mz - 1.0
    i0 = <Py_ssize_t>gx
    j0 = <Py_ssize_t>gy
    k0 = <Py_ssize_t>gz
    if i0 > mx - 2:
        i0 = mx - 2
    if j0 > my - 2:
        j0 = my - 2
    if k0 > mz - 2:
        k0 = mz - 2
    if i0 < 0:
        i0 = 0
    if j0 < 0:
        j0 = 0
    if k0 < 0:
        k0 = 0
    fx = gx - i0
    fy = gy - j0
    fz = gz - k0
    i1 = i0 + 1 if i0 + 1 < mx else mx - 1
    j1 = j0 + 1 if j0 + 1 < my else my - 1
    k1 = k0 + 1 if k0 + 1 < mz else mz - 1
    c00 = arr[i0 + j0 * mx + k0 * mx * my] * (1.0 - fx) + arr[i1 + j0 * mx + k0 * mx * my] * fx
    c10 = arr[i0 + j1 * mx + k0 * mx * my] * (1.0 - fx) + arr[i1 + j1 * mx + k0 * mx * my] * fx
    c01 = arr[i0 + j0 * mx + k1 * mx * my] * (1.0 - fx) + arr[i1 + j0 * mx + k1 * mx * my] * fx
    c11 = arr[i0 + j1 * mx + k1 * mx * my] * (1.0 - fx) + arr[i1 + j1 * mx + k1 * mx * my] * fx
    c0 = c00 * (1.0 - fy) + c10 * fy
    c1 = c01 * (1.0 - fy) + c11 * fy
    return c0 * (1.0 - fz) + c1 * fz


def sample_velocity_many(const double[::1] u, const double[::1] v, const double[::1] w,
                         Py_ssize_t nx, Py_ssize_t ny, Py_ssize_t nz, double dtau,
                         double ox, double oy, double oz,
                         const double[::1] px, const double[::1] py, const double[::1] pz,
                         int workers=1):
    cdef Py_ssize_t n = px.shape[0]
    vx_arr = np.empty(n)
    vy_arr = np.empty(n)
    vz_arr = np.empty(n)
    cdef double[::1] vx = vx_arr
    cdef double[::1] vy = vy_arr
    cdef double[::1] vz = vz_arr
    cdef Py_ssize_t t
    cdef double gx, gy, gz
    cdef int nt = workers if workers > 0 else 1
    for t in prange(n, nogil=True, schedule="static", num_threads=nt):
        gx = (px[t] - ox) / dtau
        gy = (py[t] - oy) / dtau
        gz = (pz[t] - oz) / dtau
        vx[t] = _tri_one(u, nx + 1, ny, nz, gx, gy - 0.5, gz - 0.5)
        vy[t] = _tri_one(v, nx, ny + 1, nz, gx - 0.5, gy, gz - 0.5)
        vz[t] = _tri_one(w, nx, ny, nz + 1, gx - 0.5, gy - 0.5, gz)
    return vx_arr, vy_arr, vz_arr


def p2g_component(int comp, const double[::1] vel_p,
                  const double[::1] px, const double[::1] py, const double[::1] pz,
                  const long[::1] offset, const long[::1] count,
                  Py_ssize_t nx, Py_ssize_t ny, Py_ssize_t nz, double dtau,
                  double ox, double oy, double oz, int workers=1):
    """Per-face gather of kernel-weighted particle velocities (one component).

    Accumulation is compensated (Kahan) per face in hash order, so the sums
    are independent of which thread owns the face.
    """
    cdef Py_ssize_t fnx, fny, fnz
    cdef double offx, offy, offz
    if comp == 0:
        fnx, fny, fnz = nx + 1, ny, nz
        offx, offy, offz = 0.0, 0.5, 0.5
    elif comp == 1:
        fnx, fny, fnz = nx, ny + 1, nz
        offx, offy, offz = 0.5, 0.0, 0.5
    else:
        fnx, fny, fnz = nx, ny, nz + 1
        offx, offy, offz = 0.5, 0.5, 0.0

    cdef Py_ssize_t nfaces = fnx * fny * fnz
    out_arr = np.zeros(nfaces)
    den_arr = np.zeros(nfaces)
    cdef double[::1] out = out_arr
    cdef double[::1] den = den_arr
    cdef Py_ssize_t f, fi, fj, fk, cx, cy, cz, cxlo, cxhi, cylo, cyhi, czlo, czhi
    cdef Py_ssize_t cell, t, t0, t1
    cdef double fpx, fpy, fpz, wgt, num, dsum, cn, cd, yk, tk
    cdef int nt = workers if workers > 0 else 1

    for f in prange(nfaces, nogil=True, schedule="static", num_threads=nt):
        fi = f % fnx
        fj = (f // fnx) % fny
        fk = f // (fnx * fny)
        fpx = ox + (fi + offx) * dtau
        fpy = oy + (fj + offy) * dtau
        fpz = oz + (fk + offz) * dtau
        # kernel support spans 2 cells along the component axis, 3 along others
        cxlo = fi - 1
        cxhi = fi if comp == 0 else fi + 1
        cylo = fj - 1
        cyhi = fj if comp == 1 else fj + 1
        czlo = fk - 1
        czhi = fk if comp == 2 else fk + 1
        if cxlo < 0:
            cxlo = 0
        if cylo < 0:
            cylo = 0
        if czlo < 0:
            czlo = 0
        if cxhi > nx - 1:
            cxhi = nx - 1
        if cyhi > ny - 1:
            cyhi = ny - 1
        if czhi > nz - 1:
            czhi = nz - 1
        num = 0.0
        dsum = 0.0
        cn = 0.0
        cd = 0.0
        for cz in range(czlo, czhi + 1):
            for cy in range(cylo, cyhi + 1):
                for cx in range(cxlo, cxhi + 1):
                    cell = cx + cy * nx + cz * nx * ny
                    t0 = offset[cell]
                    t1 = t0 + count[cell]
                    for t in range(t0, t1):
                        wgt = (_hat((px[t] - fpx) / dtau)
                               * _hat((py[t] - fpy) / dtau)
                               * _hat((pz[t] - fpz) / dtau))
                        if wgt > 0.0:
                            yk = wgt * vel_p[t] - cn
                            tk = num + yk
                            cn = (tk - num) - yk
                            num = tk
                            yk = wgt - cd
                            tk = dsum + yk
                            cd = (tk - dsum) - yk
                            dsum = tk
        den[f] = dsum
        out[f] = num / dsum if dsum > 0.0 else 0.0
    return out_arr, den_arr


def counting_sort_perm(const long[::1] cells, const long[::1] offset, int workers=1):
    """Stable counting-sort permutation: sequential scatter with per-cell cursors."""
    cdef Py_ssize_t n = cells.shape[0]
    perm_arr = np.empty(n, dtype=np.int64)
    cursor_arr = np.asarray(offset).copy()
    cdef long[::1] perm = perm_arr
    cdef long[::1] cursor = cursor_arr
    cdef Py_ssize_t t
    cdef long c
    with nogil:
        for t in range(n):
            c = cells[t]
            perm[cursor[c]] = t
            cursor[c] = cursor[c] + 1
    return perm_arr


def laplacian_matvec(const double[::1] diag, const long[:, ::1] nbr_rows,
                     const double[::1] x, double scale, int workers=1):
    cdef Py_ssize_t n = diag.shape[0]
    y_arr = np.empty(n)
    cdef double[::1] y = y_arr
    cdef Py_ssize_t r
    cdef int d
    cdef long q
    cdef double s
    cdef int nt = workers if workers > 0 else 1
    for r in prange(n, nogil=True, schedule="static", num_threads=nt):
        s = 0.0
        for d in range(6):
            q = nbr_rows[r, d]
            if q >= 0:
                s = s + x[q]
        y[r] = scale * (diag[r] * x[r] - s)
    return y_arr


def jacobi_iter(const double[::1] diag, const long[:, ::1] nbr_rows,
                const double[::1] rhs, const double[::1] x, double scale,
                int workers=1):
    cdef Py_ssize_t n = diag.shape[0]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t r
    cdef int d
    cdef long q
    cdef double s
    cdef int nt = workers if workers > 0 else 1
    for r in prange(n, nogil=True, schedule="static", num_threads=nt):
        s = 0.0
        for d in range(6):
            q = nbr_rows[r, d]
            if q >= 0:
                s = s + x[q]
        out[r] = (rhs[r] / scale + s) / diag[r]
    return out_arr


def gs_sweep(const double[::1] diag, const long[:, ::1] nbr_rows,
             const double[::1] rhs, double[::1] x, double scale):
    """In-place Gauss-Seidel sweep in ascending row order."""
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t r
    cdef int d
    cdef long q
    cdef double s
    with nogil:
        for r in range(n):
            s = 0.0
            for d in range(6):
                q = nbr_rows[r, d]
                if q >= 0:
                    s += x[q]
            x[r] = (rhs[r] / scale + s) / diag[r]


def gs_sweep_rows(const long[::1] rows, const double[::1] diag,
                  const long[:, ::1] nbr_rows, const double[::1] rhs,
                  double[::1] x, double scale, int workers=1):
    """Gauss-Seidel update of a mutually uncoupled row subset, in place."""
    cdef Py_ssize_t n = rows.shape[0]
    cdef Py_ssize_t i, r
    cdef int d
    cdef long q
    cdef double s
    cdef int nt = workers if workers > 0 else 1
    for i in prange(n, nogil=True, schedule="static", num_threads=nt):
        r = rows[i]
        s = 0.0
        for d in range(6):
            q = nbr_rows[r, d]
            if q >= 0:
                s = s + x[q]
        x[r] = (rhs[r] / scale + s) / diag[r]


def mic0_build(const double[::1] diag, const long[:, ::1] nbr_rows, double scale,
               double tau=0.97, double sigma=0.25, int workers=1):
    """Modified incomplete Cholesky(0) scaling vector, rows in ascending order."""
    cdef Py_ssize_t n = diag.shape[0]
    precon_arr = np.zeros(n)
    cdef double[::1] precon = precon_arr
    cdef Py_ssize_t r
    cdef long q
    cdef double e, pq, others
    cdef int pair
    cdef int dprev[3]
    cdef int o1[3]
    cdef int o2[3]
    dprev[0], o1[0], o2[0] = 0, 3, 5
    dprev[1], o1[1], o2[1] = 2, 1, 5
    dprev[2], o1[2], o2[2] = 4, 1, 3
    with nogil:
        for r in range(n):
            e = diag[r] * scale
            for pair in range(3):
                q = nbr_rows[r, dprev[pair]]
                if q >= 0:
                    pq = precon[q]
                    e -= (scale * pq) * (scale * pq)
                    others = 0.0
                    if nbr_rows[q, o1[pair]] >= 0:
                        others -= scale
                    if nbr_rows[q, o2[pair]] >= 0:
                        others -= scale
                    e -= tau * (-scale) * others * pq * pq
            if e < sigma * diag[r] * scale:
                e = diag[r] * scale
            precon[r] = 1.0 / sqrt(e)
    return precon_arr


def mic0_apply(const double[::1] precon, const long[:, ::1] nbr_rows,
               const double[::1] r_vec, double scale, int workers=1):
    """Apply the MIC(0) preconditioner: forward then backward substitution."""
    cdef Py_ssize_t n = precon.shape[0]
    q_arr = np.zeros(n)
    z_arr = np.zeros(n)
    cdef double[::1] q = q_arr
    cdef double[::1] z = z_arr
    cdef Py_ssize_t i
    cdef long nb
    cdef double t
    with nogil:
        for i in range(n):
            t = r_vec[i]
            nb = nbr_rows[i, 0]
            if nb >= 0:
                t += scale * precon[nb] * q[nb]
            nb = nbr_rows[i, 2]
            if nb >= 0:
                t += scale * precon[nb] * q[nb]
            nb = nbr_rows[i, 4]
            if nb >= 0:
                t += scale * precon[nb] * q[nb]
            q[i] = t * precon[i]
        for i in range(n - 1, -1, -1):
            t = q[i]
            nb = nbr_rows[i, 1]
            if nb >= 0:
                t += scale * precon[i] * z[nb]
            nb = nbr_rows[i, 3]
            if nb >= 0:
                t += scale * precon[i] * z[nb]
            nb = nbr_rows[i, 5]
            if nb >= 0:
                t += scale * precon[i] * z[nb]
            z[i] = t * precon[i]
    return z_arr


def build_field(const double[::1] px, const double[::1] py, const double[::1] pz,
                const long[::1] offset, const long[::1] count,
                Py_ssize_t nx, Py_ssize_t ny, Py_ssize_t nz, double dtau,
                double ox, double oy, double oz,
                Py_ssize_t mx, Py_ssize_t my, Py_ssize_t mz, double spacing,
                double fox, double foy, double foz,
                double radius, double particle_radius, int workers=1):
    """Signed distance from particles on a corner lattice (smooth-blob form).

    Per-corner gather over the simulation-grid hash cells intersecting the
    search ball; corners with no particle in range get the +radius sentinel.
    """
    cdef Py_ssize_t ncorners = mx * my * mz
    phi_arr = np.empty(ncorners)
    cdef double[::1] phi = phi_arr
    cdef Py_ssize_t q, ci, cj, ck, cxlo, cxhi, cylo, cyhi, czlo, czhi
    cdef Py_ssize_t cx, cy, cz, cell, t, t0, t1
    cdef double posx, posy, posz, sk, sxx, syy, szz, ddx, ddy, ddz, s2, kk, dist
    cdef double inv_r2 = 1.0 / (radius * radius)
    cdef int nt = workers if workers > 0 else 1

    for q in prange(ncorners, nogil=True, schedule="static", num_threads=nt):
        ci = q % mx
        cj = (q // mx) % my
        ck = q // (mx * my)
        posx = fox + ci * spacing
        posy = foy + cj * spacing
        posz = foz + ck * spacing
        cxlo = <Py_ssize_t>floor((posx - radius - ox) / dtau)
        cxhi = <Py_ssize_t>floor((posx + radius - ox) / dtau)
        cylo = <Py_ssize_t>floor((posy - radius - oy) / dtau)
        cyhi = <Py_ssize_t>floor((posy + radius - oy) / dtau)
        czlo = <Py_ssize_t>floor((posz - radius - oz) / dtau)
        czhi = <Py_ssize_t>floor((posz + radius - oz) / dtau)
        if cxlo < 0:
            cxlo = 0
        if cylo < 0:
            cylo = 0
        if czlo < 0:
            czlo = 0
        if cxhi > nx - 1:
            cxhi = nx - 1
        if cyhi > ny - 1:
            cyhi = ny - 1
        if czhi > nz - 1:
            czhi = nz - 1
        sk = 0.0
        sxx = 0.0
        syy = 0.0
        szz = 0.0
        for cz in range(czlo, czhi + 1):
            for cy in range(cylo, cyhi + 1):
                for cx in range(cxlo, cxhi + 1):
                    cell = cx + cy * nx + cz * nx * ny
                    t0 = offset[cell]
                    t1 = t0 + count[cell]
                    for t in range(t0, t1):
                        ddx = px[t] - posx
                        ddy = py[t] - posy
                        ddz = pz[t] - posz
                        s2 = (ddx * ddx + ddy * ddy + ddz * ddz) * inv_r2
                        if s2 < 1.0:
                            kk = (1.0 - s2) * (1.0 - s2) * (1.0 - s2)
                            sk = sk + kk
                            sxx = sxx + kk * px[t]
                            syy = syy + kk * py[t]
                            szz = szz + kk * pz[t]
        if sk > 0.0:
            ddx = posx - sxx / sk
            ddy = posy - syy / sk
            ddz = posz - szz / sk
            dist = sqrt(ddx * ddx + ddy * ddy + ddz * ddz)
            phi[q] = dist - particle_radius
        else:
            phi[q] = radius
    return phi_arr


def mc_emit(const long[::1] case_idx, const long[:, ::1] ids,
            Py_ssize_t mx, Py_ssize_t my, Py_ssize_t mz,
            const signed char[:, ::1] tri_packed,
            const long[::1] edge_corner_off, const signed char[::1] edge_axis,
            int workers=1):
    """Emit triangles as vertex-id triples, in (cube scanline, slot) order."""
    cdef Py_ssize_t cx = mx - 1
    cdef Py_ssize_t cy = my - 1
    cdef Py_ssize_t ncubes = case_idx.shape[0]
    cdef Py_ssize_t cube, base, ci, cj, ck, ntri, pos
    cdef long c
    cdef int t
    cdef signed char e
    ntri = 0
    with nogil:
        for cube in range(ncubes):
            c = case_idx[cube]
            if c == 0 or c == 255:
                continue
            for t in range(0, 16, 3):
                if tri_packed[c, t] < 0:
                    break
                ntri += 1
    tris_arr = np.empty((ntri, 3), dtype=np.int64)
    cdef long[:, ::1] tris = tris_arr
    pos = 0
    with nogil:
        for cube in range(ncubes):
            c = case_idx[cube]
            if c == 0 or c == 255:
                continue
            ci = cube % cx
            cj = (cube // cx) % cy
            ck = cube // (cx * cy)
            base = ci + cj * mx + ck * mx * my
            for t in range(0, 16, 3):
                e = tri_packed[c, t]
                if e < 0:
                    break
                tris[pos, 0] = ids[edge_axis[e], base + edge_corner_off[e]]
                e = tri_packed[c, t + 1]
                tris[pos, 1] = ids[edge_axis[e], base + edge_corner_off[e]]
                e = tri_packed[c, t + 2]
                tris[pos, 2] = ids[edge_axis[e], base + edge_corner_off[e]]
                pos += 1
    return tris_arr
