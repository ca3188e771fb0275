import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flipsim.binning import bin_particles
from flipsim.grid import GridDims, MacGrid, set_solid_shell
from flipsim.particles import ParticleSet, SeedRegion, seed
from flipsim.transfer import BlendParams, g2p, hat_kernel, p2g

DIMS = GridDims(6, 6, 6, 1.0 / 6.0)


def face_positions(dims, comp):
    """World positions of every face sample of one component lattice."""
    if comp == 0:
        shape = (dims.nx + 1, dims.ny, dims.nz)
        off = (0.0, 0.5, 0.5)
    elif comp == 1:
        shape = (dims.nx, dims.ny + 1, dims.nz)
        off = (0.5, 0.0, 0.5)
    else:
        shape = (dims.nx, dims.ny, dims.nz + 1)
        off = (0.5, 0.5, 0.0)
    mx, my, mz = shape
    idx = np.arange(mx * my * mz)
    o = np.asarray(dims.origin)
    pos = np.empty((len(idx), 3))
    pos[:, 0] = o[0] + (idx % mx + off[0]) * dims.dtau
    pos[:, 1] = o[1] + ((idx // mx) % my + off[1]) * dims.dtau
    pos[:, 2] = o[2] + (idx // (mx * my) + off[2]) * dims.dtau
    return pos


def p2g_oracle(dims, comp, ps):
    """Brute-force all-pairs evaluation of the weighted-average transfer."""
    pos = face_positions(dims, comp)
    vel = (ps.vel_x, ps.vel_y, ps.vel_z)[comp]
    values = np.zeros(len(pos))
    weights = np.zeros(len(pos))
    for f, fp in enumerate(pos):
        w = hat_kernel(ps.pos_x - fp[0], ps.pos_y - fp[1], ps.pos_z - fp[2],
                       dims.dtau)
        sw = w.sum()
        weights[f] = sw
        if sw > 0:
            values[f] = (w * vel).sum() / sw
    return values, weights


def random_particles(n, seed_=0, lo=0.0, hi=1.0):
    rng = np.random.default_rng(seed_)
    pos = lo + rng.random((n, 3)) * (hi - lo)
    vel = rng.normal(size=(n, 3))
    return ParticleSet(pos[:, 0].copy(), pos[:, 1].copy(), pos[:, 2].copy(),
                       vel[:, 0].copy(), vel[:, 1].copy(), vel[:, 2].copy())


class TestHatKernel:
    def test_peak_at_zero(self):
        assert hat_kernel(0.0, 0.0, 0.0, 0.5) == 1.0

    def test_zero_at_support_edge(self):
        assert hat_kernel(0.5, 0.1, 0.0, 0.5) == 0.0
        assert hat_kernel(-0.5, 0.0, 0.0, 0.5) == 0.0

    def test_half_cell_offset_each_axis(self):
        dtau = 0.25
        val = hat_kernel(dtau / 2, dtau / 2, dtau / 2, dtau)
        assert val == pytest.approx(0.125, abs=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
    def test_bounds_and_support(self, dx, dy, dz):
        w = hat_kernel(dx, dy, dz, 1.0)
        assert 0.0 <= w <= 1.0
        if max(abs(dx), abs(dy), abs(dz)) >= 1.0:
            assert w == 0.0


class TestP2G:
    def test_constant_velocity_everywhere(self, backend):
        ps = random_particles(500, seed_=1)
        ps.vel_x[:] = 2.5
        ps.vel_y[:] = -1.0
        ps.vel_z[:] = 0.75
        ps, h = bin_particles(ps, DIMS)
        grid = MacGrid(DIMS)
        ku, kv, kw = p2g(ps, h, grid)
        assert np.allclose(grid.u[ku], 2.5, atol=1e-12)
        assert np.allclose(grid.v[kv], -1.0, atol=1e-12)
        assert np.allclose(grid.w[kw], 0.75, atol=1e-12)
        assert (grid.u[~ku] == 0).all()

    def test_single_particle_at_face_sample(self, backend):
        d = DIMS
        ps = ParticleSet(np.array([2 * d.dtau]), np.array([2.5 * d.dtau]),
                         np.array([2.5 * d.dtau]), np.array([3.3]),
                         np.array([0.0]), np.array([0.0]))
        ps, h = bin_particles(ps, d)
        grid = MacGrid(d)
        p2g(ps, h, grid)
        u3 = grid.u3()
        assert u3[2, 2, 2] == pytest.approx(3.3, rel=1e-15)

    @pytest.mark.parametrize("comp", [0, 1, 2])
    def test_matches_all_pairs_oracle(self, backend, comp):
        ps = random_particles(1000, seed_=3)
        ps, h = bin_particles(ps, DIMS)
        expect_vals, expect_w = p2g_oracle(DIMS, comp, ps)
        grid = MacGrid(DIMS)
        known = p2g(ps, h, grid)
        got = (grid.u, grid.v, grid.w)[comp]
        scale = np.maximum(1.0, np.abs(expect_vals))
        assert (np.abs(got - expect_vals) / scale).max() < 1e-9
        assert np.array_equal(known[comp], expect_w > 0)

    def test_max_principle_per_component(self, backend):
        ps = random_particles(2000, seed_=4)
        ps, h = bin_particles(ps, DIMS)
        grid = MacGrid(DIMS)
        ku, kv, kw = p2g(ps, h, grid)
        assert grid.u[ku].min() >= ps.vel_x.min() - 1e-12
        assert grid.u[ku].max() <= ps.vel_x.max() + 1e-12

    def test_kernel_support_far_particle_contributes_zero(self, backend):
        d = DIMS
        # one particle far from the probed face: exactly zero influence
        ps = ParticleSet(np.array([0.9]), np.array([0.9]), np.array([0.9]),
                         np.array([100.0]), np.array([0.0]), np.array([0.0]))
        ps, h = bin_particles(ps, d)
        grid = MacGrid(d)
        ku, _, _ = p2g(ps, h, grid)
        assert not ku.reshape(d.nz, d.ny, d.nx + 1)[0, 0, 0]
        assert grid.u3()[0, 0, 0] == 0.0


class TestG2P:
    def grids(self):
        new = MacGrid(DIMS)
        old = MacGrid(DIMS)
        rng = np.random.default_rng(5)
        new.u[:] = rng.normal(size=new.u.shape)
        old.u[:] = rng.normal(size=old.u.shape)
        return new, old

    def test_pure_pic_equals_new_field_sample(self, backend):
        new, old = self.grids()
        ps = random_particles(100, seed_=6)
        from flipsim.grid import sample_velocity_many
        expect = sample_velocity_many(new, ps.pos_x, ps.pos_y, ps.pos_z)[0]
        g2p(new, old, ps, BlendParams(0.0))
        assert np.allclose(ps.vel_x, expect, atol=1e-14)

    def test_pure_flip_with_equal_grids_is_identity(self, backend):
        new, _ = self.grids()
        old = new.clone()
        ps = random_particles(100, seed_=7)
        before = ps.vel_x.copy()
        g2p(new, old, ps, BlendParams(1.0))
        assert np.allclose(ps.vel_x, before, atol=1e-12)

    def test_blend_arithmetic(self, backend):
        new = MacGrid(DIMS)
        old = MacGrid(DIMS)
        new.u[:] = 2.0  # sample_new = 2
        old.u[:] = 0.0  # sample_old = 0
        ps = ParticleSet(np.array([0.5]), np.array([0.5]), np.array([0.5]),
                         np.array([4.0]), np.array([0.0]), np.array([0.0]))
        g2p(new, old, ps, BlendParams(0.5))
        # 0.5*2 + 0.5*(4 + 2 - 0) = 4
        assert ps.vel_x[0] == pytest.approx(4.0, abs=1e-14)

    def test_dims_mismatch_rejected(self):
        new = MacGrid(DIMS)
        old = MacGrid(GridDims(5, 5, 5, 0.2))
        with pytest.raises(ValueError):
            g2p(new, old, random_particles(3), BlendParams(0.5))


class TestRoundTrip:
    def test_constant_field_recovered_pure_pic(self, backend):
        grid = MacGrid(DIMS)
        set_solid_shell(grid)
        ps = seed(SeedRegion.box((1 / 6, 1 / 6, 1 / 6),
                                 (5 / 6, 5 / 6, 5 / 6), 2), grid, 1)
        c = (1.25, -0.5, 2.0)
        ps.vel_x[:] = c[0]
        ps.vel_y[:] = c[1]
        ps.vel_z[:] = c[2]
        ps, h = bin_particles(ps, DIMS)
        p2g(ps, h, grid)
        g2p(grid, grid, ps, BlendParams(0.0))
        assert (np.abs(ps.vel_x - c[0]) / abs(c[0])).max() < 1e-6
        assert (np.abs(ps.vel_y - c[1]) / abs(c[1])).max() < 1e-6
        assert (np.abs(ps.vel_z - c[2]) / abs(c[2])).max() < 1e-6


def test_blend_params_validation():
    with pytest.raises(ValueError):
        BlendParams(1.5)
    with pytest.raises(ValueError):
        BlendParams(-0.1)
