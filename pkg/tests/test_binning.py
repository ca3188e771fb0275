from itertools import accumulate

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flipsim.binning import (SpaceHash, bin_particles, cell_index,
                             cell_index_many, exclusive_scan)
from flipsim.grid import GridDims
from flipsim.particles import ParticleSet


def scan_oracle(values):
    """Sequential running sum, independent of the production scan."""
    out = [0]
    out.extend(accumulate(int(v) for v in values[:-1]))
    return np.array(out[:len(values)], dtype=np.int64) if len(values) else \
        np.zeros(0, dtype=np.int64)


def stable_sort_oracle(cells, n_cells):
    """Dict-of-lists stable counting sort, independent of the real one."""
    buckets = {c: [] for c in range(n_cells)}
    for t, c in enumerate(cells):
        buckets[int(c)].append(t)
    perm = [t for c in range(n_cells) for t in buckets[c]]
    return np.array(perm, dtype=np.int64)


def random_set(n, dims, seed=0):
    rng = np.random.default_rng(seed)
    o = np.asarray(dims.origin)
    extent = np.array([dims.nx, dims.ny, dims.nz]) * dims.dtau
    pos = o + rng.random((n, 3)) * extent
    vel = rng.normal(size=(n, 3))
    return ParticleSet(pos[:, 0].copy(), pos[:, 1].copy(), pos[:, 2].copy(),
                       vel[:, 0].copy(), vel[:, 1].copy(), vel[:, 2].copy())


class TestCellIndex:
    dims = GridDims(4, 4, 4, 0.25)

    def test_origin_maps_to_zero(self):
        assert cell_index((0.0, 0.0, 0.0), self.dims) == 0

    def test_center_of_cell_2_1_0(self):
        # floor((pos - origin)/dtau) = (2,1,0) -> 2 + 1*4 + 0*16 = 6
        pos = (0.625, 0.375, 0.125)
        assert cell_index(pos, self.dims) == 6

    def test_max_corner_clamped_to_last_cell(self):
        assert cell_index((1.0, 1.0, 1.0), self.dims) == 63

    def test_vector_version_matches_scalar(self):
        rng = np.random.default_rng(2)
        pos = rng.random((50, 3))
        many = cell_index_many(pos[:, 0], pos[:, 1], pos[:, 2], self.dims)
        for t in range(50):
            assert many[t] == cell_index(pos[t], self.dims)


class TestExclusiveScan:
    def test_single_element(self):
        assert exclusive_scan(np.array([5])).tolist() == [0]

    def test_three_elements(self):
        assert exclusive_scan(np.array([1, 2, 3])).tolist() == [0, 1, 3]

    def test_empty(self):
        assert exclusive_scan(np.zeros(0, dtype=np.int64)).size == 0

    def test_large_random_matches_sequential_oracle(self):
        rng = np.random.default_rng(7)
        values = rng.integers(0, 50, size=10**6)
        assert np.array_equal(exclusive_scan(values), scan_oracle(values))

    def test_tree_path_non_power_of_two(self):
        rng = np.random.default_rng(8)
        for n in (4097, 5000, 8191, 8192):
            values = rng.integers(0, 9, size=n)
            assert np.array_equal(exclusive_scan(values), scan_oracle(values))

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(0, 1000), max_size=200))
    def test_property_matches_oracle(self, values):
        arr = np.array(values, dtype=np.int64)
        assert np.array_equal(exclusive_scan(arr), scan_oracle(arr))

    def test_rejects_floats(self):
        with pytest.raises(TypeError):
            exclusive_scan(np.array([1.5, 2.5]))


class TestBinParticles:
    dims = GridDims(6, 6, 6, 1.0 / 6.0)

    def test_single_cell_keeps_order(self, backend):
        rng = np.random.default_rng(3)
        pos = 0.05 + rng.random((20, 3)) * 0.05  # all in cell 0
        ps = ParticleSet(pos[:, 0].copy(), pos[:, 1].copy(), pos[:, 2].copy(),
                         *(np.zeros(20) for _ in range(3)))
        marker = ps.pos_x.copy()
        ps, h = bin_particles(ps, self.dims)
        assert np.array_equal(ps.pos_x, marker)
        assert h.offset[0] == 0 and h.count[0] == 20
        assert h.fluid_cells.tolist() == [0]

    def test_empty_set(self, backend):
        ps, h = bin_particles(ParticleSet.empty(), self.dims)
        assert ps.count == 0
        assert h.count.sum() == 0 and len(h.fluid_cells) == 0

    def test_matches_stable_sort_oracle_byte_identical(self, backend):
        ps = random_set(10**5, self.dims, seed=5)
        cells = cell_index_many(ps.pos_x, ps.pos_y, ps.pos_z, self.dims)
        perm = stable_sort_oracle(cells, self.dims.ncells)
        expected = [a[perm].tobytes() for a in ps.arrays()]
        ps, h = bin_particles(ps, self.dims)
        got = [a.tobytes() for a in ps.arrays()]
        assert got == expected

    def test_hash_invariants(self, backend):
        ps = random_set(5000, self.dims, seed=6)
        before = np.sort(ps.pos_x.copy())
        ps, h = bin_particles(ps, self.dims)
        # offsets are the scan of counts; totals line up
        assert np.array_equal(h.offset, exclusive_scan(h.count))
        assert h.offset[-1] + h.count[-1] == ps.count
        # fluid cell list is strictly increasing and complete
        assert np.array_equal(h.fluid_cells, np.flatnonzero(h.count > 0))
        assert (np.diff(h.fluid_cells) > 0).all()
        # permutation preserved the multiset of positions
        assert np.array_equal(np.sort(ps.pos_x), before)
        # every particle in its cell segment hashes back to that cell
        cells = cell_index_many(ps.pos_x, ps.pos_y, ps.pos_z, self.dims)
        for c in h.fluid_cells[:50]:
            seg = h.segment(int(c))
            assert (cells[seg] == c).all()

    def test_backends_agree_exactly(self):
        from flipsim import _kernels
        ps = random_set(3000, self.dims, seed=9)
        outs = []
        for name in sorted(_kernels.available_backends()):
            _kernels.set_backend(name)
            psc = ParticleSet(*(a.copy() for a in ps.arrays()))
            psc, h = bin_particles(psc, self.dims)
            outs.append(tuple(a.tobytes() for a in psc.arrays()))
        assert all(o == outs[0] for o in outs)
