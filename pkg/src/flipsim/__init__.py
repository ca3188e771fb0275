"""flipsim: hybrid particle/grid incompressible-fluid simulation toolkit.

A staggered-grid fluid engine with particle seeding and binning, gather
transfers, four pressure solvers, particle-blob surface meshing, benchmark
scenes, per-stage timing and an energy diagnostic. Numeric hot loops run on
a compiled extension when available, with a pure-NumPy fallback.
"""

from ._kernels import backend_name, set_backend, set_workers
from .binning import SpaceHash, bin_particles, cell_index, exclusive_scan
from .grid import (AIR, FLUID, SOLID, GridDims, MacGrid, divergence,
                   flat_index, sample_velocity)
from .particles import ParticleSet, SeedRegion, advect, compute_dt, reseed, seed
from .pressure import (LaplacianSystem, apply_pressure_gradient, assemble,
                       solve_gauss_seidel, solve_jacobi, solve_pcg, solve_rbgs)
from .sim import SceneSpec, SimState, StageTimings, make_scene, step, total_energy
from .surface import (FieldParams, ScalarField, TriangleMesh, build_field,
                      decay_kernel, export_mesh, marching_cubes, vertex_normals)
from .transfer import BlendParams, g2p, hat_kernel, p2g

__version__ = "0.1.0"
