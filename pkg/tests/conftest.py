import numpy as np
import pytest

from flipsim import _kernels
from flipsim.grid import GridDims, MacGrid, set_solid_shell


@pytest.fixture(params=sorted(_kernels.available_backends()))
def backend(request):
    """Run a test once per available kernel backend."""
    prev = _kernels.backend_name()
    _kernels.set_backend(request.param)
    yield request.param
    _kernels.set_backend(prev)


@pytest.fixture
def shell_grid():
    """8^3 grid with unit-ish cells and a one-cell solid wall shell."""
    dims = GridDims(8, 8, 8, 0.125)
    grid = MacGrid(dims)
    set_solid_shell(grid)
    return grid


def random_velocities(grid: MacGrid, seed: int = 0) -> None:
    rng = np.random.default_rng(seed)
    grid.u[:] = rng.normal(size=grid.u.shape)
    grid.v[:] = rng.normal(size=grid.v.shape)
    grid.w[:] = rng.normal(size=grid.w.shape)
