import numpy as np
import pytest

import hintcvx as hx


@pytest.fixture
def grid1d():
    return hx.RadialGrid(n=41, dim=1)


@pytest.fixture
def op1d(grid1d):
    return hx.build_radial_laplacian(grid1d, hx.DIRICHLET_ZERO)


@pytest.fixture
def grid3d():
    return hx.RadialGrid(n=81, dim=3)


@pytest.fixture
def grid2d():
    return hx.Square2DGrid(m=6)


@pytest.fixture
def cc_spec(grid1d):
    return hx.ProblemSpec(family="concave-convex", grid=grid1d, p=4.0, q=1.5, mu=0.1)


@pytest.fixture
def nr_spec(grid3d):
    a = hx.GridFunction(grid3d, 1.0 + grid3d.nodes, hx.NEUMANN_ZERO)
    return hx.ProblemSpec(family="neumann-radial", grid=grid3d, p=4.0, a=a)


def random_dirichlet(grid, seed, scale=1.0):
    """Seeded random function vanishing on the Dirichlet boundary."""
    rng = np.random.default_rng(seed)
    vals = scale * rng.standard_normal(grid.size)
    vals[grid.boundary_indices(hx.DIRICHLET_ZERO)] = 0.0
    return hx.GridFunction(grid, vals, hx.DIRICHLET_ZERO)


def random_neumann(grid, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return hx.GridFunction(grid, scale * rng.standard_normal(grid.size), hx.NEUMANN_ZERO)
