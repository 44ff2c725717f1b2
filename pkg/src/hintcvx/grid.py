"""Discrete domains, elliptic operators, quadrature, and boundary conditions.

Two desk-scale domains are supported:

* ``RadialGrid``: radial profiles on [0, 1].  With ambient dimension
  ``dim == 1`` the grid is the plain unit interval (both endpoints are
  boundary under Dirichlet conditions, and the quadrature measure is
  Lebesgue on [0, 1]).  With ``dim >= 2`` the grid represents radial
  functions on the unit ball of R^dim: the node at r = 0 is the center
  (regularity condition u'(0) = 0) and only r = 1 is a boundary.

* ``Square2DGrid``: interior nodes of a uniform grid on the unit square
  with an implicit zero Dirichlet boundary.

Operators are second-order finite differences assembled from a symmetric
stiffness form, so they are exactly self-adjoint in the quadrature-weighted
inner product and positive semidefinite by construction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DIRICHLET_ZERO = "dirichlet-zero"
NEUMANN_ZERO = "neumann-zero"
BC_TAGS = (DIRICHLET_ZERO, NEUMANN_ZERO)

NEG_LAPLACIAN = "neg-laplacian"
NEG_LAPLACIAN_PLUS_ID = "neg-laplacian-plus-identity"
OPERATOR_KINDS = (NEG_LAPLACIAN, NEG_LAPLACIAN_PLUS_ID)


class RankDeficiencyError(ValueError):
    """Raised when an operation needs a positive definite operator but the
    operator has a nontrivial kernel (pure-Neumann negative Laplacian)."""


def sphere_area(dim: int) -> float:
    """Surface measure constant omega_N of the unit sphere in R^dim.

    ``dim == 1`` returns 1.0: one-dimensional problems live on the unit
    interval [0, 1] itself, not on [-1, 1], so the radial measure is plain
    Lebesgue measure.
    """
    if dim == 1:
        return 1.0
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid on [0, 1] with ``n`` nodes, ambient dimension ``dim``."""

    n: int
    dim: int = 1

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"radial grid needs n >= 3, got n={self.n}")
        if self.dim < 1:
            raise ValueError(f"ambient dimension must be >= 1, got dim={self.dim}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        r = np.linspace(0.0, 1.0, self.n)
        r.flags.writeable = False
        return r

    @property
    def size(self) -> int:
        return self.n

    def boundary_indices(self, bc: str) -> np.ndarray:
        """Indices pinned to zero under the given boundary condition."""
        _check_bc(bc)
        if bc == NEUMANN_ZERO:
            return np.array([], dtype=int)
        if self.dim == 1:
            return np.array([0, self.n - 1], dtype=int)
        return np.array([self.n - 1], dtype=int)

    def to_json(self, bc: str) -> dict:
        _check_bc(bc)
        return {"kind": "radial", "n": self.n, "dim": self.dim, "bc": bc}


@dataclass(frozen=True)
class Square2DGrid:
    """Interior nodes of a uniform grid on the unit square, ``m`` per axis.

    Only the m*m interior nodes are stored; the zero Dirichlet boundary is
    implicit.  Nodes are ordered lexicographically: flat index
    ``k = j * m + i`` holds the node at ``(x_i, y_j) = ((i+1) h, (j+1) h)``.
    """

    m: int

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"2d grid needs m >= 2 interior points per axis, got m={self.m}")

    @property
    def h(self) -> float:
        return 1.0 / (self.m + 1)

    @property
    def size(self) -> int:
        return self.m * self.m

    def flat_index(self, i: int, j: int) -> int:
        if not (0 <= i < self.m and 0 <= j < self.m):
            raise IndexError(f"(i, j) = ({i}, {j}) outside interior {self.m}x{self.m}")
        return j * self.m + i

    def index_pair(self, k: int) -> tuple[int, int]:
        if not (0 <= k < self.size):
            raise IndexError(f"flat index {k} outside 0..{self.size - 1}")
        return k % self.m, k // self.m

    @cached_property
    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays (x, y) of all interior nodes in flat order."""
        coords = (np.arange(1, self.m + 1)) * self.h
        x, y = np.meshgrid(coords, coords, indexing="xy")
        xs, ys = x.ravel(), y.ravel()
        xs.flags.writeable = False
        ys.flags.writeable = False
        return xs, ys

    def boundary_indices(self, bc: str) -> np.ndarray:
        if bc != DIRICHLET_ZERO:
            raise ValueError("the square grid only supports dirichlet-zero conditions")
        return np.array([], dtype=int)  # boundary nodes are not stored

    def to_json(self, bc: str) -> dict:
        if bc != DIRICHLET_ZERO:
            raise ValueError("the square grid only supports dirichlet-zero conditions")
        return {"kind": "square2d", "m": self.m, "bc": bc}


Grid = RadialGrid | Square2DGrid


def grid_from_json(doc: dict) -> tuple[Grid, str]:
    """Rebuild (grid, bc) from the descriptor produced by ``to_json``."""
    kind = doc.get("kind")
    bc = doc.get("bc", DIRICHLET_ZERO)
    _check_bc(bc)
    if kind == "radial":
        return RadialGrid(n=int(doc["n"]), dim=int(doc.get("dim", 1))), bc
    if kind == "square2d":
        if bc != DIRICHLET_ZERO:
            raise ValueError("the square grid only supports dirichlet-zero conditions")
        return Square2DGrid(m=int(doc["m"])), bc
    raise ValueError(f"unknown grid kind {kind!r}")


def _check_bc(bc: str) -> None:
    if bc not in BC_TAGS:
        raise ValueError(f"unknown boundary condition tag {bc!r}; expected one of {BC_TAGS}")


@dataclass(frozen=True)
class GridFunction:
    """Real values sampled at the nodes of a grid, tagged with its space.

    Dirichlet-zero functions must vanish at the boundary nodes (enforced at
    construction within 1e-12).  Values are frozen after construction, so
    instances are safe to share across threads.
    """

    grid: Grid
    values: np.ndarray
    bc: str = DIRICHLET_ZERO

    def __post_init__(self):
        _check_bc(self.bc)
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != (self.grid.size,):
            raise ValueError(
                f"values have shape {vals.shape}, grid has {self.grid.size} nodes"
            )
        if not np.isfinite(vals).all():
            raise ValueError("grid function values must be finite")
        if isinstance(self.grid, Square2DGrid) and self.bc != DIRICHLET_ZERO:
            raise ValueError("the square grid only supports dirichlet-zero functions")
        bnd = self.grid.boundary_indices(self.bc)
        if bnd.size and np.max(np.abs(vals[bnd])) > 1e-12:
            raise ValueError("dirichlet-zero function has nonzero boundary values")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.grid, values, self.bc)

    def to_csv(self, path) -> None:
        """Write (coordinates, value) columns."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            if isinstance(self.grid, RadialGrid):
                writer.writerow(["coord", "value"])
                for r, v in zip(self.grid.nodes, self.values):
                    writer.writerow([repr(r), repr(v)])
            else:
                writer.writerow(["x", "y", "value"])
                xs, ys = self.grid.nodes
                for x, y, v in zip(xs, ys, self.values):
                    writer.writerow([repr(x), repr(y), repr(v)])


def zero_function(grid: Grid, bc: str = DIRICHLET_ZERO) -> GridFunction:
    return GridFunction(grid, np.zeros(grid.size), bc)


def quadrature_weights(grid: Grid) -> np.ndarray:
    """Quadrature weights realizing the domain integral at the nodes.

    Radial grids use the cell-integrated rule with the full surface
    constant: ``w_i = omega_N * integral of r^(N-1) over the node's cell``.
    For dim == 1 this reduces to the trapezoidal rule on [0, 1] (exact on
    affine integrands); for dim >= 2 the weights sum to the exact ball
    volume and the rule is O(h^2) accurate.  The square grid carries the
    plain interior rule ``w = h^2`` per node.
    """
    if isinstance(grid, RadialGrid):
        r = grid.nodes
        h = grid.h
        lo = np.maximum(r - 0.5 * h, 0.0)
        hi = np.minimum(r + 0.5 * h, 1.0)
        n = grid.dim
        w = sphere_area(n) * (hi**n - lo**n) / n
    else:
        w = np.full(grid.size, grid.h**2)
    w.flags.writeable = False
    return w


def weighted_inner(weights: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    """Quadrature-weighted L^2 pairing sum(w * u * v)."""
    return float(np.dot(weights * u, v))


@dataclass(frozen=True)
class EllipticOperator:
    """Sparse self-adjoint elliptic operator on grid functions.

    The operator is defined through its stiffness form: ``A u`` is the
    quadrature representative of the bilinear form, i.e.
    ``<A u, v>_w = u^T form v`` for every v supported on active nodes.
    ``stiffness`` holds the gradient part only (used for the H^1 seminorm);
    ``form`` adds the identity term when the kind includes it.  Dirichlet
    rows and columns are zeroed, so the operator acts on the subspace of
    functions vanishing at the boundary and returns members of it.
    """

    kind: str
    grid: Grid
    bc: str
    weights: np.ndarray = field(repr=False)
    stiffness: sp.csr_matrix = field(repr=False)
    active: np.ndarray = field(repr=False)
    edge_coeffs: np.ndarray | None = field(default=None, repr=False)

    @cached_property
    def form(self) -> sp.csr_matrix:
        if self.kind == NEG_LAPLACIAN:
            return self.stiffness
        ident = sp.diags(np.where(self.active, self.weights, 0.0))
        return (self.stiffness + ident).tocsr()

    @property
    def is_positive_definite(self) -> bool:
        return self.kind == NEG_LAPLACIAN_PLUS_ID or self.bc == DIRICHLET_ZERO

    @cached_property
    def form_active(self) -> sp.csc_matrix:
        idx = np.flatnonzero(self.active)
        return self.form[np.ix_(idx, idx)].tocsc()

    @cached_property
    def form_solver(self):
        """Cached sparse LU solve of the active form matrix."""
        if not self.is_positive_definite:
            raise RankDeficiencyError(
                "pure-Neumann negative Laplacian is rank deficient (constants in kernel)"
            )
        return spla.factorized(self.form_active)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Pointwise operator values A u (zero at inactive nodes).

        One-dimensional chains evaluate the stiffness part in flux form,
        flux_j = c_j (u_{j+1} - u_j), so constants land exactly in the
        kernel of the Laplacian part (node differences cancel without
        rounding; the assembled matrix would leave noise amplified by the
        tiny center-cell weight).
        """
        v = np.where(self.active, np.asarray(values, dtype=float), 0.0)
        if self.edge_coeffs is not None:
            flux = self.edge_coeffs * np.diff(v)
            out = np.zeros_like(v)
            out[:-1] -= flux
            out[1:] += flux
        else:
            out = self.stiffness @ v
        if self.kind == NEG_LAPLACIAN_PLUS_ID:
            out = out + self.weights * v
        result = np.zeros_like(out)
        result[self.active] = out[self.active] / self.weights[self.active]
        return result

    def __call__(self, values: np.ndarray) -> np.ndarray:
        return self.apply(values)

    def solve_form(self, rhs_values: np.ndarray) -> np.ndarray:
        """Solve A x = rhs in the weighted pairing, i.e. form x = W rhs, by
        the cached direct factorization.  Inactive entries of rhs are ignored."""
        x = np.zeros(self.grid.size)
        idx = self.active
        x[idx] = self.form_solver((self.weights * rhs_values)[idx])
        return x


def _mask_matrix(S: sp.spmatrix, active: np.ndarray) -> sp.csr_matrix:
    z = sp.diags(active.astype(float))
    return (z @ S @ z).tocsr()


def build_radial_laplacian(grid: RadialGrid, bc: str, kind: str = NEG_LAPLACIAN) -> EllipticOperator:
    """Assemble the radial operator -u'' - (dim-1)/r u' (plus identity for
    the ``neg-laplacian-plus-identity`` kind).

    The stiffness form uses midpoint radial factors on each edge, which
    reproduces the symmetric ghost-point treatment of the center node
    (regularity u'(0) = 0) and the natural Neumann condition at r = 1.
    """
    _check_bc(bc)
    if kind not in OPERATOR_KINDS:
        raise ValueError(f"unknown operator kind {kind!r}; expected one of {OPERATOR_KINDS}")
    if grid.n < 3:
        raise ValueError("radial operator needs n >= 3")
    n, h = grid.n, grid.h
    omega = sphere_area(grid.dim)
    mid = (np.arange(n - 1) + 0.5) * h
    c = omega * mid ** (grid.dim - 1) / h

    rows = np.concatenate([np.arange(n - 1), np.arange(1, n), np.arange(n - 1), np.arange(1, n)])
    cols = np.concatenate([np.arange(n - 1), np.arange(1, n), np.arange(1, n), np.arange(n - 1)])
    vals = np.concatenate([c, c, -c, -c])
    S = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()

    active = np.ones(n, dtype=bool)
    active[grid.boundary_indices(bc)] = False
    return EllipticOperator(
        kind=kind,
        grid=grid,
        bc=bc,
        weights=quadrature_weights(grid),
        stiffness=_mask_matrix(S, active),
        active=active,
        edge_coeffs=c,
    )


def build_2d_laplacian(grid: Square2DGrid) -> EllipticOperator:
    """Standard 5-point negative Laplacian on the unit square, zero Dirichlet."""
    if grid.m < 2:
        raise ValueError("2d operator needs m >= 2")
    m = grid.m
    T = sp.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1])
    eye = sp.identity(m)
    S = (sp.kron(eye, T) + sp.kron(T, eye)).tocsr()  # stiffness = h^2 * (5-point / h^2)
    active = np.ones(grid.size, dtype=bool)
    return EllipticOperator(
        kind=NEG_LAPLACIAN,
        grid=grid,
        bc=DIRICHLET_ZERO,
        weights=quadrature_weights(grid),
        stiffness=S,
        active=active,
    )
