"""Energies, their derivatives, and norms for the three problem families.

Every family splits its energy as I(u) = Psi(u) - Phi(u) with Psi the
quadratic form of the family's elliptic operator:

* ``concave-convex``: Psi = 1/2 int |grad u|^2, Phi = 1/p int |u|^p
  + mu/q int |u|^q, zero Dirichlet data.
* ``nonhomogeneous``: Psi as above, Phi = 1/p int |u|^p + int f u.
* ``neumann-radial``: Psi = 1/2 int (|grad u|^2 + u^2),
  Phi = 1/p int a |u|^p on the unit ball with Neumann data.

Gradients are returned as grid functions representing the derivative in
the quadrature-weighted pairing: ``<grad, h>_w`` equals the directional
derivative for every admissible direction h.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import (
    DIRICHLET_ZERO,
    NEG_LAPLACIAN,
    NEG_LAPLACIAN_PLUS_ID,
    NEUMANN_ZERO,
    EllipticOperator,
    Grid,
    GridFunction,
    RadialGrid,
    Square2DGrid,
    build_2d_laplacian,
    build_radial_laplacian,
    weighted_inner,
)

CONCAVE_CONVEX = "concave-convex"
NONHOMOGENEOUS = "nonhomogeneous"
NEUMANN_RADIAL = "neumann-radial"
FAMILIES = (CONCAVE_CONVEX, NONHOMOGENEOUS, NEUMANN_RADIAL)
BALL_FAMILIES = (CONCAVE_CONVEX, NONHOMOGENEOUS)


class DegenerateInputError(ValueError):
    """Raised when a nonlinearity over- or underflows to non-finite values."""


def _p_star(dim: int) -> float:
    # Admissible exponent ceiling from the H^2 embedding; unbounded for dim <= 4.
    if dim <= 4:
        return float("inf")
    return (2.0 * dim - 4.0) / (dim - 4.0)


@dataclass(eq=False)
class ProblemSpec:
    """One of the three problem families with its exponents and data.

    Parameters mirror the configuration file: ``q``/``mu`` belong to the
    concave-convex family, ``f`` to the nonhomogeneous one, ``a`` to the
    Neumann-radial one.  ``C1`` is the regularity constant used by the
    radius-window machinery (a configuration input, default 1.0) and ``r``
    optionally pins the constraint-ball radius.
    """

    family: str
    grid: Grid
    p: float
    q: float | None = None
    mu: float = 0.0
    f: GridFunction | None = None
    a: GridFunction | None = None
    C1: float = 1.0
    r: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        dim = self.grid.dim if isinstance(self.grid, RadialGrid) else 2
        if not self.p > 2.0:
            raise ValueError(f"p must exceed 2, got p={self.p}")
        if self.p >= _p_star(dim):
            raise ValueError(
                f"p={self.p} violates the embedding bound p < {_p_star(dim)} at dim={dim}"
            )
        if self.C1 <= 0.0:
            raise ValueError(f"C1 must be positive, got C1={self.C1}")
        if self.r is not None and self.r <= 0.0:
            raise ValueError(f"constraint radius must be positive, got r={self.r}")

        if self.family == CONCAVE_CONVEX:
            if self.q is None or not (1.0 < self.q < 2.0):
                raise ValueError(f"q must lie in (1, 2), got q={self.q}")
            if self.mu < 0.0:
                raise ValueError(f"mu must be nonnegative, got mu={self.mu}")
            if self.f is not None or self.a is not None:
                raise ValueError("concave-convex takes no forcing f or weight a")
        elif self.family == NONHOMOGENEOUS:
            if self.f is None:
                raise ValueError("nonhomogeneous family needs a forcing f")
            if self.f.grid != self.grid:
                raise ValueError("forcing f lives on a different grid")
            if self.q is not None or self.mu != 0.0 or self.a is not None:
                raise ValueError("nonhomogeneous takes only p and f")
        else:
            if not isinstance(self.grid, RadialGrid):
                raise ValueError("neumann-radial needs a radial grid")
            if self.a is None:
                raise ValueError("neumann-radial family needs a radial weight a")
            if self.a.grid != self.grid:
                raise ValueError("weight a lives on a different grid")
            av = self.a.values
            if np.min(av) < 0.0:
                raise ValueError("weight a must be nonnegative")
            if np.min(np.diff(av)) < -1e-12:
                raise ValueError("weight a must be node-wise nondecreasing")
            if self.q is not None or self.mu != 0.0 or self.f is not None:
                raise ValueError("neumann-radial takes only p and a")

    @property
    def bc(self) -> str:
        return DIRICHLET_ZERO if self.family in BALL_FAMILIES else NEUMANN_ZERO

    @cached_property
    def operator(self) -> EllipticOperator:
        if isinstance(self.grid, Square2DGrid):
            return build_2d_laplacian(self.grid)
        kind = NEG_LAPLACIAN if self.family in BALL_FAMILIES else NEG_LAPLACIAN_PLUS_ID
        return build_radial_laplacian(self.grid, self.bc, kind)

    @property
    def weights(self) -> np.ndarray:
        return self.operator.weights

    @cached_property
    def geometry(self) -> "H2Geometry":
        return H2Geometry(self.operator)

    def zero(self) -> GridFunction:
        return GridFunction(self.grid, np.zeros(self.grid.size), self.bc)

    def function(self, values: np.ndarray) -> GridFunction:
        return GridFunction(self.grid, values, self.bc)

    def summary(self) -> dict:
        doc = {
            "family": self.family,
            "grid": self.grid.to_json(self.bc),
            "p": self.p,
            "q": self.q,
            "mu": self.mu,
            "C1": self.C1,
            "r": self.r,
        }
        if self.f is not None:
            w = self.weights
            doc["f_l2"] = float(np.sqrt(weighted_inner(w, self.f.values, self.f.values)))
        if self.a is not None:
            doc["a_range"] = [float(self.a.values.min()), float(self.a.values.max())]
        return doc


def _check_grid(spec: ProblemSpec, u: GridFunction) -> None:
    if u.grid != spec.grid:
        raise ValueError("grid function lives on a different grid than the problem")


def _check_space(spec: ProblemSpec, u: GridFunction) -> None:
    _check_grid(spec, u)
    if u.bc != spec.bc:
        raise ValueError(f"function carries bc {u.bc!r} but the family needs {spec.bc!r}")


def psi_value(spec: ProblemSpec, u: GridFunction) -> float:
    """Quadratic part 1/2 <A u, u>_w of the family energy."""
    _check_space(spec, u)
    v = u.values
    return 0.5 * float(v @ (spec.operator.form @ v))


def psi_grad(spec: ProblemSpec, u: GridFunction) -> GridFunction:
    """Derivative of Psi in the weighted pairing: the operator value A u."""
    _check_space(spec, u)
    return GridFunction(spec.grid, spec.operator.apply(u.values), u.bc)


def _power_term(v: np.ndarray, expo: float) -> np.ndarray:
    """|v|^(expo-2) * v with the zero-node convention for expo < 2."""
    if expo >= 2.0:
        return np.abs(v) ** (expo - 2.0) * v
    out = np.zeros_like(v)
    nz = v != 0.0
    out[nz] = np.abs(v[nz]) ** (expo - 2.0) * v[nz]
    return out


def phi_value(spec: ProblemSpec, u: GridFunction) -> float:
    """Family-specific nonquadratic energy Phi(u)."""
    _check_grid(spec, u)
    w = spec.weights
    v = u.values
    p = spec.p
    if spec.family == CONCAVE_CONVEX:
        val = np.dot(w, np.abs(v) ** p) / p
        if spec.mu > 0.0:
            val += spec.mu * np.dot(w, np.abs(v) ** spec.q) / spec.q
        return float(val)
    if spec.family == NONHOMOGENEOUS:
        return float(np.dot(w, np.abs(v) ** p) / p + weighted_inner(w, spec.f.values, v))
    return float(np.dot(w, spec.a.values * np.abs(v) ** p) / p)


def phi_grad(spec: ProblemSpec, u: GridFunction) -> GridFunction:
    """Node-wise derivative of Phi in the weighted pairing.

    Dirichlet boundary entries are projected to zero so the output lives in
    the same constrained space as u (boundary directions are not
    admissible variations there).
    """
    _check_grid(spec, u)
    v = u.values
    with np.errstate(over="ignore", invalid="ignore"):
        if spec.family == CONCAVE_CONVEX:
            out = _power_term(v, spec.p)
            if spec.mu > 0.0:
                out = out + spec.mu * _power_term(v, spec.q)
        elif spec.family == NONHOMOGENEOUS:
            out = _power_term(v, spec.p) + spec.f.values
        else:
            out = spec.a.values * _power_term(v, spec.p)
    if not np.isfinite(out).all():
        raise DegenerateInputError("nonlinearity produced non-finite values (exponent overflow)")
    bnd = spec.grid.boundary_indices(spec.bc)
    if bnd.size:
        out = out.copy()
        out[bnd] = 0.0
    return GridFunction(spec.grid, out, u.bc)


@dataclass(frozen=True)
class EnergyBreakdown:
    psi: float
    phi: float
    total: float


def energy(spec: ProblemSpec, u: GridFunction) -> EnergyBreakdown:
    """I(u) = Psi(u) - Phi(u), assembled exactly from the two evaluations."""
    psi = psi_value(spec, u)
    phi = phi_value(spec, u)
    return EnergyBreakdown(psi=psi, phi=phi, total=psi - phi)


@dataclass(frozen=True)
class Norms:
    l2: float
    lp: float
    h1: float
    h2: float


def norms(op: EllipticOperator, u: GridFunction, p: float = 2.0) -> Norms:
    """Quadrature-weighted norms of u under the operator's geometry.

    h1^2 = l2^2 + |grad u|^2 and h2^2 = h1^2 + ||A u||^2 with A the given
    operator, following the operator-based definition of the second-order
    term (an equivalent H^2 norm under the supported boundary conditions).
    """
    if u.grid != op.grid:
        raise ValueError("grid function lives on a different grid than the operator")
    v = u.values
    w = op.weights
    l2sq = float(np.dot(w, v * v))
    semi = float(v @ (op.stiffness @ v))
    av = op.apply(v)
    opsq = float(np.dot(w, av * av))
    return Norms(
        l2=float(np.sqrt(l2sq)),
        lp=float(np.dot(w, np.abs(v) ** p) ** (1.0 / p)),
        h1=float(np.sqrt(l2sq + semi)),
        h2=float(np.sqrt(l2sq + semi + opsq)),
    )


class H2Geometry:
    """The H^2 inner product <u,v>_w + <grad u, grad v> + <A u, A v>_w and
    its Riesz map for a fixed operator.

    The Gram matrix on active nodes is H = W + S + F W^-1 F with S the
    laplacian stiffness and F the operator form; ``riesz(g)`` solves
    H x = W g so that <x, v>_h2 = <g, v>_w for all admissible v.
    """

    def __init__(self, op: EllipticOperator):
        self.op = op
        self._idx = np.flatnonzero(op.active)

    @cached_property
    def _gram_solver(self):
        op = self.op
        idx = self._idx
        W = sp.diags(op.weights[idx])
        S = op.stiffness[np.ix_(idx, idx)]
        F = op.form[np.ix_(idx, idx)]
        Winv = sp.diags(1.0 / op.weights[idx])
        H = (W + S + F @ Winv @ F).tocsc()
        return spla.factorized(H)

    def h2_norm_sq(self, values: np.ndarray) -> float:
        op = self.op
        v = np.asarray(values, dtype=float)
        av = op.apply(v)
        semi = float(v @ (op.stiffness @ v))
        return float(np.dot(op.weights, v * v) + semi + np.dot(op.weights, av * av))

    def h2_norm(self, values: np.ndarray) -> float:
        return float(np.sqrt(max(self.h2_norm_sq(values), 0.0)))

    def riesz(self, g_values: np.ndarray) -> np.ndarray:
        """H^2 Riesz representative of the weighted-pairing functional g."""
        out = np.zeros(self.op.grid.size)
        rhs = (self.op.weights * g_values)[self._idx]
        out[self._idx] = self._gram_solver(rhs)
        return out

    def riesz_norm(self, g_values: np.ndarray) -> tuple[np.ndarray, float]:
        """Riesz representative G of g and its h2 norm (via <G, W g>)."""
        G = self.riesz(g_values)
        nrm_sq = float(np.dot(G, self.op.weights * g_values))
        return G, float(np.sqrt(max(nrm_sq, 0.0)))
