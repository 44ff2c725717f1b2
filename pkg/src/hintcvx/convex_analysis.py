"""Convexity certificates: Fenchel conjugates, duality gaps, the
variational-inequality residual, and the two-point energy defect.

For the quadratic energy Psi(u) = 1/2 <A u, u>_w the conjugate is again
quadratic, Psi*(u*) = 1/2 <A^-1 u*, u*>_w, so every certificate here
reduces to sparse linear algebra.  The VI residual is the computable
criticality test: rho(u) = -inf over v in K of <Psi'(u) - Phi'(u), v - u>,
zero exactly when u is a constrained critical point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convex_sets import (
    DEFAULT_MEMBERSHIP_TOL,
    ConvexSet,
    H2Ball,
    MembershipError,
    MonotoneCone,
    contains,
)
from .functionals import ProblemSpec, phi_grad, psi_grad
from .grid import EllipticOperator, GridFunction, weighted_inner

DEFAULT_BOX_FACTOR = 10.0


@dataclass(frozen=True)
class DualPair:
    """A primal function and a dual one, paired through the weighted sum."""

    u: GridFunction
    ustar: GridFunction

    def __post_init__(self):
        if self.u.grid != self.ustar.grid:
            raise ValueError("dual pair must share one grid")

    def pairing(self, weights: np.ndarray) -> float:
        val = weighted_inner(weights, self.ustar.values, self.u.values)
        if not np.isfinite(val):
            raise ValueError("dual pairing is not finite")
        return val


def _psi_of(op: EllipticOperator, values: np.ndarray) -> float:
    return 0.5 * float(values @ (op.form @ values))


def fenchel_conjugate_quadratic(op: EllipticOperator, ustar: GridFunction) -> float:
    """Conjugate of the quadratic form: Psi*(u*) = 1/2 <A^-1 u*, u*>_w.

    Requires a positive definite operator; the pure-Neumann negative
    Laplacian is rejected with a rank-deficiency error.
    """
    if ustar.grid != op.grid:
        raise ValueError("dual element lives on a different grid than the operator")
    x = op.solve_form(ustar.values)  # raises RankDeficiencyError when singular
    return 0.5 * weighted_inner(op.weights, x, ustar.values)


def duality_gap(op: EllipticOperator, u: GridFunction, ustar: GridFunction) -> float:
    """Fenchel-Young gap Psi(u) + Psi*(u*) - <u, u*>_w.

    Nonnegative up to solver rounding; zero exactly when u* = A u.
    """
    pair = DualPair(u, ustar)
    return _psi_of(op, u.values) + fenchel_conjugate_quadratic(op, ustar) - pair.pairing(op.weights)


def biconjugate_value(op: EllipticOperator, u: GridFunction) -> float:
    """Conjugate-of-conjugate probe: for lsc convex Psi this must return
    Psi(u).  The inner conjugate is evaluated through an actual linear
    solve, so the probe exercises the full dual round trip numerically."""
    z = u.with_values(op.apply(u.values))
    return weighted_inner(op.weights, u.values, z.values) - fenchel_conjugate_quadratic(op, z)


def cone_box_bound(u: GridFunction, factor: float = DEFAULT_BOX_FACTOR) -> float:
    """Compactness box for the cone's linear minimization.

    The cone is unbounded, so the infimum is taken over its intersection
    with {||v||_inf <= B}.  Default B = factor * ||u||_inf, with a unit
    floor when u vanishes identically (otherwise the box degenerates)."""
    amp = float(np.max(np.abs(u.values)))
    return factor * amp if amp > 0.0 else 1.0


def vi_residual(
    spec: ProblemSpec,
    K: ConvexSet,
    u: GridFunction,
    tol: float = DEFAULT_MEMBERSHIP_TOL,
    box_bound: float | None = None,
) -> float:
    """Variational-inequality residual rho(u) = -inf_{v in K} <g, v - u>_w
    with g = Psi'(u) - Phi'(u).

    Always >= 0 up to rounding for u in K; rho <= tol certifies u as a
    discrete constrained critical point.  For the ball the infimum is
    attained in closed form at -r G/||G||_h2 with G the h2 Riesz
    representative of g; for the cone it is attained at a step-function
    vertex of the cone boxed by ``box_bound``.
    """
    if not contains(K, u, tol):
        raise MembershipError("vi_residual requires a point inside the constraint set")
    g = psi_grad(spec, u).values - phi_grad(spec, u).values
    w = spec.weights
    g_dot_u = weighted_inner(w, g, u.values)
    if isinstance(K, H2Ball):
        _, g_h2 = K.geometry.riesz_norm(g)
        return g_dot_u + K.r * g_h2
    B = cone_box_bound(u) if box_bound is None else box_bound
    tails = np.cumsum((w * g)[::-1])[::-1]  # tails[k] = sum_{i >= k} w_i g_i
    lin_min = B * min(0.0, float(np.min(tails)))
    return g_dot_u - lin_min


def equality10_defect(op: EllipticOperator, u0: GridFunction, v0: GridFunction) -> float:
    """Defect |Psi(v0) - Psi(u0) - <A v0, v0 - u0>_w|.

    For the quadratic Psi this equals 1/2 ||v0 - u0||_A^2, so a vanishing
    defect pins u0 = v0 in the operator seminorm.
    """
    if u0.grid != op.grid or v0.grid != op.grid:
        raise ValueError("both functions must live on the operator's grid")
    av0 = op.form @ v0.values  # = W (A v0)
    return abs(_psi_of(op, v0.values) - _psi_of(op, u0.values) - float(av0 @ (v0.values - u0.values)))
