"""Two-stage pipeline: find a constrained critical point, then certify it
by solving the linear elliptic problem and checking membership of the
solution back in the constraint set.

Also houses the admissibility machinery for the constraint radius: the
window of radii r with C1 (r^(p-1) + mu r^(q-1)) <= r, the coefficient
threshold mu_star above which the window is empty, and the empirical
forcing-amplitude threshold probe.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .convex_analysis import (
    cone_box_bound,
    duality_gap,
    equality10_defect,
    vi_residual,
)
from .convex_sets import (
    DEFAULT_MEMBERSHIP_TOL,
    ConvexSet,
    H2Ball,
    MembershipError,
    MonotoneCone,
    contains,
)
from .functionals import (
    BALL_FAMILIES,
    NEUMANN_RADIAL,
    NONHOMOGENEOUS,
    ProblemSpec,
    energy,
    phi_grad,
    psi_grad,
)
from .grid import GridFunction, RadialGrid, Square2DGrid, weighted_inner
from .solvers import (
    DivergenceError,
    IterTrace,
    IterationLimitError,
    MPGError,
    SolverConfig,
    linear_solve,
    mountain_pass,
    projected_gradient_minimize,
)

logger = logging.getLogger("hintcvx.principle")

DEFAULT_TOL_STRONG = 1e-6
VERDICT_CERTIFIED = "certified"
VERDICT_STEP_II_FAILED = "step-ii-failed"
VERDICT_NOT_CRITICAL = "not-critical"
_WINDOW_TOL = 1e-10


def _validate_window_params(C1: float, mu: float, p: float, q: float) -> None:
    if C1 <= 0.0:
        raise ValueError(f"C1 must be positive, got {C1}")
    if mu < 0.0:
        raise ValueError(f"mu must be nonnegative, got {mu}")
    if not (1.0 < q < 2.0 < p):
        raise ValueError(f"exponents must satisfy 1 < q < 2 < p, got q={q}, p={p}")


def _bisect(fn, lo: float, hi: float, tol: float = _WINDOW_TOL) -> float:
    """Bisection for the sign change of fn on [lo, hi] to absolute tol."""
    flo = fn(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if (fm > 0.0) == (flo > 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def radius_window(C1: float, mu: float, p: float, q: float) -> tuple[float, float] | None:
    """Interval [r1, r2] of radii with C1 (r^(p-1) + mu r^(q-1)) <= r.

    The defect g(r) = C1 r^(p-1) + C1 mu r^(q-1) - r changes sign in the
    pattern +, -, + for mu > 0, so the admissible set is a single interval;
    endpoints are bisected to absolute tolerance 1e-10.  Returns None when
    the window is empty (min g > 0) and reports r1 = 0 for mu = 0, where
    every sufficiently small radius is admissible.
    """
    _validate_window_params(C1, mu, p, q)

    def g(r: float) -> float:
        return C1 * r ** (p - 1.0) + C1 * mu * r ** (q - 1.0) - r

    if mu == 0.0:
        cap = (1.0 / C1) ** (1.0 / (p - 2.0))  # exact root of g for mu = 0
        hi = 2.0 * cap
        while g(hi) <= 0.0:
            hi *= 2.0
        return 0.0, _bisect(g, 0.5 * cap, hi)

    # interior minimizer of g/r, closed form
    rmin = (mu * (2.0 - q) / (p - 2.0)) ** (1.0 / (p - q))
    if g(rmin) > 0.0:
        return None
    # left endpoint can sit at (C1 mu)^(1/(2-q)), arbitrarily close to 0 as
    # q -> 2: bisect in log scale for relative resolution (stronger than the
    # 1e-10 absolute contract for r1 <= 1); below the representable range
    # report 0 like the mu = 0 case
    lo = rmin
    for _ in range(900):
        lo *= 0.5
        if g(lo) > 0.0:
            break
    else:
        lo = 0.0
    if lo == 0.0:
        r1 = 0.0
    else:
        t = _bisect(lambda s: g(math.exp(s)), math.log(lo), math.log(2.0 * lo))
        r1 = math.exp(t)
    hi = max(2.0 * rmin, 10.0)
    while g(hi) <= 0.0:
        hi *= 2.0
    r2 = _bisect(g, rmin, hi)
    return r1, r2


def mu_star(C1: float, p: float, q: float) -> float:
    """Largest coefficient with a nonempty radius window:
    mu* = max over r > 0 of (r - C1 r^(p-1)) / (C1 r^(q-1)).

    The maximand is unimodal on (0, (1/C1)^(1/(p-2))); golden-section
    search locates the maximizer to absolute tolerance 1e-10.  Returns 0.0
    in the degenerate case of a nowhere-positive numerator (unreachable
    for p > 2, kept as a defensive branch).
    """
    _validate_window_params(C1, 0.0, p, q)

    cap = (1.0 / C1) ** (1.0 / (p - 2.0))

    def eta(r: float) -> float:
        if r <= 0.0:
            return 0.0
        return (r - C1 * r ** (p - 1.0)) / (C1 * r ** (q - 1.0))

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = 0.0, cap
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = eta(c), eta(d)
    while b - a > _WINDOW_TOL:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = eta(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = eta(d)
    best = eta(0.5 * (a + b))
    if best <= 0.0:
        logger.warning("mu_star maximand nowhere positive; returning 0")
        return 0.0
    return best


def default_radius(window: tuple[float, float]) -> float:
    """Log-scale midpoint of the window; half of r2 when r1 = 0."""
    r1, r2 = window
    if r1 <= 0.0:
        return 0.5 * r2
    return math.sqrt(r1 * r2)


def constraint_set(spec: ProblemSpec, r: float | None = None) -> ConvexSet:
    if spec.family in BALL_FAMILIES:
        if r is None:
            raise ValueError("ball families need a constraint radius")
        return H2Ball(r, spec.operator, spec.geometry)
    return MonotoneCone(spec.grid, spec.weights)


def ball_start(spec: ProblemSpec, r: float) -> GridFunction:
    """Deterministic initial iterate: the lowest-mode proxy scaled to
    h2 norm r/10 (well inside the ball, nonzero so the sublinear term can
    pull the energy negative)."""
    grid = spec.grid
    if isinstance(grid, RadialGrid):
        x = grid.nodes
        vals = np.sin(np.pi * x) if grid.dim == 1 else np.cos(0.5 * np.pi * x)
    else:
        xs, ys = grid.nodes
        vals = np.sin(np.pi * xs) * np.sin(np.pi * ys)
    nrm = spec.geometry.h2_norm(vals)
    return spec.function(vals * (0.1 * r / nrm))


def cone_endpoint(spec: ProblemSpec, max_doublings: int = 60) -> GridFunction:
    """Path endpoint e = t * 1 with t doubled until I(e) <= 0."""
    ones = np.ones(spec.grid.size)
    t = 1.0
    for _ in range(max_doublings):
        e = spec.function(t * ones)
        with np.errstate(over="ignore", invalid="ignore"):
            val = energy(spec, e).total
        if np.isfinite(val) and val <= 0.0:
            return e
        t *= 2.0
    raise MPGError("could not reach negative energy by scaling constants; is a positive?")


def strong_residual(spec: ProblemSpec, u: GridFunction) -> float:
    """Weighted-l2 norm of the strong equation residual A u - Phi'(u)."""
    g = psi_grad(spec, u).values - phi_grad(spec, u).values
    return float(np.sqrt(weighted_inner(spec.weights, g, g)))


def step_ii_verify(
    spec: ProblemSpec,
    K: ConvexSet,
    u0: GridFunction,
    cfg: SolverConfig,
    tol: float = DEFAULT_MEMBERSHIP_TOL,
) -> tuple[GridFunction, bool, dict]:
    """Second pipeline stage: solve A v0 = Phi'(u0) and test v0 in K.

    The returned diagnostics hold both sides of the a-priori regularity
    chain ||v0||_h2 <= C1 (||u0||_h2^(p-1) + mu ||u0||_h2^(q-1)); the
    membership test itself is the binding certificate.
    """
    rhs = phi_grad(spec, u0)
    v0 = linear_solve(spec.operator, rhs, cfg)
    in_k = contains(K, v0, tol)
    u0_h2 = spec.geometry.h2_norm(u0.values)
    v0_h2 = spec.geometry.h2_norm(v0.values)
    chain = spec.C1 * (u0_h2 ** (spec.p - 1.0))
    if spec.q is not None and spec.mu > 0.0:
        chain += spec.C1 * spec.mu * u0_h2 ** (spec.q - 1.0)
    diag = {"u0_h2": u0_h2, "v0_h2": v0_h2, "chain_bound": chain}
    return v0, in_k, diag


@dataclass
class Certificate:
    """Witness record of the two-stage pipeline on one problem."""

    problem: dict
    verdict: str
    vi_residual: float | None = None
    strong_residual: float | None = None
    v0_in_K: bool | None = None
    eq10_defect: float | None = None
    duality_gap: float | None = None
    energy: float | None = None
    window: tuple[float, float] | None = None
    u0_h2_norm: float | None = None
    v0_h2_norm: float | None = None
    box_bound: float | None = None
    positivity_min: float | None = None
    monotonicity_defect: float | None = None
    mountain_pass_value: float | None = None
    detail: str | None = None
    error: str | None = None
    seed: int = 0
    u0: GridFunction | None = field(default=None, repr=False)
    v0: GridFunction | None = field(default=None, repr=False)

    def to_json_dict(self) -> dict:
        def _f(x):
            return None if x is None else float(x)

        return {
            "problem": self.problem,
            "verdict": self.verdict,
            "vi_residual": _f(self.vi_residual),
            "strong_residual": _f(self.strong_residual),
            "v0_in_K": self.v0_in_K,
            "eq10_defect": _f(self.eq10_defect),
            "duality_gap": _f(self.duality_gap),
            "energy": _f(self.energy),
            "window": (
                {"r1": _f(self.window[0]), "r2": _f(self.window[1])}
                if self.window is not None
                else {"r1": None, "r2": None}
            ),
            "norms": {"u0_h2": _f(self.u0_h2_norm), "v0_h2": _f(self.v0_h2_norm)},
            "box_bound": _f(self.box_bound),
            "positivity_min": _f(self.positivity_min),
            "monotonicity_defect": _f(self.monotonicity_defect),
            "mountain_pass_value": _f(self.mountain_pass_value),
            "detail": self.detail,
            "error": self.error,
            "seed": int(self.seed),
        }


@dataclass
class SolverReport:
    trace: IterTrace
    iterations: int
    reason: str
    converged: bool


def run_problem(
    spec: ProblemSpec,
    cfg: SolverConfig | None = None,
    tol: float = DEFAULT_MEMBERSHIP_TOL,
    tol_strong: float = DEFAULT_TOL_STRONG,
) -> tuple[Certificate, SolverReport]:
    """Full pipeline: solve stage (i), verify stage (ii), assemble the
    certificate.

    Ball families run projected gradient descent over the H^2 ball whose
    radius defaults to the admissibility-window midpoint; the
    Neumann-radial family runs the mountain-pass driver over the monotone
    cone.  Stage failures are captured into the certificate (verdict is
    never ``certified`` on error).
    """
    cfg = cfg or SolverConfig()
    problem_doc = spec.summary()

    window = None
    r_used = spec.r
    if spec.family in BALL_FAMILIES:
        window = radius_window(spec.C1, spec.mu, spec.p, spec.q if spec.q is not None else 1.5)
        if r_used is None:
            if window is None:
                cert = Certificate(
                    problem=problem_doc,
                    verdict=VERDICT_STEP_II_FAILED,
                    window=None,
                    detail=(
                        "empty radius window: no r satisfies "
                        "C1 (r^(p-1) + mu r^(q-1)) <= r; mu exceeds mu_star"
                    ),
                    seed=cfg.seed,
                )
                return cert, SolverReport(IterTrace(), 0, "window", False)
            r_used = default_radius(window)
        problem_doc["r"] = r_used

    K = constraint_set(spec, r_used)
    problem_doc["constraint"] = K.descriptor()
    cert = Certificate(problem=problem_doc, verdict=VERDICT_NOT_CRITICAL, window=window, seed=cfg.seed)

    trace = IterTrace()
    c_value = None
    try:
        if spec.family in BALL_FAMILIES:
            u0, trace = projected_gradient_minimize(spec, K, ball_start(spec, r_used), cfg)
        else:
            e = cone_endpoint(spec)
            u0, trace, c_value = mountain_pass(spec, K, e, cfg)
    except (DivergenceError, IterationLimitError, MPGError, MembershipError) as exc:
        cert.error = f"solve: {exc}"
        if isinstance(exc, DivergenceError):
            trace = exc.trace
        return cert, SolverReport(trace, len(trace), "error", False)

    cert.u0 = u0
    cert.energy = energy(spec, u0).total
    cert.mountain_pass_value = c_value
    if isinstance(K, MonotoneCone):
        vals = u0.values
        cert.positivity_min = float(np.min(vals))
        cert.monotonicity_defect = float(max(0.0, np.max(np.maximum.accumulate(vals) - vals)))
        cert.box_bound = cone_box_bound(u0)

    try:
        cert.vi_residual = vi_residual(spec, K, u0, tol)
        v0, in_k, diag = step_ii_verify(spec, K, u0, cfg, tol)
        cert.v0 = v0
        cert.v0_in_K = in_k
        cert.u0_h2_norm = diag["u0_h2"]
        cert.v0_h2_norm = diag["v0_h2"]
        cert.strong_residual = strong_residual(spec, u0)
        cert.eq10_defect = equality10_defect(spec.operator, u0, v0)
        cert.duality_gap = duality_gap(spec.operator, u0, phi_grad(spec, u0))
    except (IterationLimitError, MembershipError, ValueError) as exc:
        cert.error = f"step-ii: {exc}"
        return cert, SolverReport(trace, len(trace), trace.reason, False)

    if cert.vi_residual > tol:
        cert.verdict = VERDICT_NOT_CRITICAL
        cert.detail = f"vi residual {cert.vi_residual:.3e} above tol {tol:.1e}"
    elif not in_k:
        cert.verdict = VERDICT_STEP_II_FAILED
        cert.detail = (
            f"v0 left the constraint set: ||v0||_h2 = {cert.v0_h2_norm:.6e}"
            if isinstance(K, H2Ball)
            else "v0 left the monotone cone"
        )
    elif cert.strong_residual > tol_strong:
        cert.verdict = VERDICT_NOT_CRITICAL
        cert.detail = (
            f"strong residual {cert.strong_residual:.3e} above tol {tol_strong:.1e}"
        )
    else:
        cert.verdict = VERDICT_CERTIFIED

    converged = trace.reason in ("vi_residual", "step")
    return cert, SolverReport(trace, len(trace), trace.reason, converged)


def _amplitude_spec(spec_template: ProblemSpec, r: float, s: float) -> ProblemSpec:
    """Nonhomogeneous spec with forcing s * f_dir, f_dir the unit-l2
    direction of the template's forcing."""
    if spec_template.family != NONHOMOGENEOUS:
        raise ValueError("the forcing probe applies to the nonhomogeneous family only")
    w = spec_template.weights
    f_vals = spec_template.f.values
    f_norm = math.sqrt(weighted_inner(w, f_vals, f_vals))
    if f_norm == 0.0:
        raise ValueError("forcing direction must be nonzero")
    return ProblemSpec(
        family=NONHOMOGENEOUS,
        grid=spec_template.grid,
        p=spec_template.p,
        f=GridFunction(spec_template.grid, (s / f_norm) * f_vals, spec_template.f.bc),
        C1=spec_template.C1,
        r=r,
    )


def certified_at_amplitude(
    spec_template: ProblemSpec, r: float, cfg: SolverConfig, s: float
) -> bool:
    """Run the full pipeline at forcing amplitude s and report certification."""
    cert, _ = run_problem(_amplitude_spec(spec_template, r, s), cfg)
    return cert.verdict == VERDICT_CERTIFIED and cert.error is None


def forcing_threshold_probe(
    spec_template: ProblemSpec,
    r: float,
    cfg: SolverConfig | None = None,
    s_start: float = 1e-2,
    max_doublings: int = 40,
    bisection_steps: int = 24,
    trace_out: list | None = None,
) -> float:
    """Empirical forcing threshold: largest certified amplitude s along the
    normalized direction of the template's forcing.

    Doubles s until certification fails, then bisects; returns the last
    certified amplitude.  Certification is assumed monotone in s within a
    run; observed flips are logged as warnings (and visible in
    ``trace_out`` when provided).
    """
    cfg = cfg or SolverConfig()

    def certified(s: float) -> bool:
        ok = certified_at_amplitude(spec_template, r, cfg, s)
        if trace_out is not None:
            trace_out.append((s, ok))
        return ok

    if not certified(0.0):
        raise RuntimeError("pipeline failed to certify the zero forcing; internal error")

    s_lo, s_hi = 0.0, s_start
    for _ in range(max_doublings):
        if not certified(s_hi):
            break
        s_lo = s_hi
        s_hi *= 2.0
    else:
        logger.warning("forcing probe never failed up to s = %.3e", s_lo)
        return s_lo

    for _ in range(bisection_steps):
        mid = 0.5 * (s_lo + s_hi)
        if certified(mid):
            s_lo = mid
        else:
            s_hi = mid

    if trace_out is not None:
        by_s = sorted(trace_out)
        flips = sum(
            1 for (s1, ok1), (s2, ok2) in zip(by_s, by_s[1:]) if (not ok1) and ok2
        )
        if flips:
            logger.warning("forcing probe observed %d non-monotone certification flips", flips)
    return s_lo
