"""Command-line front end: load a problem configuration, run the pipeline
or the analysis utilities, and write certificates, traces, and profiles.

Commands
--------
solve         run the full pipeline on a JSON config; writes
              certificate.json, trace.csv, profile.csv
window        print the admissibility window {r1, r2} and mu_star
probe-lambda  bisect the forcing amplitude threshold of a nonhomogeneous
              config

Exit codes: 0 certified, 2 clean non-certification, 1 errors.  Logging
verbosity comes from the ``HINTCVX_LOG`` environment variable
(quiet | info | debug).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .functionals import CONCAVE_CONVEX, FAMILIES, NONHOMOGENEOUS, ProblemSpec
from .grid import (
    DIRICHLET_ZERO,
    GridFunction,
    NEUMANN_ZERO,
    RadialGrid,
    Square2DGrid,
)
from .principle import (
    VERDICT_CERTIFIED,
    certified_at_amplitude,
    default_radius,
    forcing_threshold_probe,
    mu_star,
    radius_window,
    run_problem,
)
from .solvers import SolverConfig

logger = logging.getLogger("hintcvx.cli")

SCHEMA_VERSION = 1
PROFILE_KINDS = ("constant", "affine", "sin-pi", "values")


class ConfigError(ValueError):
    """Schema violation, reported with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _require_mapping(doc, path: str) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError(path, f"expected an object, got {type(doc).__name__}")
    return doc


def _check_keys(doc: dict, allowed: set[str], required: set[str], path: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown key (fail-closed schema)")
    missing = required - set(doc)
    if missing:
        raise ConfigError(f"{path}.{sorted(missing)[0]}", "required key missing")


def _number(doc: dict, key: str, path: str, default=None):
    if key not in doc:
        return default
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {val!r}")
    return float(val)


def _build_grid(doc, path: str):
    doc = _require_mapping(doc, path)
    kind = doc.get("kind")
    if kind == "radial":
        _check_keys(doc, {"kind", "n", "dim", "bc"}, {"kind", "n"}, path)
        n = doc["n"]
        if not isinstance(n, int) or n < 3:
            raise ConfigError(f"{path}.n", f"expected an integer >= 3, got {n!r}")
        dim = doc.get("dim", 1)
        if not isinstance(dim, int) or dim < 1:
            raise ConfigError(f"{path}.dim", f"expected an integer >= 1, got {dim!r}")
        return RadialGrid(n=n, dim=dim)
    if kind == "square2d":
        _check_keys(doc, {"kind", "m", "bc"}, {"kind", "m"}, path)
        m = doc["m"]
        if not isinstance(m, int) or m < 2:
            raise ConfigError(f"{path}.m", f"expected an integer >= 2, got {m!r}")
        return Square2DGrid(m=m)
    raise ConfigError(f"{path}.kind", f"expected 'radial' or 'square2d', got {kind!r}")


def _build_profile(doc, grid, bc: str, path: str) -> GridFunction:
    """Materialize a node-wise profile (forcing f or weight a) from its
    descriptor."""
    doc = _require_mapping(doc, path)
    kind = doc.get("kind")
    if kind not in PROFILE_KINDS:
        raise ConfigError(f"{path}.kind", f"expected one of {PROFILE_KINDS}, got {kind!r}")
    if kind == "constant":
        _check_keys(doc, {"kind", "value"}, {"kind", "value"}, path)
        vals = np.full(grid.size, _number(doc, "value", path))
    elif kind == "affine":
        _check_keys(doc, {"kind", "intercept", "slope"}, {"kind"}, path)
        if not isinstance(grid, RadialGrid):
            raise ConfigError(f"{path}.kind", "affine profiles need a radial grid")
        vals = _number(doc, "intercept", path, 0.0) + _number(doc, "slope", path, 0.0) * grid.nodes
    elif kind == "sin-pi":
        _check_keys(doc, {"kind", "amplitude"}, {"kind"}, path)
        amp = _number(doc, "amplitude", path, 1.0)
        if isinstance(grid, RadialGrid):
            vals = amp * np.sin(np.pi * grid.nodes)
        else:
            xs, ys = grid.nodes
            vals = amp * np.sin(np.pi * xs) * np.sin(np.pi * ys)
    else:
        _check_keys(doc, {"kind", "values"}, {"kind", "values"}, path)
        raw = doc["values"]
        if not isinstance(raw, list) or len(raw) != grid.size:
            raise ConfigError(f"{path}.values", f"expected a list of {grid.size} numbers")
        vals = np.asarray(raw, dtype=float)
    try:
        return GridFunction(grid, vals, bc)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def build_problem_spec(doc, path: str = "problem") -> ProblemSpec:
    doc = _require_mapping(doc, path)
    _check_keys(
        doc,
        {"family", "grid", "p", "q", "mu", "C1", "r", "f", "a"},
        {"family", "grid", "p"},
        path,
    )
    family = doc["family"]
    if family not in FAMILIES:
        raise ConfigError(f"{path}.family", f"expected one of {FAMILIES}, got {family!r}")
    grid = _build_grid(doc["grid"], f"{path}.grid")

    p = _number(doc, "p", path)
    if p is None or p <= 2.0:
        raise ConfigError(f"{path}.p", f"expected p > 2, got {doc.get('p')!r}")
    q = _number(doc, "q", path)
    if q is not None and not (1.0 < q < 2.0):
        raise ConfigError(f"{path}.q", f"expected 1 < q < 2, got {q!r}")
    mu = _number(doc, "mu", path, 0.0)
    if mu < 0.0:
        raise ConfigError(f"{path}.mu", f"expected mu >= 0, got {mu!r}")
    C1 = _number(doc, "C1", path, 1.0)
    if C1 <= 0.0:
        raise ConfigError(f"{path}.C1", f"expected C1 > 0, got {C1!r}")
    r = _number(doc, "r", path)
    if r is not None and r <= 0.0:
        raise ConfigError(f"{path}.r", f"expected r > 0, got {r!r}")

    f = a = None
    if "f" in doc:
        # data profiles are unconstrained; the interior-only square grid
        # carries the dirichlet tag structurally
        f_bc = DIRICHLET_ZERO if isinstance(grid, Square2DGrid) else NEUMANN_ZERO
        f = _build_profile(doc["f"], grid, f_bc, f"{path}.f")
    if "a" in doc:
        if not isinstance(grid, RadialGrid):
            raise ConfigError(f"{path}.a", "the weight a needs a radial grid")
        a = _build_profile(doc["a"], grid, NEUMANN_ZERO, f"{path}.a")

    try:
        return ProblemSpec(family=family, grid=grid, p=p, q=q, mu=mu, f=f, a=a, C1=C1, r=r)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def build_solver_config(doc, path: str = "solver") -> SolverConfig:
    if doc is None:
        return SolverConfig()
    doc = _require_mapping(doc, path)
    fields = {f.name for f in dataclasses.fields(SolverConfig)}
    _check_keys(doc, fields, set(), path)
    kwargs = {}
    for key, val in doc.items():
        if key in ("max_iters", "cg_max_iters", "seed", "path_nodes"):
            if not isinstance(val, int) or isinstance(val, bool):
                raise ConfigError(f"{path}.{key}", f"expected an integer, got {val!r}")
            kwargs[key] = val
        else:
            kwargs[key] = _number(doc, key, path)
    try:
        return SolverConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


@dataclass
class RunConfig:
    spec: ProblemSpec
    solver: SolverConfig
    output_dir: str
    emit: dict


def parse_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from exc
    doc = _require_mapping(doc, "config")
    _check_keys(
        doc,
        {"schema_version", "problem", "solver", "output_dir", "emit"},
        {"schema_version", "problem"},
        "config",
    )
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ConfigError("config.schema_version", f"expected {SCHEMA_VERSION}")
    spec = build_problem_spec(doc["problem"])
    solver = build_solver_config(doc.get("solver"))
    emit = {"certificate": True, "trace": True, "profile": True}
    if "emit" in doc:
        emit_doc = _require_mapping(doc["emit"], "emit")
        _check_keys(emit_doc, set(emit), set(), "emit")
        for key, val in emit_doc.items():
            if not isinstance(val, bool):
                raise ConfigError(f"emit.{key}", f"expected a boolean, got {val!r}")
            emit[key] = val
    output_dir = doc.get("output_dir", ".")
    if not isinstance(output_dir, str):
        raise ConfigError("config.output_dir", "expected a string path")
    return RunConfig(spec=spec, solver=solver, output_dir=output_dir, emit=emit)


def _write_profile(path, spec: ProblemSpec, u0: GridFunction, v0: GridFunction | None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        v0_vals = v0.values if v0 is not None else [""] * spec.grid.size
        if isinstance(spec.grid, RadialGrid):
            writer.writerow(["coord", "u0", "v0"])
            for r, a, b in zip(spec.grid.nodes, u0.values, v0_vals):
                writer.writerow([repr(r), repr(a), repr(b) if b != "" else ""])
        else:
            writer.writerow(["x", "y", "u0", "v0"])
            xs, ys = spec.grid.nodes
            for x, y, a, b in zip(xs, ys, u0.values, v0_vals):
                writer.writerow([repr(x), repr(y), repr(a), repr(b) if b != "" else ""])


def cmd_solve(args) -> int:
    try:
        run_cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    solver = run_cfg.solver
    if args.seed is not None:
        solver = dataclasses.replace(solver, seed=args.seed)
    out_dir = Path(args.out or run_cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        cert, report = run_problem(run_cfg.spec, solver)
    except ValueError as exc:
        print(f"solve: {exc}", file=sys.stderr)
        return 1

    if run_cfg.emit["certificate"]:
        doc = cert.to_json_dict()
        doc["timestamp"] = datetime.now(timezone.utc).isoformat()
        with open(out_dir / "certificate.json", "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    if run_cfg.emit["trace"] and len(report.trace):
        report.trace.to_csv(out_dir / "trace.csv")
    if run_cfg.emit["profile"] and cert.u0 is not None:
        _write_profile(out_dir / "profile.csv", run_cfg.spec, cert.u0, cert.v0)

    print(f"verdict: {cert.verdict}" + (f" ({cert.detail})" if cert.detail else ""))
    if cert.error is not None:
        print(f"stage error: {cert.error}", file=sys.stderr)
        return 1
    return 0 if cert.verdict == VERDICT_CERTIFIED else 2


def cmd_window(args) -> int:
    try:
        window = radius_window(args.C1, args.mu, args.p, args.q)
        star = mu_star(args.C1, args.p, args.q)
    except ValueError as exc:
        print(f"window: {exc}", file=sys.stderr)
        return 1
    doc = {
        "r1": None if window is None else window[0],
        "r2": None if window is None else window[1],
        "mu_star": star,
    }
    print(json.dumps(doc))
    return 0


def cmd_probe_lambda(args) -> int:
    try:
        run_cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    spec = run_cfg.spec
    if spec.family != NONHOMOGENEOUS:
        print(
            f"probe-lambda needs a nonhomogeneous config, got family {spec.family!r}",
            file=sys.stderr,
        )
        return 1
    solver = run_cfg.solver
    if args.seed is not None:
        solver = dataclasses.replace(solver, seed=args.seed)
    r = spec.r
    if r is None:
        window = radius_window(spec.C1, 0.0, spec.p, 1.5)
        r = default_radius(window)
    evaluations: list = []
    try:
        lam = forcing_threshold_probe(spec, r, solver, trace_out=evaluations)
    except (ValueError, RuntimeError) as exc:
        print(f"probe: {exc}", file=sys.stderr)
        return 1
    ordered = sorted(evaluations)
    flips = sum(1 for (_, ok1), (_, ok2) in zip(ordered, ordered[1:]) if (not ok1) and ok2)
    doc = {
        "lambda_hat": lam,
        "r": r,
        "certified_at_lambda": certified_at_amplitude(spec, r, solver, lam),
        "certified_at_2lambda": certified_at_amplitude(spec, r, solver, 2.0 * lam),
        "evaluations": len(evaluations),
        "non_monotone_flips": flips,
    }
    print(json.dumps(doc))
    return 0


def _configure_logging() -> None:
    level_name = os.environ.get("HINTCVX_LOG", "quiet").lower()
    levels = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level_name not in levels:
        logger.warning("unknown HINTCVX_LOG value %r; using quiet", level_name)
    logging.basicConfig(level=levels.get(level_name, logging.ERROR), stream=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hintcvx",
        description="solve and certify constrained semilinear elliptic problems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run the full pipeline on a config file")
    p_solve.add_argument("--config", required=True, help="path to the JSON run configuration")
    p_solve.add_argument("--out", default=None, help="output directory (overrides config)")
    p_solve.add_argument("--seed", type=int, default=None, help="override the solver seed")
    p_solve.set_defaults(func=cmd_solve)

    p_window = sub.add_parser("window", help="print the radius window and mu_star")
    p_window.add_argument("--C1", type=float, required=True)
    p_window.add_argument("--mu", type=float, required=True)
    p_window.add_argument("--p", type=float, required=True)
    p_window.add_argument("--q", type=float, required=True)
    p_window.set_defaults(func=cmd_window)

    p_probe = sub.add_parser("probe-lambda", help="bisect the forcing amplitude threshold")
    p_probe.add_argument("--config", required=True, help="nonhomogeneous run configuration")
    p_probe.add_argument("--seed", type=int, default=None, help="override the solver seed")
    p_probe.set_defaults(func=cmd_probe_lambda)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
