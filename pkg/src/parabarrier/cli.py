"""Command-line entry point: ``parabarrier <subcommand>``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import barriers as B
from . import grid as G
from .coercivity import profile
from .operators import from_key
from .phi import PhiError, exp_phi, nonlinearity_from_key, solve_phi
from .problem import Inapplicable, ProblemError, problem_from_dict

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_INAPPLICABLE = 0, 1, 2, 3
DEFAULT_SEED = 42
TOL_FLOOR = float(np.finfo(float).eps)
KNOWN_CHECKS = ("coercivity", "concavity", "verify", "compatibility", "continuity",
                "identities", "max_principle", "sandwich", "transform")
GRID_CHECKS = {"max_principle", "sandwich"}
BARRIER_CHECKS = {"verify", "compatibility", "continuity", "identities", "sandwich"}
CONFIG_KEYS = {"seed", "problem", "grid", "barriers", "tolerances", "checks", "output"}
DEFAULT_TOLS = {"residual": B.RES_TOL, "continuity": 1e-6, "identities": 1e-12}


class ConfigError(ValueError):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _write_or_print(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _floats(raw: str, n: Optional[int] = None) -> list[float]:
    try:
        vals = [float(v) for v in raw.split(",")]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {raw!r}") from exc
    if n is not None and len(vals) != n:
        raise ConfigError(f"expected {n} numbers, got {raw!r}")
    return vals


def load_document(path: str) -> dict:
    """Read a YAML (or JSON, a YAML subset) document."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("top level of a config must be a mapping")
    return doc


def bundled_config(name: str) -> Path:
    ref = resources.files("parabarrier") / "configs" / f"{name}.cfg"
    if not ref.is_file():
        raise ConfigError(f"no bundled config named {name!r}")
    return Path(str(ref))


# ---------------------------------------------------------------------------
# subcommands


def cmd_coercivity(args) -> int:
    op = from_key(args.operator, args.dim)
    prof = profile(op, args.lambda_min, args.lambda_max, args.points, args.samples)
    _write_or_print(dumps(prof.as_dict()), args.out)
    return EXIT_OK


def cmd_phi(args) -> int:
    lo, hi = _floats(args.span, 2)
    if args.nonlinearity == "unit" and args.k == 1:
        sol = exp_phi((lo, hi), args.steps)
    else:
        sol = solve_phi(nonlinearity_from_key(args.nonlinearity), args.k, args.phi0, (lo, hi), args.steps)
    summary = {"closed_form": sol.closed_form_tag, "truncated": sol.truncated, "k": sol.k,
               "value_range": list(sol.value_range), "steps": len(sol.tau_grid) - 1}
    if sol.closed_form is not None:
        summary["max_closed_form_error"] = float(np.abs(sol.closed_form(sol.tau_grid) - sol.phi_grid).max())
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "phi", "dphi"])
            for row in zip(sol.tau_grid, sol.phi_grid, sol.dphi_grid):
                w.writerow([repr(float(v)) for v in row])
    _write_or_print(dumps(summary), args.out)
    return EXIT_OK


def _problem(path: str):
    doc = load_document(path)
    return problem_from_dict(doc.get("problem", doc))


def cmd_barrier(args) -> int:
    ps = _problem(args.problem)
    x, y, s = _floats(args.anchor, 3)
    kw = {}
    if args.lambda_bar is not None:
        kw["lambda_bar"] = args.lambda_bar
    bar = B.build(ps, args.family, (x, y), s, args.eps, **kw)
    rep = B.verify_inequality(ps, bar, args.samples, args.seed)
    comp = B.boundary_compatibility(ps, bar, args.samples, args.seed)
    cont = B.continuity_gap(bar, 1000, args.seed)
    ids = B.parameter_identities(bar)
    ok = rep.passed and comp.passed and cont <= 1e-6 and max(ids.values(), default=0.0) <= 1e-12
    out = {"barrier": bar.as_dict(), "residual": rep.as_dict(), "compatibility": comp.as_dict(),
           "continuity_gap": cont, "identities": ids, "passed": ok}
    _write_or_print(dumps(out), args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_solve(args) -> int:
    ps = _problem(args.problem)
    nx, ny, nt = (int(v) for v in _floats(args.grid, 3))
    ps.validate()
    fld = G.solve_problem(ps, nx, ny, args.scheme, levels=nt, c1=args.c1)
    G.write_field(args.out, fld)
    if args.csv:
        G.write_slices(args.csv, fld)
    mp = G.check_max_principle(ps, fld)
    summary = {"levels": fld.nt, "substeps": len(fld.dt_history), "dt_max": fld.dt,
               "tol_grid": fld.tol_grid, "max_principle": mp.as_dict()}
    sys.stdout.write(dumps(summary))
    return EXIT_OK if mp.passed else EXIT_FAIL


def cmd_selftest(args) -> int:
    from .acceptance import run_all

    only = [int(v) for v in _floats(args.only)] if args.only else None
    results = run_all(only)
    if args.out:
        Path(args.out).write_text(dumps([r.as_dict() for r in results]))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


# ---------------------------------------------------------------------------
# config-driven pipeline


def _validate_config(doc: dict) -> dict:
    unknown = set(doc) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    checks = doc.get("checks", [])
    if not isinstance(checks, list) or any(c not in KNOWN_CHECKS for c in checks):
        raise ConfigError(f"checks must be a list drawn from {list(KNOWN_CHECKS)}")
    if checks and "problem" not in doc:
        raise ConfigError("checks need a problem block")
    tols = dict(DEFAULT_TOLS)
    for k, v in (doc.get("tolerances") or {}).items():
        if k not in DEFAULT_TOLS:
            raise ConfigError(f"unknown tolerance {k!r}")
        if not isinstance(v, (int, float)) or v < TOL_FLOOR:
            raise ConfigError(f"tolerance {k} must be a number >= {TOL_FLOOR}")
        tols[k] = float(v)
    seed = doc.get("seed", DEFAULT_SEED)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    grid = doc.get("grid") or {}
    if set(checks) & GRID_CHECKS:
        if grid.get("scheme") not in G.SCHEMES:
            raise ConfigError(f"grid.scheme must be one of {G.SCHEMES}")
        n = grid.get("n")
        if not (isinstance(n, list) and len(n) == 2 and all(isinstance(v, int) for v in n)):
            raise ConfigError("grid.n must be two integers")
    anchors = (doc.get("barriers") or {}).get("anchors", [])
    for a in anchors:
        if a.get("family") not in B.FAMILIES or len(a.get("point", [])) != 2:
            raise ConfigError(f"bad barrier anchor {a!r}")
    return {"checks": checks, "tols": tols, "seed": seed, "grid": grid, "anchors": anchors}


def run_config(path: str, out_dir: Optional[str] = None) -> tuple[int, dict]:
    """Execute a config; returns (exit code, report)."""
    doc = load_document(path)
    cfg = _validate_config(doc)
    checks, tols, seed = cfg["checks"], cfg["tols"], cfg["seed"]
    report: dict = {"seed": seed, "checks": {}}
    if not checks:
        return EXIT_OK, report
    ps = problem_from_dict(doc["problem"])
    res = report["checks"]
    bdoc = doc.get("barriers") or {}
    samples = int(bdoc.get("samples", 10000))
    eps = bdoc.get("eps")

    if "coercivity" in checks:
        prof = ps.coer
        res["coercivity"] = {"passed": prof.case_tag in ("CaseI", "CaseII"), "case": prof.case_tag,
                             "lambda1": prof.lambda1, "lambda0": prof.lambda0, "lambda_bar": prof.lambda_bar}
    # the concavity gate precedes every construction
    ps.validate()
    if "concavity" in checks:
        res["concavity"] = {"passed": True, "part": ps.part, "k": ps.operator.k}

    bars = []
    if set(checks) & BARRIER_CHECKS:
        for a in cfg["anchors"]:
            kw = {k: a[k] for k in ("lambda_bar", "beta_margin", "delta_hint") if k in a}
            bars.append(B.build(ps, a["family"], tuple(a["point"]), float(a.get("s", 0.0)), eps, **kw))
    if "verify" in checks:
        rows = [B.verify_inequality(ps, b, samples, seed + i, tols["residual"]).as_dict() for i, b in enumerate(bars)]
        res["verify"] = {"passed": all(r["passed"] for r in rows), "barriers": rows}
    if "compatibility" in checks:
        rows = [B.boundary_compatibility(ps, b, samples, seed + i).as_dict() for i, b in enumerate(bars)]
        res["compatibility"] = {"passed": all(r["passed"] for r in rows), "barriers": rows}
    if "continuity" in checks:
        gaps = [B.continuity_gap(b, 1000, seed + i) for i, b in enumerate(bars)]
        res["continuity"] = {"passed": all(g <= tols["continuity"] for g in gaps), "gaps": gaps}
    if "identities" in checks:
        ids = [B.parameter_identities(b) for b in bars]
        worst = max((max(d.values(), default=0.0) for d in ids), default=0.0)
        res["identities"] = {"passed": worst <= tols["identities"], "worst": worst}
    if "transform" in checks:
        res["transform"] = _transform_check(ps, cfg["grid"])

    if set(checks) & GRID_CHECKS:
        g = cfg["grid"]
        fld = G.solve_problem(ps, g["n"][0], g["n"][1], g["scheme"], int(g.get("levels", 8)),
                              c1=float(g.get("c1", G.C1_DEFAULT)))
        report["grid"] = {"levels": fld.nt, "substeps": len(fld.dt_history), "dt_max": fld.dt,
                          "tol_grid": fld.tol_grid}
        if "max_principle" in checks:
            res["max_principle"] = G.check_max_principle(ps, fld).as_dict()
        if "sandwich" in checks:
            bumps = [b for b in bars if b.is_bump]
            indents = [b for b in bars if not b.is_bump]
            res["sandwich"] = G.check_sandwich(ps, fld, bumps, indents).as_dict()
        csv_name = (doc.get("output") or {}).get("csv")
        if csv_name and out_dir:
            G.write_slices(Path(out_dir) / csv_name, fld)
    if bars:
        report["barriers"] = [b.as_dict() for b in bars]
    ok = all(v["passed"] for v in res.values())
    return (EXIT_OK if ok else EXIT_FAIL), report


def _transform_check(ps, g) -> dict:
    n = g.get("n", [32, 32])
    if ps.operator.family != "p_laplacian_variant":
        raise Inapplicable("the transform check needs a divergence-form operator")
    if ps.nl.is_unit and ps.operator.k == 1:
        phi = exp_phi((-5.0, 5.0), 20000)
    else:
        phi = solve_phi(ps.nl, ps.operator.k, ps.theta, (-2.0, 2.0), 4000)
    u = G.solve_problem(ps, n[0], n[1], "plap", int(g.get("levels", 8)))
    v = G.solve_problem(ps, n[0], n[1], "plap", int(g.get("levels", 8)), phi=phi)
    w = G.map_back(v, phi)
    diff = float(np.abs(u.values - w.values).max())
    tol = max(u.tol_grid, w.tol_grid)
    return {"passed": diff <= tol, "max_difference": diff, "tol_grid": tol}


def cmd_run(args) -> int:
    path = str(bundled_config(args.bundled)) if args.bundled else args.config
    if not path:
        raise ConfigError("give a config path or --bundled NAME")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    code, report = run_config(path, str(out_dir))
    (out_dir / "report.json").write_text(dumps(report))
    sys.stdout.write(f"exit {code}: report written to {out_dir / 'report.json'}\n")
    return code


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parabarrier", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("coercivity", help="m(lambda), mu(lambda) profile and case classification")
    c.add_argument("--operator", required=True, help="operator key, e.g. 'pucci_minus(1,3,1)'")
    c.add_argument("--dim", type=int, default=2)
    c.add_argument("--lambda-min", type=float, default=-4.0)
    c.add_argument("--lambda-max", type=float, default=6.0)
    c.add_argument("--points", type=int, default=81)
    c.add_argument("--samples", type=int, default=4096)
    c.add_argument("--out")
    c.set_defaults(fn=cmd_coercivity)

    f = sub.add_parser("phi", help="solve phi' = f(phi)^(1/(k-1))")
    f.add_argument("--nonlinearity", required=True, help="unit | const:c | power:coef,expo")
    f.add_argument("--k", type=float, required=True)
    f.add_argument("--phi0", type=float, default=1.0)
    f.add_argument("--span", default="0,1")
    f.add_argument("--steps", type=int, default=1000)
    f.add_argument("--csv")
    f.add_argument("--out")
    f.set_defaults(fn=cmd_phi)

    b = sub.add_parser("barrier", help="build and verify one barrier")
    b.add_argument("--problem", required=True)
    b.add_argument("--family", required=True, choices=B.FAMILIES)
    b.add_argument("--anchor", required=True, help="x,y,s")
    b.add_argument("--eps", type=float)
    b.add_argument("--lambda-bar", type=float)
    b.add_argument("--samples", type=int, default=10000)
    b.add_argument("--seed", type=int, default=DEFAULT_SEED)
    b.add_argument("--out")
    b.set_defaults(fn=cmd_barrier)

    s = sub.add_parser("solve", help="explicit grid solve")
    s.add_argument("--problem", required=True)
    s.add_argument("--grid", required=True, help="nx,ny,nt")
    s.add_argument("--scheme", required=True, choices=G.SCHEMES)
    s.add_argument("--c1", type=float, default=G.C1_DEFAULT)
    s.add_argument("--out", required=True)
    s.add_argument("--csv")
    s.set_defaults(fn=cmd_solve)

    r = sub.add_parser("run", help="execute a config file")
    r.add_argument("config", nargs="?")
    r.add_argument("--bundled", help="name of a bundled config, e.g. inf_laplacian_trudinger")
    r.add_argument("--out-dir", default=".")
    r.set_defaults(fn=cmd_run)

    t = sub.add_parser("selftest", help="run the acceptance suite")
    t.add_argument("--only", help="comma-separated criterion numbers")
    t.add_argument("--out")
    t.set_defaults(fn=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Inapplicable as exc:
        sys.stderr.write(f"inapplicable: {exc}\n")
        return EXIT_INAPPLICABLE
    except (ConfigError, PhiError, ProblemError, ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, (G.GridError, B.ConstructionError)):
            sys.stderr.write(f"failure: {exc}\n")
            return EXIT_FAIL
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
