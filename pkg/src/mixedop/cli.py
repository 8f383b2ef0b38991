"""Config-driven experiment runner.

    mixedop solve --config run.yaml --out results/
    mixedop gibbons --preset gibbons_line --out results/
    mixedop presets --json

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 malformed config, 3 solver failure.
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass, field
import hashlib
import json
import logging
import math
from pathlib import Path
import sys

import numpy as np
import yaml

from . import __version__
from .grid import Grid, build_box, build_disc, build_interval, build_strip, descriptor_dict, is_reflection_symmetric
from .kernel import MODES, Field, MixedOperator, assemble, reduce_strip
from .semilinear import PRESETS, SolverError, SolverParams, layer_guess, preset, solve_dirichlet, solve_gibbons
from .spectral import EigenError, lambda1, lambda1_volume_scan, local_lambda1
from .symmetry import moving_plane_scan, onedim_variation, symmetry_report

log = logging.getLogger(__name__)

EXPERIMENTS = ("solve", "eigen", "volume_scan", "symmetry", "gibbons")
SUBCOMMANDS = {"solve": "solve", "eigen": "eigen", "scan": "volume_scan", "symmetry": "symmetry", "gibbons": "gibbons"}

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


# --------------------------------------------------------------------------- presets

EXPERIMENT_PRESETS: dict[str, dict] = {
    "torsion_interval": {
        "experiment": "symmetry",
        "domain": {"kind": "interval", "bounds": [-1.0, 1.0], "n": 201},
        "s": 0.5,
        "nonlinearity": {"name": "constant_one"},
        "initial_guess": {"kind": "random", "amplitude": 1.0},
        "anchor": "torsion on an interval: positive solution is even and increasing on the left half",
    },
    "affine_disc": {
        "experiment": "symmetry",
        "domain": {"kind": "disc", "radius": 1.0, "n": 41},
        "s": 0.5,
        "nonlinearity": {"name": "affine", "params": {"a": 1.0, "b": 0.5}},
        "initial_guess": {"kind": "random", "amplitude": 1.0},
        "anchor": "affine source on a disc: symmetry about both coordinate axes",
    },
    "eigen_interval": {
        "experiment": "eigen",
        "domain": {"kind": "interval", "bounds": [-1.0, 1.0], "n": 201},
        "s": 0.5,
        "anchor": "first eigenvalue dominates the local-only eigenvalue",
    },
    "scan_interval": {
        "experiment": "volume_scan",
        "domain": {"kind": "interval", "bounds": [-1.0, 1.0], "n": 81},
        "s": 0.5,
        "scan": {"family": "interval", "radii": [1.0, 0.5, 0.25, 0.125], "nodes_per_diameter": 81},
        "anchor": "first eigenvalue blows up as the domain volume shrinks",
    },
    "gibbons_line": {
        "experiment": "gibbons",
        "domain": {"kind": "interval", "bounds": [-20.0, 20.0], "n": 801},
        "s": 0.5,
        "nonlinearity": {"name": "allen_cahn"},
        "initial_guess": {"kind": "layer"},
        "anchor": "layer solution with far field -1 / +1: odd and increasing profile",
    },
    "gibbons_strip": {
        "experiment": "gibbons",
        "domain": {"kind": "strip", "half_width": 2.0, "half_length": 20.0, "h": 0.1},
        "s": 0.5,
        "nonlinearity": {"name": "allen_cahn"},
        "initial_guess": {"kind": "layer", "amplitude": 0.3},
        "anchor": "layer solution on a periodic strip relaxes to a y-independent profile",
    },
}


def list_presets(as_json: bool = False) -> str:
    nl = {name: {"anchor": PRESETS[name]().anchor, "gibbons_admissible": PRESETS[name]().gibbons_admissible}
          for name in sorted(PRESETS)}
    ex = {name: {"experiment": cfg["experiment"], "anchor": cfg["anchor"]} for name, cfg in sorted(EXPERIMENT_PRESETS.items())}
    if as_json:
        return json.dumps({"nonlinearities": nl, "experiments": ex}, indent=2, sort_keys=True)
    lines = ["nonlinearities:"]
    lines += [f"  {k:<14} {v['anchor']}" for k, v in nl.items()]
    lines.append("experiments:")
    lines += [f"  {k:<18} [{v['experiment']}] {v['anchor']}" for k, v in ex.items()]
    return "\n".join(lines)


# --------------------------------------------------------------------------- config


@dataclass
class ExperimentConfig:
    experiment: str
    domain: dict
    s: float
    mode: str = "paper"
    nonlinearity: dict | None = None
    solver: SolverParams = field(default_factory=SolverParams)
    initial_guess: dict = field(default_factory=dict)
    scan: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    output: str | None = None
    seed: int = 0
    raw: dict = field(default_factory=dict)

    def config_hash(self) -> str:
        blob = json.dumps(_jsonable(self.raw), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


DEFAULT_TOLERANCES = {"plane": 1e-8, "monotonicity": 1e-12, "onedim": 1e-6, "oddness": 1e-6}


def _number(raw: dict, key: str, path: str, default=None, positive=False, integer=False):
    if key not in raw:
        if default is None:
            raise ConfigError(path, "missing")
        return default
    val = raw[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(path, "must be a number")
    if not math.isfinite(val):
        raise ConfigError(path, "must be finite")
    if integer and int(val) != val:
        raise ConfigError(path, "must be an integer")
    if positive and val <= 0:
        raise ConfigError(path, "must be positive")
    return int(val) if integer else float(val)


def parse_config(raw, experiment: str | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a mapping")
    exp = raw.get("experiment", experiment)
    if exp is None:
        raise ConfigError("experiment", "missing")
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {exp!r}")
    if experiment is not None and exp != experiment:
        raise ConfigError("experiment", f"config declares {exp!r} but the subcommand runs {experiment!r}")
    s = _number(raw, "s", "s")
    if not 0 < s < 1:
        raise ConfigError("s", f"s must lie in (0, 1), got {s}")
    mode = raw.get("mode", "paper")
    if mode not in MODES:
        raise ConfigError("mode", f"unknown normalization mode {mode!r}")
    domain = raw.get("domain")
    if not isinstance(domain, dict):
        raise ConfigError("domain", "must be a mapping")
    nl = raw.get("nonlinearity")
    if exp in ("solve", "symmetry", "gibbons"):
        if not isinstance(nl, dict) or "name" not in nl:
            raise ConfigError("nonlinearity.name", "missing")
        if nl["name"] not in PRESETS:
            raise ConfigError("nonlinearity.name", f"unknown preset {nl['name']!r}")
        params = nl.get("params", {}) or {}
        if not isinstance(params, dict):
            raise ConfigError("nonlinearity.params", "must be a mapping")
        try:
            preset(nl["name"], **params)
        except TypeError as exc:
            raise ConfigError("nonlinearity.params", str(exc)) from None
    solver_raw = raw.get("solver", {}) or {}
    if not isinstance(solver_raw, dict):
        raise ConfigError("solver", "must be a mapping")
    base = SolverParams()
    solver = SolverParams(
        tol=_number(solver_raw, "tol", "solver.tol", base.tol, positive=True),
        max_iter=_number(solver_raw, "max_iter", "solver.max_iter", base.max_iter, positive=True, integer=True),
        max_halvings=_number(solver_raw, "max_halvings", "solver.max_halvings", base.max_halvings, positive=True, integer=True),
    )
    tols = dict(DEFAULT_TOLERANCES)
    for key, val in (raw.get("tolerances", {}) or {}).items():
        tols[key] = _number({key: val}, key, f"tolerances.{key}", positive=True)
    seed = _number(raw, "seed", "seed", 0, integer=True) if "seed" in raw else 0
    guess = raw.get("initial_guess", {}) or {}
    if not isinstance(guess, dict) or guess.get("kind", "zero") not in ("zero", "random", "layer"):
        raise ConfigError("initial_guess.kind", "must be one of zero, random, layer")
    scan = raw.get("scan", {}) or {}
    if exp == "volume_scan":
        if scan.get("family", "interval") not in ("interval", "disc"):
            raise ConfigError("scan.family", "must be interval or disc")
        radii = scan.get("radii")
        if not isinstance(radii, list) or not radii:
            raise ConfigError("scan.radii", "must be a nonempty list")
        for r in radii:
            _number({"r": r}, "r", "scan.radii", positive=True)
    return ExperimentConfig(exp, domain, s, mode, nl, solver, guess, scan, tols,
                            raw.get("output"), seed, raw)


def load_config(path: str | Path, experiment: str | None = None) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    return parse_config(raw, experiment)


def build_grid(domain: dict) -> Grid:
    kind = domain.get("kind")
    try:
        if kind == "interval":
            bounds = domain.get("bounds")
            if not (isinstance(bounds, list) and len(bounds) == 2):
                raise ConfigError("domain.bounds", "must be a pair [a, b]")
            return build_interval(float(bounds[0]), float(bounds[1]), _number(domain, "n", "domain.n", integer=True))
        if kind == "box":
            bounds = domain.get("bounds")
            if not (isinstance(bounds, list) and len(bounds) == 2):
                raise ConfigError("domain.bounds", "must be [[x0, y0], [x1, y1]]")
            return build_box(bounds[0], bounds[1], _number(domain, "n", "domain.n", integer=True))
        if kind == "disc":
            center = domain.get("center", [0.0, 0.0])
            return build_disc(_number(domain, "radius", "domain.radius"), _number(domain, "n", "domain.n", integer=True), center)
        if kind == "strip":
            return build_strip(_number(domain, "half_width", "domain.half_width"),
                               _number(domain, "half_length", "domain.half_length"),
                               _number(domain, "h", "domain.h"))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError("domain", str(exc)) from None
    raise ConfigError("domain.kind", f"unknown domain kind {kind!r}")


# --------------------------------------------------------------------------- output


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_json(path: Path, obj: dict):
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_field(path: Path, u: Field, interior_only: bool = True):
    grid = u.grid
    mask = grid.interior_mask if interior_only else np.ones(grid.shape, dtype=bool)
    cols = [c[mask] for c in grid.mesh()] + [u.values[mask]]
    names = ["x"] if grid.dim == 1 else (["y", "t"] if grid.periodic[0] else ["x1", "x2"])
    np.savetxt(path, np.column_stack(cols), delimiter=",", fmt="%.17g",
               header=",".join(names + ["value"]), comments="")


def write_curve(path: Path, x, y, names: tuple[str, str]):
    np.savetxt(path, np.column_stack([np.asarray(x, float), np.asarray(y, float)]), delimiter=",",
               fmt="%.17g", header=",".join(names), comments="")


def provenance(cfg: ExperimentConfig, grid: Grid | None) -> dict:
    return {
        "config_hash": cfg.config_hash(),
        "package_version": __version__,
        "experiment": cfg.experiment,
        "grid": None if grid is None else {
            "descriptor": descriptor_dict(grid.descriptor),
            "h": grid.h,
            "shape": list(grid.shape),
            "n_interior": grid.n_interior,
        },
        "s": cfg.s,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "tolerances": {"solver_tol": cfg.solver.tol, "max_iter": cfg.solver.max_iter,
                       "max_halvings": cfg.solver.max_halvings, **cfg.tolerances},
    }


# --------------------------------------------------------------------------- pipelines


def _initial_guess(cfg: ExperimentConfig, grid: Grid) -> Field:
    kind = cfg.initial_guess.get("kind", "zero")
    amp = float(cfg.initial_guess.get("amplitude", 1.0))
    if kind == "random":
        rng = np.random.default_rng(cfg.seed)
        x = grid.mesh()[0][grid.interior_mask]
        # deliberately asymmetric: a random positive field tilted along the first axis
        vals = amp * rng.uniform(0.0, 1.0, grid.n_interior) * (1.5 + np.tanh(3 * x))
        return Field.from_interior(grid, vals)
    if kind == "layer":
        raise ConfigError("initial_guess.kind", "layer guesses are for the gibbons experiment")
    return Field(grid, np.zeros(grid.shape))


def _run_solve(cfg: ExperimentConfig, op: MixedOperator, out: Path) -> tuple[dict, dict]:
    f = preset(cfg.nonlinearity["name"], **(cfg.nonlinearity.get("params") or {}))
    u, rep = solve_dirichlet(op, f, _initial_guess(cfg, op.grid), cfg.solver)
    write_field(out / "field.csv", u)
    write_curve(out / "curve_residual.csv", np.arange(len(rep.residual_history)), rep.residual_history,
                ("iteration", "residual_sup"))
    report = {"solve": rep.to_dict(), "nonlinearity": f.name}
    return report, {"converged": rep.converged}


def _run_symmetry(cfg: ExperimentConfig, op: MixedOperator, out: Path) -> tuple[dict, dict]:
    grid = op.grid
    if not all(is_reflection_symmetric(grid, a, 0.0) for a in range(grid.dim) if not grid.periodic[a]):
        raise ConfigError("domain", "domain not reflection-symmetric")
    f = preset(cfg.nonlinearity["name"], **(cfg.nonlinearity.get("params") or {}))
    u, rep = solve_dirichlet(op, f, _initial_guess(cfg, grid), cfg.solver)
    sym = symmetry_report(u, f, plane_tol=cfg.tolerances["plane"], monotone_tol=cfg.tolerances["monotonicity"])
    scans = {}
    for a in range(grid.dim):
        snaps = moving_plane_scan(u, a, f)
        lam = [s.lam for s in snaps]
        sup = [s.sup_violation for s in snaps]
        scans[str(a)] = [{"lambda": l, "sup_violation": v} for l, v in zip(lam, sup)]
        write_curve(out / f"curve_sup_violation_axis{a}.csv", lam, sup, ("lambda", "sup_violation"))
    write_field(out / "field.csv", u)
    report = {"solve": rep.to_dict(), "nonlinearity": f.name, "symmetry": sym.to_dict(), "moving_plane": scans}
    verdicts = {"converged": rep.converged, "positive": bool(rep.positive), **sym.verdicts}
    return report, verdicts


def _run_eigen(cfg: ExperimentConfig, op: MixedOperator, out: Path) -> tuple[dict, dict]:
    res = lambda1(op)
    loc = local_lambda1(op)
    write_field(out / "field.csv", res.eigenfield)
    report = {"lambda1": res.lambda1, "local_lambda1": loc, "residual_norm": res.residual_norm,
              "iterations": res.iterations}
    return report, {"dominates_local": res.lambda1 >= loc, "positive_eigenfield": bool(res.eigenfield.interior.min() > 0)}


def _run_scan(cfg: ExperimentConfig, op: MixedOperator | None, out: Path) -> tuple[dict, dict]:
    sc = cfg.scan
    try:
        rows = lambda1_volume_scan(sc.get("family", "interval"), sc["radii"], cfg.s, cfg.mode,
                                   int(sc.get("nodes_per_diameter", 81)))
    except ValueError as exc:
        raise ConfigError("scan", str(exc)) from None
    table = np.array([[r.radius, r.lambda1, r.residual, r.n_interior] for r in rows])
    np.savetxt(out / "scan.csv", table, delimiter=",", fmt="%.17g", header="radius,lambda1,residual,n_interior", comments="")
    write_curve(out / "curve_lambda1.csv", table[:, 0], table[:, 1], ("radius", "lambda1"))
    lam = table[:, 1]
    report = {"scan": [{"radius": r.radius, "lambda1": r.lambda1, "residual": r.residual, "n_interior": r.n_interior}
                       for r in rows],
              "ratio_last_first": float(lam[-1] / lam[0])}
    return report, {"increasing": bool(np.all(np.diff(lam) > 0))}


def _run_gibbons(cfg: ExperimentConfig, op: MixedOperator, out: Path) -> tuple[dict, dict]:
    grid = op.grid
    f = preset(cfg.nonlinearity["name"], **(cfg.nonlinearity.get("params") or {}))
    amp = float(cfg.initial_guess.get("amplitude", 0.0))
    try:
        u0 = layer_guess(grid, amp)
        u, rep = solve_gibbons(op, f, u0, cfg.solver)
    except SolverError:
        raise
    except ValueError as exc:
        raise ConfigError("nonlinearity" if "nonlinearity" in str(exc) else "domain", str(exc)) from None
    t = grid.coords(grid.t_axis)
    profile = u.values if grid.dim == 1 else u.values[0]
    inner = grid.interior_mask if grid.dim == 1 else grid.interior_mask[0]
    write_curve(out / "profile.csv", t[inner], profile[inner], ("t", "value"))
    write_field(out / "field.csv", u)
    odd = float(np.max(np.abs(profile[inner] + profile[inner][::-1])))
    steps = np.diff(profile[inner])
    report = {
        "solve": rep.to_dict(),
        "nonlinearity": f.name,
        "onedim_variation": onedim_variation(u),
        "oddness": odd,
        "min_increment": float(steps.min()),
        "truncation_sensitivity": rep.truncation_sensitivity,
        "initial_onedim_variation": onedim_variation(u0),
    }
    verdicts = {"converged": rep.converged, "odd": odd <= cfg.tolerances["oddness"],
                "increasing": bool(steps.min() > 0), "onedim": report["onedim_variation"] <= cfg.tolerances["onedim"]}
    if grid.dim == 2:
        red = reduce_strip(op)
        u1, _ = solve_gibbons(red, f, layer_guess(red.grid), cfg.solver, sensitivity=False)
        report["slice_profile_difference"] = float(np.max(np.abs(profile - u1.values)[inner]))
        if "slice" in cfg.tolerances:
            verdicts["slice"] = report["slice_profile_difference"] <= cfg.tolerances["slice"]
    if "truncation" in cfg.tolerances:
        verdicts["truncation"] = rep.truncation_sensitivity <= cfg.tolerances["truncation"]
    return report, verdicts


PIPELINES = {"solve": _run_solve, "symmetry": _run_symmetry, "eigen": _run_eigen,
             "volume_scan": _run_scan, "gibbons": _run_gibbons}


def execute(cfg: ExperimentConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    grid = None
    op = None
    if cfg.experiment != "volume_scan":
        grid = build_grid(cfg.domain)
        op = assemble(grid, cfg.s, cfg.mode)
    report, verdicts = PIPELINES[cfg.experiment](cfg, op, out)
    verdicts = {k: bool(v) for k, v in verdicts.items()}
    doc = {"provenance": provenance(cfg, grid), "report": report, "verdicts": verdicts,
           "passed": all(verdicts.values())}
    write_json(out / "report.json", doc)
    return EXIT_OK if doc["passed"] else EXIT_VERDICT


def run(config_path: str | Path, out: str | Path | None = None, experiment: str | None = None,
        seed: int | None = None) -> int:
    """Run one experiment from a config file; returns the process exit code."""
    try:
        cfg = load_config(config_path, experiment)
        return _run_config(cfg, out, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _run_config(cfg: ExperimentConfig, out, seed) -> int:
    if seed is not None:
        cfg.seed = int(seed)
        cfg.raw = {**cfg.raw, "seed": int(seed)}
    target = Path(out if out is not None else (cfg.output or "results"))
    try:
        return execute(cfg, target)
    except (SolverError, EigenError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="mixedop", description="Experiments for the mixed local/nonlocal operator.")
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", help="YAML experiment config")
        src.add_argument("--preset", choices=sorted(EXPERIMENT_PRESETS), help="built-in experiment config")
        p.add_argument("--out", help="output directory (default: config 'output' or ./results)")
        p.add_argument("--seed", type=int)
        p.add_argument("--json", action="store_true", help="print the report JSON to stdout")
    p = sub.add_parser("presets")
    p.add_argument("--json", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")

    if args.command == "presets":
        print(list_presets(args.json))
        return EXIT_OK
    experiment = SUBCOMMANDS[args.command]
    if args.config:
        code = run(args.config, args.out, experiment, args.seed)
    else:
        raw = {k: v for k, v in EXPERIMENT_PRESETS[args.preset].items() if k != "anchor"}
        try:
            code = _run_config(parse_config(raw, experiment), args.out, args.seed)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            code = EXIT_CONFIG
    if args.json and code in (EXIT_OK, EXIT_VERDICT):
        out = Path(args.out or "results")
        if args.config and args.out is None:
            out = Path(load_config(args.config).output or "results")
        print((out / "report.json").read_text(), end="")
    return code
