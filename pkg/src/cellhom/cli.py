"""Command-line front end: ``cellhom homogenize|verify|donati|korn|divcurl``.

Exit codes: 0 success, 2 configuration or input error, 3 solver failure,
4 a cross-check failed (the report is still written).

Output formats
--------------
JSON reports carry ``"schema": "cellhom/1"``, floats with 17 significant
digits, and a ``created`` timestamp that is the only run-dependent field.
CSV oscillation tables have columns ``n,integral,target,error``; trace
tables ``pair,kind,a,b,mismatch_1,mismatch_2,mismatch_3,norm``.
Binary Gauss-point fields use the microstructure header (``CHOM``, three
little-endian u32 node counts) followed by six little-endian f64 Mandel
components per Gauss point, elements with i fastest and the 8 points of an
element in local order (xi1 fastest).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import Grid, Lattice

log = logging.getLogger("cellhom")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything a run depends on; a run is reproducible from this plus the seed."""

    grid: tuple = (16, 16, 16)
    lattice: tuple = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    material: dict = field(default_factory=lambda: {"kind": "homogeneous", "lambda": 1.0, "mu": 1.0})
    tol: float | None = None
    max_iter: int | None = None
    out: str = "cellhom_report.json"
    seed: int = 42
    threads: int | None = None
    deterministic: bool = False
    suite: str = "all"
    field_path: str | None = None
    schedule: tuple = tuple(range(1, 65))
    row: int = 0
    csv: str | None = None
    vtk: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        try:
            self.grid = tuple(int(n) for n in self.grid)
            Grid(self.grid, Lattice(tuple(map(tuple, self.lattice))))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad grid/lattice: {exc}") from exc
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not isinstance(self.material, dict) or "kind" not in self.material:
            raise ConfigError("material must be a mapping with a 'kind'")
        self.schedule = tuple(int(n) for n in self.schedule)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["grid"] = list(self.grid)
        d["lattice"] = [list(r) for r in self.lattice]
        d["schedule"] = list(self.schedule)
        return d

    def make_grid(self) -> Grid:
        return Grid(self.grid, Lattice(tuple(map(tuple, self.lattice))))


def build_material(cfg: RunConfig, grid: Grid, rng):
    from .material import MaterialMap, Phase, laminate_map, load_microstructure, phases_from_dict, random_two_phase

    m = dict(cfg.material)
    kind = m.pop("kind")
    if kind == "homogeneous":
        if "mandel_upper" in m:
            return MaterialMap.homogeneous(grid, Phase.from_upper(m["mandel_upper"]))
        return MaterialMap.homogeneous(grid, Phase.isotropic(float(m.get("lambda", 1.0)), float(m.get("mu", 1.0))))
    if kind in ("laminate", "random"):
        phases = phases_from_dict(m.get("phases", [{"lambda": 1.0, "mu": 1.0}, {"lambda": 10.0, "mu": 10.0}]),
                                  "material.phases")
        if len(phases) != 2:
            raise ConfigError(f"{kind} material needs exactly two phases")
        frac = float(m.get("fraction", 0.5))
        if kind == "laminate":
            return laminate_map(grid, phases[0], phases[1], frac, int(m.get("axis", 0)))
        return random_two_phase(grid, phases[0], phases[1], frac, rng)
    if kind == "file":
        if "path" not in m or "phase_table" not in m:
            raise ConfigError("file material needs 'path' and 'phase_table'")
        table = m["phase_table"]
        phases = phases_from_dict(table) if isinstance(table, (dict, list)) else table
        return load_microstructure(m["path"], grid, phases)
    raise ConfigError(f"unknown material kind {kind!r}")


def _header(cfg: RunConfig, command: str) -> dict:
    return {
        "schema": "cellhom/1",
        "command": command,
        "version": __version__,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "rng": {"bit_generator": "PCG64", "seed": cfg.seed},
        "config": cfg.to_dict(),
    }


def _write(cfg, report) -> None:
    from .io import write_json
    write_json(cfg.out, report)
    log.info("wrote %s", cfg.out)


def _threads(cfg) -> int:
    if cfg.deterministic:
        return 1
    return cfg.threads or os.cpu_count() or 1


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_homogenize(cfg: RunConfig) -> int:
    from .homogenize import homogenized_tensor, laminate_normal, laminate_oracle

    rng = np.random.default_rng(cfg.seed)
    grid = cfg.make_grid()
    material = build_material(cfg, grid, rng)
    rep = homogenized_tensor(material, tol=cfg.tol or 1e-12, max_iter=cfg.max_iter, threads=_threads(cfg))
    report = _header(cfg, "homogenize")
    report.update(rep.to_dict())
    checks = report["checks"]
    if cfg.material.get("kind") == "laminate":
        p = material.phases
        normal = laminate_normal(grid.lattice, int(cfg.material.get("axis", 0)))
        oracle = laminate_oracle(p[0].stiffness, p[1].stiffness, float(cfg.material.get("fraction", 0.5)), normal)
        err = float(np.linalg.norm(rep.CH - oracle) / np.linalg.norm(oracle))
        report["laminate_oracle"] = oracle
        checks["laminate_oracle"] = {"value": err, "tol": 1e-8, "passed": err <= 1e-8}
    report["passed"] = all(c["passed"] for c in checks.values())
    if cfg.vtk:
        from .io import write_vtk
        sol = rep.solutions[0]
        write_vtk(cfg.vtk, grid, {"phase": material.phase_ids, "stress_case1": sol.sigma}, {"phi_case1": sol.phi})
    _write(cfg, report)
    return EXIT_OK if report["passed"] else EXIT_CHECK


def cmd_verify(cfg: RunConfig) -> int:
    from . import verify

    rng = np.random.default_rng(cfg.seed)
    grid = cfg.make_grid()
    material = None
    if cfg.suite in ("all", "hillmandel"):
        mcfg = cfg.material if cfg.material.get("kind") != "homogeneous" else {"kind": "random", "fraction": 0.5}
        material = build_material(dataclasses.replace(cfg, material=mcfg), grid, rng)
    results = verify.run(cfg.suite, grid, rng, material=material)
    report = _header(cfg, "verify")
    report["suites"] = results
    report["passed"] = all(c["passed"] for checks in results.values() for c in checks)
    _write(cfg, report)
    for name, checks in results.items():
        for c in checks:
            log.info("%-10s %-28s %-4s %.3e (tol %.1e)", name, c["name"], "pass" if c["passed"] else "FAIL",
                     c["value"], c["tol"])
    return EXIT_OK if report["passed"] else EXIT_CHECK


def cmd_donati(cfg: RunConfig) -> int:
    from .core import cell_average
    from .discrete import sym_gradient
    from .donati import donati_project_lp, random_vecfield
    from .io import read_field, write_field

    rng = np.random.default_rng(cfg.seed)
    if cfg.field_path:
        e = read_field(cfg.field_path)
        grid = e.grid
    else:
        grid = cfg.make_grid()
        e = sym_gradient(random_vecfield(grid, rng)) + rng.standard_normal(6)
    split = donati_project_lp(e, tol=cfg.tol or 1e-12)
    enorm = e.norm()
    rel_res = split.residual.norm() / enorm if enorm > 0 else 0.0
    pyth = abs(enorm ** 2 - split.grad_part.norm() ** 2 - split.residual.norm() ** 2) / max(enorm ** 2, 1e-300)
    report = _header(cfg, "donati")
    report.update({
        "grid": list(grid.shape),
        "average": cell_average(e),
        "A": split.A,
        "residual_relative": rel_res,
        "orthogonality_defect": split.ortho_defect,
        "pythagoras_defect": pyth,
        "checks": {"pythagoras": {"value": pyth, "tol": 1e-9, "passed": pyth <= 1e-9}},
    })
    report["passed"] = pyth <= 1e-9
    if cfg.vtk:
        write_field(cfg.vtk, split.residual)
    _write(cfg, report)
    return EXIT_OK if report["passed"] else EXIT_CHECK


def cmd_korn(cfg: RunConfig) -> int:
    from .analysis import isomorphism_constant, korn_ratios

    grid = cfg.make_grid()
    lam, c_korn = korn_ratios(grid, seed=cfg.seed)
    iso = isomorphism_constant(grid, seed=cfg.seed)
    ok = 1.8 <= lam <= 2.0 + 1e-6 and np.isfinite(c_korn)
    report = _header(cfg, "korn")
    report.update({"grid": list(grid.shape), "lambda_grad": lam, "C_korn": c_korn,
                   "isomorphism_constant": iso, "passed": bool(ok)})
    _write(cfg, report)
    return EXIT_OK if ok else EXIT_CHECK


def cmd_divcurl(cfg: RunConfig) -> int:
    from .analysis import decay_exponent, div_curl_demo
    from .core import LPField
    from .discrete import make_divfree
    from .donati import random_symfield, random_vecfield
    from .io import write_oscillation_csv

    rng = np.random.default_rng(cfg.seed)
    grid = cfg.make_grid()
    sig = make_divfree(random_symfield(grid, rng) + rng.standard_normal(6))
    v = LPField(rng.standard_normal(6), random_vecfield(grid, rng))
    one = np.ones_like
    records = div_curl_demo(sig, v, cfg.row, cfg.schedule, (lambda x: x, np.cos, one))
    slope = decay_exponent(records)
    if cfg.csv:
        write_oscillation_csv(cfg.csv, records)
    report = _header(cfg, "divcurl")
    report.update({
        "grid": list(grid.shape),
        "row": cfg.row,
        "test_function": "x1 * cos(x2)",
        "records": [dataclasses.asdict(r) for r in records],
        "decay_exponent": slope,
        "passed": slope <= -0.9,
    })
    _write(cfg, report)
    return EXIT_OK if report["passed"] else EXIT_CHECK


COMMANDS = {
    "homogenize": cmd_homogenize,
    "verify": cmd_verify,
    "donati": cmd_donati,
    "korn": cmd_korn,
    "divcurl": cmd_divcurl,
}


# --------------------------------------------------------------------------
# Argument handling
# --------------------------------------------------------------------------

def _grid_arg(text):
    parts = [p for p in text.replace("x", ",").split(",") if p]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must be N or N,N,N, got {text!r}")
    return tuple(int(p) for p in parts)


def _schedule_arg(text):
    if ".." in text:
        lo, hi = text.split("..")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(p) for p in text.split(","))


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cellhom", description="Periodic homogenization of linear elasticity.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("suite_arg", nargs="?", help="suite for 'verify' (all, green, korn, traces, donati, "
                                                "hillmandel, divcurl, compat)")
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--grid", type=_grid_arg, help="node counts, N or N,N,N")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="report path (JSON)")
    p.add_argument("--threads", type=int)
    p.add_argument("--deterministic", action="store_true", default=None)
    p.add_argument("--suite")
    p.add_argument("--field", help="binary Gauss-point field input (donati)")
    p.add_argument("--schedule", type=_schedule_arg, help="oscillation indices, e.g. 1..64 or 1,2,4")
    p.add_argument("--row", type=int)
    p.add_argument("--csv", help="CSV output (divcurl records)")
    p.add_argument("--vtk", help="field export: legacy VTK (homogenize) or binary residual field (donati)")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"cellhom {__version__}")
    return p


def load_config(args) -> RunConfig:
    d = {}
    if args.config:
        try:
            d = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
    overrides = {
        "grid": args.grid, "tol": args.tol, "max_iter": args.max_iter, "seed": args.seed, "out": args.out,
        "threads": args.threads, "deterministic": args.deterministic, "suite": args.suite_arg or args.suite,
        "field_path": args.field, "schedule": args.schedule, "row": args.row, "csv": args.csv, "vtk": args.vtk,
    }
    d.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(d)


def main(argv=None) -> int:
    from .analysis import EigenStagnationError
    from .material import MaterialError
    from .solver import SolverError

    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except (SolverError, EigenStagnationError) as exc:
        print(f"cellhom: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, MaterialError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"cellhom: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
