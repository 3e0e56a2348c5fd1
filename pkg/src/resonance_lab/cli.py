"""Command-line front end: config ingestion, experiment orchestration,
report persistence, and the end-to-end verification battery.

Reports are JSON with sorted keys so identical configs and seeds produce
byte-identical files; vectors and branch tables go to CSV.  Exit codes:
0 success, 1 verification failure, 2 usage or config error, 3 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .ladder import LadderError, plan_ladder
from .model import NonlinearitySpec, PotentialSpec, Well, build_example51, zero_nonlinearity
from .operator import ConvergenceError, Grid, assemble, compare_spectra, lowest_eigenpairs
from .solve import (
    ContinuationBranch,
    NonConvergenceError,
    continue_branch,
    eigenvector_seed,
    newton_solve,
    nonexistence_probe,
)
from .verify import run_all

ENV_OUTPUT_DIR = "RESONANCE_LAB_OUT"

DEFAULT_CONFIG = {
    "grid": {"dim": 1, "half_width": 20.0, "points": 1999},
    "potential": {
        "sigma0": 0.0,
        "p": 2.0,
        "wells": [{"shape": "square", "depth": 16.0, "radius": 1.0,
                   "center": [0.0]}],
    },
    "nonlinearity": {"kind": "log", "alpha": 5.0},
    "solver": {"tolerance": 1e-10, "max_iter": 50, "seed": 0},
    "output": {"dump_vectors": False},
}


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    grid: Grid
    potential: PotentialSpec
    nonlinearity: NonlinearitySpec
    tolerance: float
    max_iter: int
    seed: int
    output_dir: Optional[str]
    dump_vectors: bool
    raw: dict = field(compare=False, default_factory=dict)

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


@dataclass
class RunManifest:
    config_hash: str
    version: str
    command_line: list
    started: float
    finished: float = 0.0
    reports: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "version": self.version,
            "command_line": self.command_line,
            "started": self.started,
            "finished": self.finished,
            "reports": self.reports,
        }


def _require(table: dict, path: str, allowed: dict) -> dict:
    """Strict section reader: every key must be known and of the declared
    type, and required keys (no default) must be present."""
    out = {}
    for key in table:
        if key not in allowed:
            raise ConfigError("unknown key %r at %s" % (key, path or "top level"))
    for key, (types, default) in allowed.items():
        if key in table:
            value = table[key]
            expected = types if isinstance(types, tuple) else (types,)
            # bool subclasses int; a bare `true` where a number belongs is
            # almost certainly a typo, so reject it explicitly
            bad_bool = isinstance(value, bool) and bool not in expected
            if bad_bool or not isinstance(value, expected):
                raise ConfigError(
                    "bad type for %s.%s: expected %s, got %r"
                    % (path, key, "/".join(t.__name__ for t in expected), value))
            out[key] = value
        elif default is _REQUIRED:
            raise ConfigError("missing required key %s.%s" % (path, key))
        else:
            out[key] = default
    return out


_REQUIRED = object()
_NUM = (int, float)


def parse_config_dict(data: dict) -> ExperimentConfig:
    for key in data:
        if key not in ("grid", "potential", "nonlinearity", "solver", "output"):
            raise ConfigError("unknown section %r" % (key,))

    g = _require(data.get("grid", {}), "grid", {
        "dim": (int, 1), "half_width": (_NUM, _REQUIRED), "points": (int, _REQUIRED)})
    try:
        grid = Grid(g["dim"], float(g["half_width"]), g["points"])
    except ValueError as err:
        raise ConfigError("grid: %s" % err)

    p = _require(data.get("potential", {}), "potential", {
        "sigma0": (_NUM, 0.0), "p": (_NUM, None), "wells": (list, [])})
    wells = []
    for i, w in enumerate(p["wells"]):
        wpath = "potential.wells[%d]" % i
        if not isinstance(w, dict):
            raise ConfigError("%s must be a table" % wpath)
        fields = _require(w, wpath, {
            "shape": (str, _REQUIRED), "depth": (_NUM, _REQUIRED),
            "radius": (_NUM, _REQUIRED), "center": (list, _REQUIRED)})
        try:
            wells.append(Well(fields["shape"], float(fields["depth"]),
                              float(fields["radius"]),
                              tuple(float(c) for c in fields["center"])))
        except (TypeError, ValueError) as err:
            raise ConfigError("%s: %s" % (wpath, err))
    potential = PotentialSpec(sigma0=float(p["sigma0"]), wells=tuple(wells),
                              p=None if p["p"] is None else float(p["p"]))

    n = _require(data.get("nonlinearity", {}), "nonlinearity", {
        "kind": (str, "zero"), "alpha": (_NUM, 1.0)})
    if n["kind"] == "log":
        nonlinearity = build_example51(float(n["alpha"]))
    elif n["kind"] == "zero":
        nonlinearity = zero_nonlinearity()
    else:
        raise ConfigError("nonlinearity.kind must be 'log' or 'zero', got %r"
                          % (n["kind"],))

    s = _require(data.get("solver", {}), "solver", {
        "tolerance": (_NUM, 1e-10), "max_iter": (int, 50), "seed": (int, 0)})
    o = _require(data.get("output", {}), "output", {
        "directory": (str, None), "dump_vectors": (bool, False)})

    return ExperimentConfig(
        grid=grid, potential=potential, nonlinearity=nonlinearity,
        tolerance=float(s["tolerance"]), max_iter=s["max_iter"],
        seed=s["seed"], output_dir=o["directory"],
        dump_vectors=o["dump_vectors"], raw=data)


def parse_config(path: Optional[str]) -> ExperimentConfig:
    if path is None:
        return parse_config_dict(DEFAULT_CONFIG)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as err:
        raise ConfigError("cannot read config %s: %s" % (path, err))
    except tomllib.TOMLDecodeError as err:
        raise ConfigError("malformed TOML in %s: %s" % (path, err))
    return parse_config_dict(data)


def _dump_json(obj, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def emit_plot_data(branch: ContinuationBranch, out: str) -> list:
    """Branch table as CSV, one state per row, ready for any plotter."""
    if not branch.states:
        raise ValueError("cannot emit plot data for an empty branch")
    with open(out, "w") as fh:
        fh.write("lambda,energy,linf,l2,morse_m,morse_M,margin\n")
        for s in branch.states:
            fh.write("%.17g,%.17g,%.17g,%.17g,%d,%d,%.17g\n"
                     % (s.lam, s.energy, s.linf, s.l2, s.morse_m, s.morse_M,
                        s.margin))
    return [out]


def _dump_vector(grid: Grid, u: np.ndarray, out: str) -> None:
    nodes = grid.nodes()
    with open(out, "w") as fh:
        fh.write(",".join("x%d" % i for i in range(grid.dim)) + ",value\n")
        for row, val in zip(nodes, u):
            fh.write(",".join("%.17g" % c for c in row) + ",%.17g\n" % val)


def _resolve_seed(mode: str, cfg: ExperimentConfig, op) -> np.ndarray:
    if mode == "zero":
        return np.zeros(cfg.grid.ndof)
    if mode.startswith("eig:"):
        index = int(mode.split(":", 1)[1]) - 1
        if index < 0:
            raise ConfigError("eigenvector seed indices start at 1")
        return eigenvector_seed(op, index, 4.0)
    if mode.startswith("file:"):
        path = mode.split(":", 1)[1]
        u = np.loadtxt(path)
        if u.shape != (cfg.grid.ndof,):
            raise ConfigError("seed file %s has shape %s, expected (%d,)"
                              % (path, u.shape, cfg.grid.ndof))
        return u
    raise ConfigError("unknown seed mode %r (use eig:K, file:PATH, or zero)"
                      % (mode,))


def _out_dir(args) -> str:
    out = getattr(args, "out", None) or os.environ.get(ENV_OUTPUT_DIR) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _finish(manifest: RunManifest, out: str) -> None:
    manifest.finished = time.time()
    _dump_json(manifest.to_json_dict(), os.path.join(out, "manifest.json"))


def cmd_ladder(args) -> int:
    p = None if args.p is None else Fraction(args.p)
    try:
        ladder = plan_ladder(args.dim, p, v1_vanishes=args.v1_zero)
    except LadderError as err:
        print("ladder error: %s" % err, file=sys.stderr)
        return 2
    report = ladder.to_json_dict()
    print(json.dumps(report, sort_keys=True, indent=2))
    out = _out_dir(args)
    path = os.path.join(out, "ladder.json")
    _dump_json(report, path)
    canon = json.dumps({"dim": args.dim, "p": str(args.p), "v1_zero": args.v1_zero},
                       sort_keys=True)
    manifest = RunManifest(hashlib.sha256(canon.encode()).hexdigest()[:16],
                           __version__, sys.argv[1:], time.time(),
                           reports=[path])
    _finish(manifest, out)
    return 0


def cmd_spectrum(args) -> int:
    cfg = parse_config(args.config)
    out = _out_dir(args)
    manifest = RunManifest(cfg.config_hash(), __version__, sys.argv[1:], time.time())
    op = assemble(cfg.grid, cfg.potential)
    report = lowest_eigenpairs(op, args.k, tol=cfg.tolerance,
                               sigma_ess=cfg.potential.sigma0)
    payload = report.to_json_dict()
    if args.compare:
        other = parse_config(args.compare)
        if other.grid != cfg.grid:
            raise ConfigError("comparison requires identical grids")
        payload["comparison"] = compare_spectra(op, assemble(other.grid, other.potential),
                                                args.k)
    path = os.path.join(out, "spectrum.json")
    _dump_json(payload, path)
    manifest.reports.append(path)
    if cfg.dump_vectors:
        for j in range(args.k):
            vpath = os.path.join(out, "eigenvector_%d.csv" % (j + 1))
            _dump_vector(cfg.grid, report.eigenvectors[:, j], vpath)
            manifest.reports.append(vpath)
    _finish(manifest, out)
    print(json.dumps(payload["eigenvalues"]))
    return 0


def cmd_solve(args) -> int:
    cfg = parse_config(args.config)
    out = _out_dir(args)
    manifest = RunManifest(cfg.config_hash(), __version__, sys.argv[1:], time.time())
    op = assemble(cfg.grid, cfg.potential)
    seed = _resolve_seed(args.seed_mode, cfg, op)
    state = newton_solve(op, cfg.nonlinearity, args.lam, seed,
                         tol=cfg.tolerance, max_iter=cfg.max_iter)
    path = os.path.join(out, "solution.json")
    _dump_json(state.to_json_dict(), path)
    manifest.reports.append(path)
    if cfg.dump_vectors:
        vpath = os.path.join(out, "solution.csv")
        _dump_vector(cfg.grid, state.u, vpath)
        manifest.reports.append(vpath)
    _finish(manifest, out)
    print(json.dumps(state.to_json_dict(), sort_keys=True))
    return 0


def cmd_continue(args) -> int:
    cfg = parse_config(args.config)
    out = _out_dir(args)
    manifest = RunManifest(cfg.config_hash(), __version__, sys.argv[1:], time.time())
    op = assemble(cfg.grid, cfg.potential)
    seed = _resolve_seed(args.seed_mode, cfg, op)
    branch = continue_branch(op, cfg.nonlinearity, getattr(args, "from"),
                             args.to, args.steps, seed, tol=cfg.tolerance)
    path = os.path.join(out, "branch.json")
    _dump_json(branch.to_json_dict(), path)
    manifest.reports.append(path)
    if branch.states:
        manifest.reports += emit_plot_data(branch, os.path.join(out, "branch.csv"))
    _finish(manifest, out)
    print("outcome: %s (%d states, sup |u| = %g)"
          % (branch.outcome, len(branch.states), branch.sup_linf))
    return 0 if branch.outcome != "lost_convergence" else 3


def cmd_probe(args) -> int:
    cfg = parse_config(args.config)
    out = _out_dir(args)
    manifest = RunManifest(cfg.config_hash(), __version__, sys.argv[1:], time.time())
    op = assemble(cfg.grid, cfg.potential)
    record = nonexistence_probe(op, cfg.nonlinearity, args.lam, args.trials,
                                args.k, seed=cfg.seed)
    payload = dict(record)
    payload["counter_witnesses"] = [s.to_json_dict()
                                    for s in record["counter_witnesses"]]
    path = os.path.join(out, "probe.json")
    _dump_json(payload, path)
    manifest.reports.append(path)
    _finish(manifest, out)
    print("consistent with nonexistence: %s (%d/%d collapsed)"
          % (record["consistent_with_nonexistence"], record["collapsed"],
             record["trials"]))
    return 0


def cmd_verify(args) -> int:
    results = run_all()
    out = _out_dir(args)
    path = os.path.join(out, "verify.json")
    _dump_json(results, path)
    manifest = RunManifest("builtin", __version__, sys.argv[1:], time.time(),
                           reports=[path])
    _finish(manifest, out)
    ok = True
    for r in results:
        status = "PASS" if r["passed"] else "FAIL"
        print("criterion %d (%s): %s  [%.1fs]"
              % (r["criterion"], r.get("name", "?"), status, r["seconds"]))
        ok = ok and r["passed"]
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resonance-lab",
        description="bootstrap ladders, discrete spectra, and solution "
                    "branches for asymptotically linear stationary equations")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", help="output directory (default: $%s or cwd)"
                       % ENV_OUTPUT_DIR)

    p = sub.add_parser("ladder", help="plan a bootstrap exponent ladder")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--p", help="integrability exponent, e.g. 12 or 26/3")
    p.add_argument("--v1-zero", action="store_true",
                   help="the unbounded potential part vanishes")
    add_common(p)
    p.set_defaults(fn=cmd_ladder)

    p = sub.add_parser("spectrum", help="lowest eigenpairs of the operator")
    p.add_argument("--config")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--compare", help="second config for a comparison run")
    add_common(p)
    p.set_defaults(fn=cmd_spectrum)

    p = sub.add_parser("solve", help="one Newton solve at fixed lambda")
    p.add_argument("--config")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--seed-mode", default="eig:3",
                   help="eig:K, file:PATH, or zero")
    add_common(p)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("continue", help="continue a branch in lambda")
    p.add_argument("--config")
    p.add_argument("--from", type=float, required=True)
    p.add_argument("--to", type=float, required=True)
    p.add_argument("--steps", type=int, default=40)
    p.add_argument("--seed-mode", default="eig:3")
    add_common(p)
    p.set_defaults(fn=cmd_continue)

    p = sub.add_parser("probe", help="multi-start nonexistence probe")
    p.add_argument("--config")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--k", type=int, default=3)
    add_common(p)
    p.set_defaults(fn=cmd_probe)

    p = sub.add_parser("verify", help="run the full verification battery")
    add_common(p)
    p.set_defaults(fn=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return 2 if err.code not in (0, None) else 0
    try:
        return args.fn(args)
    except ConfigError as err:
        print("config error: %s" % err, file=sys.stderr)
        return 2
    except (NonConvergenceError, ConvergenceError) as err:
        print("numerical failure: %s" % err, file=sys.stderr)
        return 3
    except LadderError as err:
        print("error: %s" % err, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
