"""Command-line front end: ``ihdg run|sweep|oracle|predict``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import bench
from .config import ConfigError, ExperimentConfig, read_config, with_value
from .flux import FluxScheme
from .oracle import direct_solve
from .reference import build_reference
from .solver import SUCCESSIVE, discretize, solve
from .timestep import BACKWARD_EULER, TimeLoopConfig, advance, time_discretization

SWEEP_AXES = ("cells", "p", "kappa", "nu", "dt", "flux")

ITERATION_COLUMNS = ["experiment", "Nel", "p", "flux", "kappa", "nu", "Phi", "dt", "steps",
                     "iterations", "mean_iterations", "verdict", "predicted_verdict"]


def _num(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _sci(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.6e}"


def iteration_row(r: bench.RunResult) -> list:
    c = r.config
    exp = c.experiment
    kappa = r.prediction.inputs.get("kappa") if exp in ("convdiff3d", "contaminant", "elliptic3d") else None
    nu = None
    if exp in ("convdiff3d", "elliptic3d"):
        nu = c.nu if c.nu is not None else 1.0
    phi = c.Phi if exp == "shallow-standing-wave" else None
    return [exp, r.n_elements, c.p, c.flux, _num(kappa), _num(nu), _num(phi), _num(r.dt),
            r.steps, r.iterations, _num(r.mean_iterations), r.status, r.prediction.verdict]


def _write(path: Path, header: list, rows: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_artifacts(results: list, out: Path, label: str = "") -> None:
    _write(out / "iterations.csv", ITERATION_COLUMNS, [iteration_row(r) for r in results])
    res_rows = []
    for i, r in enumerate(results):
        for step, k, res, err in r.history:
            res_rows.append([i, step, k, _sci(res), _sci(err)])
    _write(out / "residuals.csv", ["run", "step", "iteration", "residual", "l2_error"], res_rows)
    rates = bench.observed_rates(results)
    conv = [[_num(r.h), r.config.p, _sci(r.l2_error), _num(rate)] for r, rate in zip(results, rates)]
    _write(out / "convergence.csv", ["h", "p", "l2_error", "rate"], conv)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("IHDG_THREADS", "1")))
    except ValueError:
        return 1


def _run_all(configs: list) -> list:
    workers = min(_threads(), len(configs))
    if workers <= 1:
        return [bench.run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(bench.run, configs))


def _report(r: bench.RunResult) -> None:
    err = "" if r.l2_error is None else f", L2 error {r.l2_error:.3e}"
    print(f"{r.config.experiment}: Nel={r.n_elements} p={r.config.p} flux={r.config.flux} "
          f"-> {r.status} after {r.iterations} iterations{err} ({r.wall_time:.2f} s)")


def cmd_run(args) -> int:
    cfg = read_config(args.config)
    result = bench.run(cfg)
    print(result.prediction.summary())
    _report(result)
    write_artifacts([result], Path(args.output or cfg.output))
    return 0


def _split_values(text: str) -> list:
    return [v.strip() for v in text.split(",") if v.strip()]


def sweep_configs(cfg: ExperimentConfig, axis: str, values: list) -> list:
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {', '.join(SWEEP_AXES)}; got {axis!r}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    out = []
    for v in values:
        new = with_value(cfg, axis, v)
        if axis == "dt":
            new = with_value(new, "dt_rule", "fixed")
        out.append(new)
    return out


def cmd_sweep(args) -> int:
    cfg = read_config(args.config)
    configs = sweep_configs(cfg, args.axis, _split_values(args.values))
    results = _run_all(configs)
    for r in results:
        print(r.prediction.summary())
        _report(r)
    write_artifacts(results, Path(args.output or cfg.output))
    return 0


def cmd_predict(args) -> int:
    cfg = read_config(args.config)
    rep = bench.predict(cfg)
    print(rep.summary())
    for k, v in rep.bounds.items():
        print(f"  {k} = {v:.6g}")
    return 0


def cmd_oracle(args) -> int:
    cfg = read_config(args.config)
    problem = bench.problem_for(cfg)
    mesh = bench.mesh_for(cfg, problem)
    ref = build_reference(cfg.p, mesh.d)
    flux = FluxScheme(cfg.flux, cfg.gamma_stab)
    # the comparison is between fixed points, so iterate on successive change
    scfg = dataclasses.replace(bench.solver_config(cfg, problem), criterion=SUCCESSIVE)
    try:
        if cfg.is_time_dependent:
            dt = bench.time_step(cfg, float(np.min(mesh.widths)))
            tcfg = TimeLoopConfig(BACKWARD_EULER, dt, 1, cfg.warm_start, scfg)
            disc = time_discretization(problem.model, flux, mesh, ref, tcfg)
            q0 = disc.interpolate(lambda x, t: problem.initial(x))
            rhs = disc.local.forcing(dt) + disc.local.mass_rows(q0) / dt
            q_direct, _ = direct_solve(disc, rhs, dt)
            q_iter, _ = advance(disc, tcfg, q0)
        else:
            disc = discretize(problem.model, flux, mesh, ref)
            q_direct, _ = direct_solve(disc)
            q_iter, _, _ = solve(disc, scfg)
    except ValueError as exc:
        print(f"ihdg oracle: {exc}", file=sys.stderr)
        return 2
    diff = float(np.max(np.abs(q_direct - q_iter)))
    print(f"max |iHDG - direct| = {diff:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ihdg", description="iHDG experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one configuration")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="output directory (overrides the config)")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="vary one parameter")
    p.add_argument("config")
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("oracle", help="compare with a dense direct solve")
    p.add_argument("config")
    p.set_defaults(func=cmd_oracle)
    p = sub.add_parser("predict", help="print the a-priori verdict")
    p.add_argument("config")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"ihdg: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
