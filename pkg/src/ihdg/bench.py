"""Build and run the named experiments; produce rows for the CSV artifacts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import ExperimentConfig
from .flux import NPC, FluxScheme
from .mesh import build_box
from .models import EXPERIMENTS, ShallowWater, Transport
from .reference import build_reference
from .solver import STAGNATION, SUCCESSIVE, Discretization, SolverConfig, discretize, solve
from .theory import (CONVERGENT, TheoryReport, convdiff_verdict, sampled_constants,
                     shallow_water_verdict)
from .timestep import CRANK_NICOLSON, TimeLoopConfig, advance, time_discretization


@dataclass
class RunResult:
    config: ExperimentConfig
    n_elements: int
    h: float
    dt: Optional[float]
    iterations: int
    mean_iterations: float
    steps: int
    status: str
    l2_error: Optional[float]
    prediction: TheoryReport
    history: list = field(default_factory=list)  # (step, iteration, residual, error)
    wall_time: float = 0.0


def problem_for(cfg: ExperimentConfig):
    params = {}
    if cfg.experiment in ("convdiff3d", "contaminant") and cfg.kappa is not None:
        params["kappa"] = cfg.kappa
    if cfg.experiment in ("convdiff3d", "elliptic3d") and cfg.nu is not None:
        params["nu"] = cfg.nu
    if cfg.experiment == "shallow-standing-wave":
        params["Phi"] = cfg.Phi
    return EXPERIMENTS[cfg.experiment](**params)


def mesh_for(cfg: ExperimentConfig, problem):
    cells = cfg.cells * problem.d if len(cfg.cells) == 1 else cfg.cells
    return build_box(problem.bounds, cells)


def time_step(cfg: ExperimentConfig, h: float) -> Optional[float]:
    """``dt`` from the configured rule; ``h`` is the element width."""
    if not cfg.is_time_dependent:
        return None
    pp = (cfg.p + 1) * (cfg.p + 2)
    if cfg.dt_rule == "h":
        return h / pp
    if cfg.dt_rule == "h-phi":
        return h / (cfg.Phi * pp)
    return cfg.dt


def solver_config(cfg: ExperimentConfig, problem=None) -> SolverConfig:
    """Solver settings; an unset criterion means error stagnation when the
    experiment has an exact solution and successive change otherwise."""
    criterion = cfg.criterion
    if criterion is None:
        if problem is None:
            problem = problem_for(cfg)
        criterion = STAGNATION if problem.exact is not None else SUCCESSIVE
    return SolverConfig(criterion=criterion, tol=cfg.tol, max_iter=cfg.max_iter,
                        element_order=cfg.element_order, face_order=cfg.face_order)


def predict(cfg: ExperimentConfig, disc: Optional[Discretization] = None) -> TheoryReport:
    """A-priori verdict for ``cfg``; builds the discretization if not given."""
    problem = problem_for(cfg)
    mesh = mesh_for(cfg, problem)
    h = float(np.min(mesh.widths))
    dt = time_step(cfg, h)
    # the implicit operator carries mass / dt_eff
    dt_eff = None if dt is None else (dt / 2 if cfg.time_scheme == CRANK_NICOLSON else dt)
    model = problem.model
    if isinstance(model, Transport):
        inputs = dict(h=h, p=cfg.p, flux=cfg.flux)
        consts = {"contraction": 0.0 if cfg.flux == NPC else 0.5}
        return TheoryReport("transport", inputs, consts, CONVERGENT)
    if isinstance(model, ShallowWater):
        return shallow_water_verdict(model.Phi, model.gamma, h, dt_eff, cfg.p)
    if disc is None:
        disc = discretize(model, FluxScheme(cfg.flux, cfg.gamma_stab), mesh,
                          build_reference(cfg.p, mesh.d))
    c = sampled_constants(disc, dt_eff)
    return convdiff_verdict(model.kappa, c["beta_n"], c["lam"], c["tau_bar"], c["tau_star"],
                            h, cfg.p, mesh.d)


def _injector(problem, disc: Discretization):
    if problem.injection_period is None:
        return None
    period = problem.injection_period
    pulse = disc.interpolate(lambda x, t: problem.initial(x))

    def inject(t, q):
        k = round(t / period)
        if k >= 1 and abs(t - k * period) < 1e-9 * period:
            return q + pulse
        return q
    return inject


def run(cfg: ExperimentConfig) -> RunResult:
    """Execute one configuration; divergence is reported in ``status``."""
    problem = problem_for(cfg)
    mesh = mesh_for(cfg, problem)
    ref = build_reference(cfg.p, mesh.d)
    flux = FluxScheme(cfg.flux, cfg.gamma_stab)
    width = float(np.min(mesh.widths))
    scfg = solver_config(cfg, problem)
    history = []
    if not cfg.is_time_dependent:
        disc = discretize(problem.model, flux, mesh, ref)
        prediction = predict(cfg, disc)
        q, _, rep = solve(disc, scfg, exact=problem.exact)
        for k, r in enumerate(rep.residuals, start=1):
            err = rep.errors[k - 1] if rep.errors else math.nan
            history.append((0, k, r, err))
        err = disc.l2_error(q, problem.exact) if problem.exact is not None else None
        if err is not None and not np.isfinite(err):
            err = math.nan
        return RunResult(cfg, mesh.n_elements, float(np.max(mesh.widths)), None,
                         rep.iterations, float(rep.iterations), 0, rep.status, err,
                         prediction, history, rep.wall_time)

    dt = time_step(cfg, width)
    tcfg = TimeLoopConfig(cfg.time_scheme, dt, cfg.n_steps, cfg.warm_start, scfg)
    disc = time_discretization(problem.model, flux, mesh, ref, tcfg)
    prediction = predict(cfg, disc)
    q0 = disc.interpolate(lambda x, t: problem.initial(x))
    wall = [0.0]

    def on_step(n, t, q, rep):
        wall[0] += rep.wall_time

    q, hist = advance(disc, tcfg, q0, exact=problem.exact, inject=_injector(problem, disc),
                      on_step=on_step)
    for n, rep in enumerate(hist.reports, start=1):
        for k, r in enumerate(rep.residuals, start=1):
            err = rep.errors[k - 1] if rep.errors else math.nan
            history.append((n, k, r, err))
    status = hist.reports[-1].status if hist.reports else "converged"
    its = hist.iterations
    err = hist.errors[-1] if hist.errors else None
    return RunResult(cfg, mesh.n_elements, float(np.max(mesh.widths)), dt,
                     its[-1] if its else 0, float(np.mean(its)) if its else 0.0,
                     hist.steps, status, err, prediction, history, wall[0])


def observed_rates(results: list) -> list:
    """Pairwise observed rates ``log(e0/e1)/log(h0/h1)``."""
    rates = [math.nan]
    for a, b in zip(results, results[1:]):
        if a.l2_error and b.l2_error and a.h != b.h and a.l2_error > 0 and b.l2_error > 0:
            rates.append(math.log(a.l2_error / b.l2_error) / math.log(a.h / b.h))
        else:
            rates.append(math.nan)
    return rates


def convergence_slope(h, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    lh, le = np.log(np.asarray(h, float)), np.log(np.asarray(errors, float))
    return float(np.polyfit(lh, le, 1)[0])
