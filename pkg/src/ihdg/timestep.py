"""Implicit time stepping with an iHDG solve per step."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .flux import FluxScheme
from .mesh import Mesh
from .models import ShallowWater
from .reference import ReferenceElement
from .solver import Discretization, IterationReport, SolverConfig, discretize, solve

BACKWARD_EULER = "backward-euler"
CRANK_NICOLSON = "crank-nicolson"


@dataclass(frozen=True)
class TimeLoopConfig:
    scheme: str = CRANK_NICOLSON
    dt: float = 1e-3
    n_steps: int = 1
    warm_start: bool = True
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if self.n_steps < 0:
            raise ValueError("n_steps must be non-negative")
        if self.scheme not in (BACKWARD_EULER, CRANK_NICOLSON):
            raise ValueError(f"unknown time scheme {self.scheme!r}")


@dataclass
class TimeHistory:
    iterations: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    first_residuals: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    aborted: bool = False

    @property
    def steps(self) -> int:
        return len(self.iterations)


def time_discretization(model, flux: FluxScheme, mesh: Mesh, ref: ReferenceElement,
                        cfg: TimeLoopConfig) -> Discretization:
    """Discretization whose mass term matches the implicit part of ``cfg``."""
    dt = cfg.dt if cfg.scheme == BACKWARD_EULER else cfg.dt / 2
    return discretize(model, flux, mesh, ref, dt)


def spatial_residual(disc: Discretization, q: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Steady local operator applied to ``(q, lam)`` without forcing."""
    n_el = disc.mesh.n_elements
    out = disc.local.apply(q, include_mass=False)
    return out - disc.local.rhs_from_trace(lam, disc.mesh.elem_faces, np.arange(n_el))


def advance(disc: Discretization, cfg: TimeLoopConfig, initial: np.ndarray, *,
            t0: float = 0.0, exact: Optional[Callable] = None,
            inject: Optional[Callable[[float, np.ndarray], np.ndarray]] = None,
            on_step: Optional[Callable] = None) -> tuple[np.ndarray, TimeHistory]:
    """March ``n_steps`` steps from ``initial`` at time ``t0``.

    ``disc`` must come from :func:`time_discretization` with the same
    ``cfg``.  ``inject(t, q)`` is called after every step and may return a
    modified state (used for periodic contaminant release).  A diverged or
    non-converged step stops the loop and marks the history as aborted.
    """
    expected = cfg.dt if cfg.scheme == BACKWARD_EULER else cfg.dt / 2
    if disc.local.dt is None or not np.isclose(disc.local.dt, expected, rtol=1e-12):
        raise ValueError("discretization time step does not match the time-loop scheme")
    local = disc.local
    q = np.array(initial, dtype=float)
    t = t0
    hist = TimeHistory()
    for n in range(cfg.n_steps):
        t_new = t0 + (n + 1) * cfg.dt
        f_new = local.forcing(t_new)
        if cfg.scheme == BACKWARD_EULER:
            rhs = f_new + local.mass_rows(q) / cfg.dt
        else:
            lam_old = disc.trace.apply(q, t)
            explicit = 2.0 * local.mass_rows(q) / cfg.dt - spatial_residual(disc, q, lam_old) + local.forcing(t)
            explicit[:, ~local.time_mask] = 0.0
            rhs = f_new + explicit
        guess = q if cfg.warm_start else None
        q_new, _, rep = solve(disc, cfg.solver, rhs=rhs, t=t_new, initial=guess,
                              exact=exact if cfg.solver.criterion == "stagnation" else None)
        hist.iterations.append(rep.iterations)
        hist.reports.append(rep)
        hist.first_residuals.append(rep.residuals[0] if rep.residuals else 0.0)
        if not rep.converged:
            hist.aborted = True
            q = q_new
            t = t_new
            break
        q, t = q_new, t_new
        if inject is not None:
            q = inject(t, q)
        if exact is not None:
            hist.errors.append(disc.l2_error(q, exact, t))
        if on_step is not None:
            on_step(n + 1, t, q, rep)
    return q, hist


def shallow_water_energy(disc: Discretization, q: np.ndarray) -> float:
    """``||phi||^2 + Phi ||u||^2`` with ``q = (phi, Phi u, Phi v)``."""
    model = disc.model
    if not isinstance(model, ShallowWater):
        raise TypeError("energy is defined for shallow water only")
    M = disc.geometry.mass
    return float(np.sum(M * q[:, 0] ** 2) + np.sum(M * (q[:, 1] ** 2 + q[:, 2] ** 2)) / model.Phi)
