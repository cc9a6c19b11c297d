"""The iHDG fixed-point iteration: local solves alternating with trace updates."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .flux import FluxScheme
from .local import Geometry, LocalOperator, assemble_local, build_geometry
from .mesh import Mesh
from .reference import ReferenceElement
from .trace import TraceOperator, build_trace, residual_norm

SUCCESSIVE = "successive"   # ||u^k - u^{k-1}|| < tol
STAGNATION = "stagnation"   # | ||u^k - u^e|| - ||u^{k-1} - u^e|| | < tol

CONVERGED = "converged"
DIVERGED = "diverged"
MAX_ITER = "max-iter"


@dataclass(frozen=True)
class SolverConfig:
    """Stopping and ordering controls for :func:`solve`.

    ``element_order`` / ``face_order`` may be ``"natural"``, ``"reversed"``
    or an explicit permutation; they only change the processing order.
    """

    criterion: str = SUCCESSIVE
    tol: float = 1e-10
    max_iter: int = 10000
    divergence_factor: float = 1e6
    element_order: object = "natural"
    face_order: object = "natural"
    chunk: int = 256

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.criterion not in (SUCCESSIVE, STAGNATION):
            raise ValueError(f"unknown stopping criterion {self.criterion!r}")
        if self.chunk < 1:
            raise ValueError("chunk must be at least 1")


@dataclass
class IterationReport:
    iterations: int
    status: str
    residuals: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def diverged(self) -> bool:
        return self.status == DIVERGED


@dataclass
class Discretization:
    """Everything needed to run iHDG sweeps on one (model, mesh, p, dt)."""

    model: object
    scheme: FluxScheme
    mesh: Mesh
    ref: ReferenceElement
    geometry: Geometry
    local: LocalOperator
    trace: TraceOperator

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.mesh.n_elements, self.local.m, self.ref.n_vol)

    @property
    def monitored(self) -> np.ndarray:
        return np.flatnonzero(self.model.monitored_components(self.mesh.d))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def interpolate(self, fn: Callable, t: float = 0.0) -> np.ndarray:
        """Nodal interpolant of ``fn(x, t)`` (last axis = components)."""
        return np.moveaxis(np.asarray(fn(self.geometry.x, t), dtype=float), -1, 1).copy()

    def l2_error(self, q: np.ndarray, exact: Callable, t: float = 0.0,
                 components: Optional[np.ndarray] = None) -> float:
        comps = self.monitored if components is None else components
        return residual_norm(q, self.interpolate(exact, t), self.geometry.mass, comps)

    def sweep(self, q: np.ndarray, rhs: np.ndarray, t: float = 0.0,
              cfg: SolverConfig = SolverConfig()) -> tuple[np.ndarray, np.ndarray]:
        """One iteration: traces from ``q``, then local solves."""
        lam = self.trace.apply(q, t, _order(cfg.face_order, self.mesh.n_faces))
        return self.local_solve(lam, rhs, cfg), lam

    def local_solve(self, lam: np.ndarray, rhs: np.ndarray,
                    cfg: SolverConfig = SolverConfig()) -> np.ndarray:
        n_el = self.mesh.n_elements
        order = _order(cfg.element_order, n_el)
        out = np.empty(self.shape)
        for start in range(0, n_el, cfg.chunk):
            idx = order[start:start + cfg.chunk]
            b = rhs[idx] + self.local.rhs_from_trace(lam, self.mesh.elem_faces, idx)
            out[idx] = self.local.solve(b, idx)
        return out


def _order(spec, n: int) -> np.ndarray:
    if isinstance(spec, str):
        if spec == "natural":
            return np.arange(n)
        if spec == "reversed":
            return np.arange(n)[::-1].copy()
        raise ValueError(f"unknown ordering {spec!r}")
    order = np.asarray(spec, dtype=np.intp)
    if order.shape != (n,) or not np.array_equal(np.sort(order), np.arange(n)):
        raise ValueError("ordering must be a permutation of all indices")
    return order


def discretize(model, scheme: FluxScheme, mesh: Mesh, ref: ReferenceElement,
               dt: Optional[float] = None) -> Discretization:
    geom = build_geometry(mesh, ref)
    local = assemble_local(model, scheme, mesh, ref, dt, geom)
    trace = build_trace(model, scheme, mesh, geom, ref.p)
    return Discretization(model, scheme, mesh, ref, geom, local, trace)


def solve(disc: Discretization, cfg: SolverConfig = SolverConfig(), *,
          rhs: Optional[np.ndarray] = None, t: float = 0.0,
          initial: Optional[np.ndarray] = None,
          exact: Optional[Callable] = None,
          callback: Optional[Callable] = None) -> tuple[np.ndarray, np.ndarray, IterationReport]:
    """Run iHDG until the stopping criterion holds.

    Parameters
    ----------
    rhs : ndarray, optional
        Volume right-hand side ``(n_el, m, n_vol)``; defaults to ``M f(t)``.
    initial : ndarray, optional
        Initial guess ``u^0`` (zero by default).
    exact : callable, optional
        ``exact(x, t)``; required by the stagnation criterion and used to
        record errors when given.

    Returns
    -------
    q, lam, report
        Final volume state, the trace it was computed from, and the report.
        Divergence and exhausted iteration budgets are reported, not raised.
    """
    if cfg.criterion == STAGNATION and exact is None:
        raise ValueError("the stagnation criterion needs an exact solution")
    start = time.perf_counter()
    if rhs is None:
        rhs = disc.local.forcing(t)
    q = disc.zeros() if initial is None else np.array(initial, dtype=float)
    mass = disc.geometry.mass
    comps = disc.monitored
    residuals, errors = [], []
    prev_err = disc.l2_error(q, exact, t, comps) if exact is not None else None
    status = MAX_ITER
    lam = disc.trace.apply(q, t, _order(cfg.face_order, disc.mesh.n_faces))
    k = 0
    for k in range(1, cfg.max_iter + 1):
        q_new = disc.local_solve(lam, rhs, cfg)
        res = residual_norm(q_new, q, mass, comps)
        residuals.append(res)
        q = q_new
        lam = disc.trace.apply(q, t, _order(cfg.face_order, disc.mesh.n_faces))
        if exact is not None:
            err = disc.l2_error(q, exact, t, comps)
            errors.append(err)
        if callback is not None:
            callback(k, q, res)
        if not np.isfinite(res) or res >= cfg.divergence_factor * max(residuals[0], 1e-300) and k > 1:
            status = DIVERGED
            break
        if cfg.criterion == SUCCESSIVE:
            done = res < cfg.tol
        else:
            done = abs(err - prev_err) < cfg.tol
            prev_err = err
        if done:
            status = CONVERGED
            break
    report = IterationReport(k, status, residuals, errors, time.perf_counter() - start)
    return q, lam, report


def power_iterate(disc: Discretization, n_steps: int = 200, tol: float = 1e-6,
                  seed: int = 0, cfg: SolverConfig = SolverConfig()) -> tuple[float, bool]:
    """Dominant eigenvalue modulus of the homogeneous sweep ``q -> G q``.

    Boundary data and forcing are dropped.  Returns the estimate and a flag
    that is ``True`` when successive estimates agreed to ``tol``.
    """
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(disc.shape)
    zero_rhs = disc.zeros()
    saved = disc.trace.w_data
    disc.trace.w_data = None
    try:
        norm = np.linalg.norm(q)
        q /= norm
        est, prev = 0.0, np.inf
        # ratio of successive norms, averaged over two steps to damp 2-cycles
        history = []
        for _ in range(n_steps):
            lam = disc.trace.apply(q)
            q_new = disc.local_solve(lam, zero_rhs, cfg)
            nrm = np.linalg.norm(q_new)
            history.append(nrm)
            if nrm == 0.0:
                return 0.0, True
            q = q_new / nrm
            if len(history) >= 2:
                est = np.sqrt(history[-1] * history[-2])
                if abs(est - prev) < tol * max(est, 1e-300):
                    return float(est), True
                prev = est
        return float(est), False
    finally:
        disc.trace.w_data = saved
