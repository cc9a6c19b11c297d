"""Dense reference solvers for small instances.

The coupled volume + trace system is

    [ K  -C ] [q  ]   [f]
    [-T   I ] [lam] = [g]

with ``K`` the block-diagonal local matrices, ``C`` the trace-to-volume
coupling, ``T`` the trace update and ``g`` its boundary-data part.  iHDG is
block Gauss-Seidel on this system, so its fixed point must match the direct
solution.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .solver import Discretization, SolverConfig

MAX_DIRECT_UNKNOWNS = 5000
MAX_ITERATION_UNKNOWNS = 2000


@dataclass
class GlobalSystem:
    """Dense coupled system; volume unknowns first, then traces."""

    n_volume: int
    n_trace: int
    matrix: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    volume_shape: tuple
    trace_shape: tuple

    @property
    def size(self) -> int:
        return self.n_volume + self.n_trace

    def split(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (z[:self.n_volume].reshape(self.volume_shape),
                z[self.n_volume:].reshape(self.trace_shape))

    def residuals(self, q: np.ndarray, lam: np.ndarray) -> tuple[float, float]:
        """Max-norm residuals of the volume and trace block rows."""
        z = np.concatenate([q.ravel(), lam.ravel()])
        r = self.matrix @ z - self.rhs
        return float(np.max(np.abs(r[:self.n_volume]))), float(np.max(np.abs(r[self.n_volume:])))


def _coupling(disc: Discretization) -> np.ndarray:
    """``C`` with rows in volume layout and columns in trace layout."""
    mesh, loc, g = disc.mesh, disc.local, disc.geometry
    n_el, m, nv = disc.shape
    mt_store = disc.trace.mt
    nfn = g.face_maps.shape[1]
    C = np.zeros((n_el * m * nv, mesh.n_faces * mt_store * nfn))
    j = np.arange(nfn)
    for e in range(n_el):
        for lf in range(2 * mesh.d):
            f = mesh.elem_faces[e, lf]
            fmap = g.face_maps[lf]
            nodal = m
            if loc.face_coupling is not None:
                nodal = m - 1
                rows = (e * m + m - 1) * nv + fmap
                cols = f * mt_store * nfn + j
                C[rows[:, None], cols[None, :]] += loc.face_coupling[e, lf]
            for c in range(nodal):
                rows = (e * m + c) * nv + fmap
                for t in range(loc.mt):
                    cols = (f * mt_store + t) * nfn + j
                    C[rows, cols] += loc.trace_coupling[e, lf, c, :, t]
    return C


def _trace_matrix(disc: Discretization) -> np.ndarray:
    """``T`` with rows in trace layout and columns in volume layout."""
    mesh, tr = disc.mesh, disc.trace
    n_el, m, nv = disc.shape
    mt, nfn = tr.mt, tr.face_maps.shape[1]
    T = np.zeros((mesh.n_faces * mt * nfn, n_el * m * nv))
    for f in range(mesh.n_faces):
        sides = [(mesh.minus_elem[f], mesh.minus_face[f], tr.w_minus[f])]
        if mesh.plus_elem[f] >= 0:
            sides.append((mesh.plus_elem[f], mesh.plus_face[f], tr.w_plus[f]))
        for e, lf, W in sides:
            fmap = tr.face_maps[lf]
            for t in range(mt):
                rows = (f * mt + t) * nfn + np.arange(nfn)
                for c in range(m):
                    T[rows, (e * m + c) * nv + fmap] += W[:, t, c]
    return T


def assemble_global(disc: Discretization, rhs: Optional[np.ndarray] = None,
                    t: float = 0.0, cap: int = MAX_DIRECT_UNKNOWNS) -> GlobalSystem:
    n_el, m, nv = disc.shape
    n_vol = n_el * m * nv
    trace_shape = (disc.mesh.n_faces, disc.trace.mt, disc.trace.face_maps.shape[1])
    n_tr = int(np.prod(trace_shape))
    if n_vol + n_tr > cap:
        raise ValueError(f"{n_vol + n_tr} unknowns exceed the dense cap of {cap}")
    N = m * nv
    K = np.zeros((n_vol, n_vol))
    mats = disc.local.element_matrices(np.arange(n_el), include_mass=True)
    for e in range(n_el):
        K[e * N:(e + 1) * N, e * N:(e + 1) * N] = mats[e]
    C = _coupling(disc)
    T = _trace_matrix(disc)
    A = np.block([[K, -C], [-T, np.eye(n_tr)]])
    f = disc.local.forcing(t) if rhs is None else rhs
    bt = disc.trace.boundary_term(t)
    g = np.zeros(trace_shape) if bt is None else np.swapaxes(bt, 1, 2)
    b = np.concatenate([np.asarray(f, dtype=float).ravel(), g.ravel()])
    return GlobalSystem(n_vol, n_tr, A, b, disc.shape, trace_shape)


def direct_solve(disc: Discretization, rhs: Optional[np.ndarray] = None, t: float = 0.0,
                 cap: int = MAX_DIRECT_UNKNOWNS) -> tuple[np.ndarray, np.ndarray]:
    """Exact discrete solution ``(q, lam)`` of the coupled system.

    Raises
    ------
    ValueError
        If the system is larger than ``cap`` or singular.
    """
    system = assemble_global(disc, rhs, t, cap)
    try:
        z = np.linalg.solve(system.matrix, system.rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular global system; the configuration is ill-posed") from exc
    return system.split(z)


def schur_trace_solve(disc: Discretization, rhs: Optional[np.ndarray] = None,
                      t: float = 0.0, cap: int = MAX_DIRECT_UNKNOWNS) -> np.ndarray:
    """Trace obtained after eliminating the volume unknowns."""
    s = assemble_global(disc, rhs, t, cap)
    nv = s.n_volume
    K, C = s.matrix[:nv, :nv], -s.matrix[:nv, nv:]
    T = -s.matrix[nv:, :nv]
    KinvC = np.linalg.solve(K, C)
    Kinvf = np.linalg.solve(K, s.rhs[:nv])
    lam = np.linalg.solve(np.eye(s.n_trace) - T @ KinvC, s.rhs[nv:] + T @ Kinvf)
    return lam.reshape(s.trace_shape)


def iteration_matrix(disc: Discretization, cfg: SolverConfig = SolverConfig(),
                     cap: int = MAX_ITERATION_UNKNOWNS) -> np.ndarray:
    """Dense matrix of one homogeneous sweep on the volume unknowns.

    Column ``j`` is the sweep applied to the unit vector ``e_j``.
    """
    n = int(np.prod(disc.shape))
    if n > cap:
        raise ValueError(f"{n} volume unknowns exceed the iteration-matrix cap of {cap}")
    zero = disc.zeros()
    saved = disc.trace.w_data
    disc.trace.w_data = None
    try:
        G = np.empty((n, n))
        e = np.zeros(n)
        for j in range(n):
            e[j] = 1.0
            q, _ = disc.sweep(e.reshape(disc.shape), zero, 0.0, cfg)
            G[:, j] = q.ravel()
            e[j] = 0.0
    finally:
        disc.trace.w_data = saved
    return G


def power_spectral_radius(G: np.ndarray, tol: float = 1e-6, max_steps: int = 5000,
                          seed: int = 0) -> tuple[float, bool]:
    """Power-iteration estimate of ``max |eig(G)|`` with a convergence flag.

    Uses the geometric mean of two successive norm ratios so that a
    dominant complex pair or a ``+-rho`` pair still gives a stable estimate.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(G.shape[0])
    x /= np.linalg.norm(x)
    ratios = []
    prev = np.inf
    for _ in range(max_steps):
        y = G @ x
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            return 0.0, True
        ratios.append(nrm)
        x = y / nrm
        if len(ratios) >= 2:
            est = float(np.sqrt(ratios[-1] * ratios[-2]))
            if abs(est - prev) < tol * est:
                return est, True
            prev = est
    return float(prev), False


def spectral_radius(G: np.ndarray) -> float:
    """``max |eig(G)|`` from a dense eigenvalue solve."""
    return float(np.max(np.abs(np.linalg.eigvals(G))))


def nilpotency_index(G: np.ndarray, limit: int, tol: float = 1e-10) -> Optional[int]:
    """Smallest ``k <= limit`` with ``||G^k|| < tol`` (Frobenius), else None."""
    P = np.eye(G.shape[0])
    for k in range(1, limit + 1):
        P = G @ P
        if np.linalg.norm(P) < tol:
            return k
    return None
