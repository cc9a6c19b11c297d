"""Closed-form convergence constants and a-priori verdicts for iHDG.

Everything here is plain formula evaluation: the constants are sufficient
conditions, so a negative verdict means "not guaranteed", not "diverges".
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .mesh import Mesh
from .reference import build_reference

CONVERGENT = "convergent"
MARGINAL = "marginal"
NON_CONVERGENT = "non-convergent"

# observed divergence onsets sit this factor above the raw thresholds
CALIBRATION = {"upwind": 2.0, "npc": 4.0}


@dataclass
class TheoryReport:
    model: str
    inputs: dict
    constants: dict
    verdict: str
    bounds: dict = field(default_factory=dict)

    @property
    def convergent(self) -> bool:
        return self.verdict == CONVERGENT

    def summary(self) -> str:
        consts = ", ".join(f"{k}={v:.4g}" for k, v in self.constants.items())
        return f"{self.model}: {self.verdict} ({consts})"


def _verdict(B: float, ratio: float, scale: float) -> str:
    if abs(B) <= 1e-12 * max(scale, 1.0):
        return MARGINAL
    return CONVERGENT if B > 0 and ratio < 1 else NON_CONVERGENT


def _pp(p: int) -> int:
    return (p + 1) * (p + 2)


def shallow_water_verdict(Phi: float, gamma: float, h: float, dt: float, p: int,
                          c: float = 1.0) -> TheoryReport:
    """Contraction constant ``C = A/B`` for the linearized shallow water sweep.

    Examples
    --------
    >>> r = shallow_water_verdict(1.0, 0.0, 0.25, 0.25 / 6, 1)
    >>> r.constants["A"], r.verdict
    (1.0, 'marginal')
    """
    if Phi <= 0 or h <= 0 or dt <= 0:
        raise ValueError("Phi, h and dt must be positive")
    if not 0 < c <= 1:
        raise ValueError("c must lie in (0, 1]")
    sq = math.sqrt(Phi)
    A = max((Phi + sq) / 2, (1 + sq) / 2)
    b1 = c * h / (dt * _pp(p)) + (sq - Phi) / 2
    b2 = (gamma + 1 / dt) * c * h / _pp(p) - (1 + sq) / 2
    B = min(b1, b2)
    C = A / B if B > 0 else math.inf
    inputs = dict(Phi=Phi, gamma=gamma, h=h, dt=dt, p=p, c=c)
    bounds = {"dt_scale": h / (Phi * _pp(p))}
    return TheoryReport("shallow-water", inputs, dict(A=A, B=B, C=C),
                        _verdict(B, C, max(abs(b1), abs(b2), A)), bounds)


def convdiff_verdict(kappa: float, beta_n: float, lam: float, tau_bar: float,
                     tau_star: float, h: float, p: int, d: int, c: float = 1.0,
                     eps: Optional[float] = None) -> TheoryReport:
    """Constants ``C1..C4, A, B, D, E, F`` for the convection-diffusion sweep.

    Parameters
    ----------
    beta_n : float
        ``max |beta . n|`` over the skeleton.
    lam : float
        Coercivity ``min(nu - div(beta)/2)``; add ``1/dt`` for implicit
        time stepping.
    tau_bar, tau_star : float
        Maximum and minimum of the stabilization on the skeleton.
    eps : float, optional
        Young's-inequality weight, ``1/tau_bar`` by default.

    Notes
    -----
    ``bounds`` carries the mesh-size thresholds obtained by asking each
    branch of ``B`` to be positive: ``h_kappa`` from the diffusive branch and
    ``h_reaction`` from the reaction branch (0 when that branch never binds).
    """
    if kappa <= 0 or lam <= 0:
        raise ValueError("kappa and lambda must be positive")
    if tau_bar <= 0 or h <= 0:
        raise ValueError("tau_bar and h must be positive")
    eps = 1.0 / tau_bar if eps is None else eps
    if eps <= 0:
        raise ValueError("eps must be positive")
    C1 = 3 * (beta_n**2 + tau_bar**2) * (tau_bar * eps + 1) / (2 * eps)
    C2 = 3 * (tau_bar * eps + 1) / (2 * eps)
    C3 = (tau_bar + beta_n) / 2
    C4 = eps / 2
    A = max(C1, C2)
    scale = 2 * c * h / (d * _pp(p))
    b1 = scale / kappa - C4
    b2 = scale * lam + tau_star - C3
    B = min(b1, b2)
    D = A / B if B > 0 else math.inf
    denom = min(1 / kappa, lam)
    E = max(C3, C4) / denom
    F = A / denom
    bounds = {
        "h_kappa": C4 * kappa * d * _pp(p) / (2 * c),
        "h_reaction": max(C3 - tau_star, 0.0) * d * _pp(p) / (2 * c * lam),
    }
    inputs = dict(kappa=kappa, beta_n=beta_n, lam=lam, tau_bar=tau_bar,
                  tau_star=tau_star, h=h, p=p, d=d, c=c, eps=eps)
    consts = dict(C1=C1, C2=C2, C3=C3, C4=C4, A=A, B=B, D=D, E=E, F=F)
    return TheoryReport("convection-diffusion", inputs, consts,
                        _verdict(B, D, max(abs(b1), abs(b2))), bounds)


def minimum_mesh_size(kappa: float, tau_bar: float, p: int, d: int = 3,
                      c: float = 1.0, eps: Optional[float] = None) -> float:
    """Smallest ``h`` keeping the diffusive branch of ``B`` positive.

    >>> round(minimum_mesh_size(0.01, 2.0, 4), 4)
    0.1125
    """
    eps = 1.0 / tau_bar if eps is None else eps
    return eps * kappa * d * _pp(p) / (4 * c)


def calibrated_mesh_size(kind: str, kappa: float, tau_bar: float, p: int,
                         d: int = 3, c: float = 1.0) -> float:
    """Raw threshold times the empirical factor for flux ``kind``."""
    return CALIBRATION[kind] * minimum_mesh_size(kappa, tau_bar, p, d, c)


def elliptic_bounds(h: float, p: int, d: int, lam: float, gamma: float = 1.0) -> dict:
    """Stabilization and mesh-size conditions for pure diffusion.

    Returns the ``tau`` lower bound ``d(p+1)(p+2)/(4h)`` and the two mesh-size
    lower bounds for ``tau = gamma (p+1)(p+2)/h``; the second is infinite
    when ``gamma <= d/4``.
    """
    if h <= 0 or lam <= 0:
        raise ValueError("h and lambda must be positive")
    h1 = math.sqrt(23 * gamma * d) * _pp(p) / (2 * math.sqrt(lam))
    h2 = (math.sqrt(24 * d) * _pp(p) * gamma / math.sqrt(4 * gamma - d)
          if 4 * gamma > d else math.inf)
    return {"tau_min": d * _pp(p) / (4 * h), "h_min_reaction": h1, "h_min_penalty": h2,
            "tau": gamma * _pp(p) / h}


def estimate_lambda(model, x: np.ndarray, dt: Optional[float] = None) -> float:
    """Sampled ``min(nu - div(beta)/2)`` plus ``1/dt`` when given."""
    lam = float(np.min(model.coercivity(x)))
    return lam + (1.0 / dt if dt is not None else 0.0)


def sampled_constants(disc, dt: Optional[float] = None) -> dict:
    """``beta_n``, ``tau_bar``, ``tau_star`` and ``lambda`` read off a discretization."""
    from .flux import convdiff_tau

    mesh, geom, model = disc.mesh, disc.geometry, disc.model
    xf = disc.trace.face_x
    s = np.sum(model.beta(xf) * mesh.normals[:, None, :], axis=-1)
    h_tau = float(np.min(mesh.widths))
    taus = np.concatenate([convdiff_tau(disc.scheme, model, s, h_tau, disc.ref.p).ravel(),
                           convdiff_tau(disc.scheme, model, -s, h_tau, disc.ref.p).ravel()])
    return {"beta_n": float(np.max(np.abs(s))), "tau_bar": float(np.max(taus)),
            "tau_star": float(np.min(taus)),
            "lam": estimate_lambda(model, geom.x.reshape(-1, mesh.d), dt)}


def _inflow_faces(mesh: Mesh, beta, ref) -> np.ndarray:
    """``(n_faces,)`` flags: minus side / plus side receives data across the face."""
    xf = mesh.face_nodes(ref)
    s = np.sum(beta(xf) * mesh.normals[:, None, :], axis=-1)
    # characteristic faces with mixed sign count as inflow for both sides
    return np.any(s < 0, axis=1), np.any(s > 0, axis=1)


def layer_count(mesh: Mesh, beta, ref=None) -> int:
    """Depth of the inflow-to-outflow peeling of the elements.

    Level 1 holds elements whose inflow faces are all on the domain boundary;
    level ``i+1`` those whose interior inflow neighbours all sit in earlier
    levels.  ``beta`` is sampled at the face nodes of ``ref`` (``p=2`` by
    default).

    Raises
    ------
    ValueError
        When the peel stalls, i.e. the dependency graph has a cycle.

    Examples
    --------
    >>> from ihdg.mesh import build_box
    >>> layer_count(build_box([(0, 1)], 5), lambda x: np.ones_like(x))
    5
    """
    ref = build_reference(2, mesh.d) if ref is None else ref
    minus_in, plus_in = _inflow_faces(mesh, beta, ref)
    deps = [set() for _ in range(mesh.n_elements)]
    for f in mesh.interior:
        me, pe = int(mesh.minus_elem[f]), int(mesh.plus_elem[f])
        if minus_in[f]:
            deps[me].add(pe)
        if plus_in[f]:
            deps[pe].add(me)
    level = np.zeros(mesh.n_elements, dtype=int)
    done = np.zeros(mesh.n_elements, dtype=bool)
    J = 0
    while not done.all():
        ready = [e for e in np.flatnonzero(~done) if all(done[n] for n in deps[e])]
        if not ready:
            raise ValueError("layer peeling stalled: the flow recirculates")
        J += 1
        level[ready] = J
        done[ready] = True
    return J
