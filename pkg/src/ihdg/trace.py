"""Face-by-face weighted-trace update.

On every face the new trace is a pointwise linear combination of the two
neighbouring states, ``lam = W^- q^- + W^+ q^+``, with coefficients fixed by
the flux.  On boundary faces the exterior state is a ghost built from the
interior state and the boundary data, ``q^+ = R q^- + S g``, which folds
into ``lam = (W^- + W^+ R) q^- + W^+ S g``.

Stored trace contents per model:

* transport: ``u_hat``, the upwind value for both fluxes
* shallow water: ``|A| q_hat`` (3 components; only the first is consumed)
* convection-diffusion: ``u_hat``
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .flux import FluxScheme, convdiff_tau
from .local import Geometry
from .mesh import Mesh
from .models import ConvectionDiffusion, ShallowWater, Transport, flux_jacobian


@dataclass
class TraceOperator:
    """Linear trace map ``(q, t) -> lam``.

    Coefficient arrays have shape ``(n_faces, n_face_nodes, mt, m)``; ``w_plus``
    is zero on boundary faces.
    """

    mesh: Mesh
    face_maps: np.ndarray
    face_x: np.ndarray = field(repr=False)
    w_minus: np.ndarray = field(repr=False)
    w_plus: np.ndarray = field(repr=False)
    w_data: Optional[np.ndarray] = field(default=None, repr=False)
    data: Optional[Callable] = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def mt(self) -> int:
        return self.w_minus.shape[2]

    def boundary_term(self, t: float = 0.0) -> Optional[np.ndarray]:
        """``W^+ S g(t)`` on every face (zero on interior faces)."""
        if self.w_data is None or self.data is None:
            return None
        key = float(t)
        if key not in self._cache:
            g = self.data(self.face_x, t)  # (nf, nfn, mg)
            out = np.zeros(self.w_data.shape[:3])
            for c in range(g.shape[-1]):
                out = out + self.w_data[..., c] * g[..., None, c]
            self._cache.clear()
            self._cache[key] = out
        return self._cache[key]

    def apply(self, q: np.ndarray, t: float = 0.0, order: Optional[np.ndarray] = None) -> np.ndarray:
        """New traces from volume states ``q`` of shape ``(n_el, m, n_vol)``.

        ``order`` permutes the face processing order; each face is computed
        independently, so the result does not depend on it.
        """
        mesh = self.mesh
        faces = np.arange(mesh.n_faces) if order is None else np.asarray(order)
        me, mf = mesh.minus_elem[faces], mesh.minus_face[faces]
        pe, pf = mesh.plus_elem[faces], mesh.plus_face[faces]
        qm = q[me[:, None], :, self.face_maps[mf]]  # (n, nfn, m)
        interior = pe >= 0
        qp = np.zeros_like(qm)
        qp[interior] = q[pe[interior][:, None], :, self.face_maps[pf[interior]]]
        Wm, Wp = self.w_minus[faces], self.w_plus[faces]
        lam = np.zeros(qm.shape[:2] + (self.mt,))
        for c in range(qm.shape[-1]):
            lam = lam + Wm[..., c] * qm[:, :, None, c]
        for c in range(qm.shape[-1]):
            lam = lam + Wp[..., c] * qp[:, :, None, c]
        bt = self.boundary_term(t)
        if bt is not None:
            lam = lam + bt[faces]
        out = np.empty((mesh.n_faces, self.mt, qm.shape[1]))
        out[faces] = np.swapaxes(lam, 1, 2)
        return out


def residual_norm(q_new: np.ndarray, q_old: np.ndarray, mass: np.ndarray,
                  components: Optional[np.ndarray] = None) -> float:
    """Discrete L2 norm of ``q_new - q_old`` with the diagonal mass ``mass``.

    Sums over the selected components and all elements in storage order.
    """
    diff = np.asarray(q_new) - np.asarray(q_old)
    if components is not None:
        diff = diff[:, np.asarray(components)]
    return float(np.sqrt(np.sum(mass * diff**2)))


def _face_x(mesh: Mesh, geom: Geometry) -> np.ndarray:
    return geom.x[mesh.minus_elem[:, None], geom.face_maps[mesh.minus_face]]


def build_trace(model, scheme: FluxScheme, mesh: Mesh, geom: Geometry, p: int) -> TraceOperator:
    """Trace coefficients for ``model`` with the flux ``scheme``."""
    scheme.check_model(model)
    xf = _face_x(mesh, geom)  # (nf, nfn, d)
    n = mesh.normals[:, None, :]  # minus-side normal
    nf, nfn, d = xf.shape
    boundary = mesh.plus_elem < 0
    h_tau = float(np.min(mesh.widths))

    if isinstance(model, ShallowWater):
        A, absA = flux_jacobian(model, xf, np.broadcast_to(n, xf.shape))
        Wm, Wp = 0.5 * (absA + A), 0.5 * (absA - A)
        # wall: mirror phi, reflect the normal momentum
        nn = np.broadcast_to(n, xf.shape)
        R = np.zeros((nf, nfn, 3, 3))
        R[..., 0, 0] = 1.0
        R[..., 1:, 1:] = np.eye(2) - 2 * nn[..., :, None] * nn[..., None, :]
        Wm = Wm.copy()
        Wm[boundary] += Wp[boundary] @ R[boundary]
        Wp = Wp.copy()
        Wp[boundary] = 0.0
        return TraceOperator(mesh, geom.face_maps, xf, Wm, Wp)

    s = np.sum(model.beta(xf) * n, axis=-1)  # (nf, nfn)
    if isinstance(model, Transport):
        # both fluxes make u_hat the upwind value; nodes with s = 0 follow
        # the face-mean flux (the trace is interpolated between nodes)
        sgn = np.sign(s)
        sgn = np.where(sgn == 0, np.sign(s.mean(axis=1))[:, None], sgn)
        cm = 0.5 * (1 + sgn)
        cp = 0.5 * (1 - sgn)
        inflow = sgn < 0
        # ghost: data on inflow nodes, interior value elsewhere
        Wm = cm.copy()
        Wm[boundary] += np.where(inflow[boundary], 0.0, cp[boundary])
        Wd = np.where(boundary[:, None] & inflow, cp, 0.0)
        Wp = np.where(boundary[:, None], 0.0, cp)
        return TraceOperator(mesh, geom.face_maps, xf, Wm[..., None, None], Wp[..., None, None],
                             Wd[..., None, None], model.boundary_value)

    # convection-diffusion
    tm = convdiff_tau(scheme, model, s, h_tau, p)
    tp = convdiff_tau(scheme, model, -s, h_tau, p)
    den = tm + tp
    if np.any(den <= 0):
        raise ValueError("trace denominator tau^+ + tau^- vanishes")
    Wm = np.zeros((nf, nfn, 1, d + 1))
    Wp = np.zeros_like(Wm)
    for i in range(d):
        Wm[..., 0, i] = mesh.normals[:, None, i] / den
        Wp[..., 0, i] = -mesh.normals[:, None, i] / den
    Wm[..., 0, d] = (s + tm) / den
    Wp[..., 0, d] = (tp - s) / den
    Wd = np.zeros((nf, nfn, 1, 1))
    for f in np.flatnonzero(boundary):
        axis, side = mesh.boundary_tag(f)
        Wp[f] = 0.0
        if model.neumann(axis, side):
            # zero diffusive flux: total normal flux reduces to s * u_hat
            Wm[f] = 0.0
            for i in range(d):
                Wm[f, :, 0, i] = mesh.normals[f, i] / (tm[f] + s[f])
            Wm[f, :, 0, d] = 1.0
        else:
            Wm[f] = 0.0
            Wd[f] = 1.0
    return TraceOperator(mesh, geom.face_maps, xf, Wm, Wp, Wd, model.boundary_value)
