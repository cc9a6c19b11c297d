"""Element-local HDG operators: assembly, factorization and solves.

Every element ``K`` owns a dense operator acting on its ``m * n_vol`` nodal
unknowns (component-major: all nodes of component 0 first).  Given the
trace values on its ``2d`` faces and the volume forcing, a local solve is a
single back-substitution with the stored inverse.

For convection-diffusion the flux unknowns ``sigma`` enter through a
diagonal mass block, so they are condensed out and only an ``n_vol``-sized
operator on ``u`` is stored; ``sigma`` is recovered afterwards.

Mass and diffusion blocks are collocated at the GLL nodes.  Advection, the
scalar face terms and the scalar load use a Gauss rule instead; see
:func:`build_geometry`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .flux import NPC, UPWIND, FluxScheme, convdiff_tau, npc_transport_tau
from .mesh import Mesh
from .models import ConvectionDiffusion, ShallowWater, Transport
from .reference import ReferenceElement, lagrange_basis

# doubles per assembly chunk (~128 MB)
_CHUNK_BUDGET = 2**24


@dataclass(frozen=True)
class Geometry:
    """Per-mesh collocation data for a uniform box mesh.

    All elements are translates of one another, so mass, derivative and
    face weights are shared; only the physical node coordinates differ.
    """

    x: np.ndarray            # (n_el, n_vol, d)
    mass: np.ndarray         # (n_vol,)
    deriv: np.ndarray        # (d, n_vol, n_vol) physical derivative matrices
    face_weights: np.ndarray  # (2d, n_face) scaled by face Jacobians
    face_normals: np.ndarray  # (2d, d) outward normals of local faces
    face_maps: np.ndarray    # (2d, n_face)
    widths: np.ndarray       # (d,)
    quad_x: np.ndarray = field(repr=False, default=None)       # (n_el, n_q, d)
    quad_weights: np.ndarray = field(repr=False, default=None)  # (n_q,)
    quad_interp: np.ndarray = field(repr=False, default=None)   # (n_q, n_vol)
    quad_deriv: np.ndarray = field(repr=False, default=None)    # (d, n_q, n_vol)
    face_quad_x: np.ndarray = field(repr=False, default=None)   # (n_el, 2d, n_fq, d)
    face_quad_weights: np.ndarray = field(repr=False, default=None)  # (2d, n_fq)
    face_quad_interp: np.ndarray = field(repr=False, default=None)   # (2d, n_fq, n_face)

    @property
    def n_el(self) -> int:
        return self.x.shape[0]

    @property
    def n_vol(self) -> int:
        return self.x.shape[1]

    @property
    def d(self) -> int:
        return self.x.shape[2]


def build_geometry(mesh: Mesh, ref: ReferenceElement) -> Geometry:
    """Collocation data plus a Gauss rule with ``p + 2`` points per axis.

    The Gauss rule (on volumes and faces) carries the transport terms:
    nodal collocation aliases variable velocities, loses control of the
    solution at stagnation corners and costs about half an order of
    accuracy when mixed with exactly integrated terms.
    """
    if mesh.d != ref.d:
        raise ValueError(f"mesh is {mesh.d}-D but reference element is {ref.d}-D")
    w = mesh.widths
    d = ref.d
    mass = mesh.volume_jacobian * ref.weights
    deriv = np.stack([(2.0 / w[k]) * ref.derivative(k) for k in range(d)])
    fw = np.stack([mesh.face_jacobian(lf // 2) * ref.face_weights(lf) for lf in range(2 * d)])
    normals = np.zeros((2 * d, d))
    for lf in range(2 * d):
        normals[lf, lf // 2] = -1.0 if lf % 2 == 0 else 1.0

    gx, gw = np.polynomial.legendre.leggauss(ref.p + 2)
    nq1 = len(gx)
    flat = np.arange(nq1**d)
    qi = np.stack([(flat // nq1**a) % nq1 for a in range(d)], axis=1)
    L1 = lagrange_basis(ref.nodes_1d, gx)  # (nq1, n_1d)
    mi = ref.multi_index
    interp = np.prod([L1[qi[:, a]][:, mi[:, a]] for a in range(d)], axis=0)
    qw = mesh.volume_jacobian * np.prod(gw[qi], axis=1)
    xi = gx[qi]
    lo, hi = mesh.element_lower(), mesh.element_upper()
    qx = lo[:, None, :] * (1 - xi[None]) / 2 + hi[:, None, :] * (1 + xi[None]) / 2
    qderiv = np.stack([interp @ deriv[k] for k in range(d)])

    # the same Gauss rule on every face, for the face mass terms
    nfq = nq1 ** (d - 1)
    fflat = np.arange(nfq)
    fqi = np.stack([(fflat // nq1**a) % nq1 for a in range(d - 1)] or [fflat[:0]], axis=1)
    fqi = fqi.reshape(nfq, d - 1)
    fqx = np.empty((len(lo), 2 * d, nfq, d))
    fqw = np.empty((2 * d, nfq))
    finterp = np.empty((2 * d, nfq, ref.face_maps.shape[1]))
    for lf in range(2 * d):
        axis = lf // 2
        tang = [a for a in range(d) if a != axis]
        fmi = mi[ref.face_maps[lf]]
        finterp[lf] = 1.0
        for t, a in enumerate(tang):
            finterp[lf] *= L1[fqi[:, t]][:, fmi[:, a]]
        fqw[lf] = mesh.face_jacobian(axis) * np.prod(gw[fqi], axis=1)
        fxi = np.empty((nfq, d))
        fxi[:, axis] = 1.0 if lf % 2 else -1.0
        for t, a in enumerate(tang):
            fxi[:, a] = gx[fqi[:, t]]
        fqx[:, lf] = lo[:, None, :] * (1 - fxi[None]) / 2 + hi[:, None, :] * (1 + fxi[None]) / 2
    return Geometry(mesh.physical_nodes(ref), mass, deriv, fw, normals, ref.face_maps, w,
                    qx, qw, interp, qderiv, fqx, fqw, finterp)


def _chunks(idx: np.ndarray, size: int):
    for start in range(0, len(idx), size):
        yield idx[start:start + size]


def _as_slice(idx: np.ndarray):
    """Return a slice equivalent to ``idx`` when it is a contiguous run."""
    if len(idx) and idx[-1] - idx[0] == len(idx) - 1 and np.all(np.diff(idx) == 1):
        return slice(int(idx[0]), int(idx[-1]) + 1)
    return idx


@dataclass
class LocalOperator:
    """Local solvers for all elements of a mesh.

    Attributes
    ----------
    trace_coupling : ndarray, shape (n_el, 2d, m, n_face, mt)
        Right-hand-side contribution of trace component ``t`` at face node
        ``j`` of local face ``lf`` to component ``c`` of the face node.
    face_coupling : ndarray, shape (n_el, 2d, n_face, n_face), optional
        Gauss-integrated face mass ``<tau u_hat, v>`` acting on the last
        (scalar) component; replaces that row of ``trace_coupling``.
    inverse : ndarray, shape (n_unique, N, N)
        Inverses of the (condensed) local matrices.
    inverse_index : ndarray, shape (n_el,)
        Which stored inverse each element uses.
    """

    model: object
    scheme: FluxScheme
    geometry: Geometry
    p: int
    dt: Optional[float]
    m: int
    mt: int
    time_mask: np.ndarray
    trace_coupling: np.ndarray = field(repr=False)
    inverse: np.ndarray = field(repr=False)
    inverse_index: np.ndarray = field(repr=False)
    shared: bool = False
    h_tau: float = 1.0
    face_coupling: Optional[np.ndarray] = field(default=None, repr=False)

    # -- assembly ---------------------------------------------------------
    def element_matrices(self, idx, include_mass: bool = True) -> np.ndarray:
        """Full local matrices ``(len(idx), m n_vol, m n_vol)``."""
        idx = np.atleast_1d(np.asarray(idx))
        return _full_matrices(self, idx, include_mass)

    def matrix(self, e: int, include_mass: bool = True) -> np.ndarray:
        return self.element_matrices([e], include_mass)[0]

    # -- application ------------------------------------------------------
    def rhs_from_trace(self, lam: np.ndarray, face_of: np.ndarray, idx: np.ndarray) -> np.ndarray:
        """Trace contributions to the local right-hand sides of ``idx``.

        ``lam`` has shape ``(n_faces, mt, n_face)``; ``face_of`` is the mesh's
        ``elem_faces`` table.
        """
        g = self.geometry
        out = np.zeros((len(idx), self.m, g.n_vol))
        B = self.trace_coupling[idx]
        F = None if self.face_coupling is None else self.face_coupling[idx]
        nodal = self.m - 1 if F is not None else self.m
        for lf in range(2 * g.d):
            lam_f = lam[face_of[idx, lf]]  # (n, mt, n_face)
            fmap = g.face_maps[lf]
            for c in range(nodal):
                acc = np.zeros((len(idx), fmap.size))
                for t in range(self.mt):
                    acc = acc + B[:, lf, c, :, t] * lam_f[:, t, :]
                out[:, c, fmap] += acc
            if F is not None:
                out[:, -1, fmap] += np.einsum("nij,nj->ni", F[:, lf], lam_f[:, 0])
        return out

    def solve(self, rhs: np.ndarray, idx: np.ndarray) -> np.ndarray:
        """Local solves for the elements ``idx`` given full right-hand sides."""
        if isinstance(self.model, ConvectionDiffusion):
            return _convdiff_solve(self, rhs, idx)
        n = len(idx)
        b = rhs.reshape(n, -1, 1)
        inv = self._inverses(idx)
        return np.matmul(inv, b).reshape(rhs.shape)

    def apply(self, q: np.ndarray, include_mass: bool = True) -> np.ndarray:
        """Volume part of the local operator applied to every element."""
        n_el = q.shape[0]
        N = self.m * self.geometry.n_vol
        out = np.empty_like(q)
        size = max(1, _CHUNK_BUDGET // (N * N))
        for chunk in _chunks(np.arange(n_el), size):
            A = self.element_matrices(chunk, include_mass)
            out[chunk] = np.matmul(A, q[chunk].reshape(len(chunk), N, 1)).reshape(len(chunk), self.m, -1)
        return out

    def _inverses(self, idx):
        if self.shared:
            return self.inverse[:1]
        return self.inverse[_as_slice(idx)]

    def mass_rows(self, q: np.ndarray) -> np.ndarray:
        """Mass matrix applied on time-dependent components, zero elsewhere."""
        out = q * self.geometry.mass
        out[:, ~self.time_mask] = 0.0
        return out

    def forcing(self, t: float = 0.0) -> np.ndarray:
        """Volume load ``(f, v)`` at time ``t``, shape ``(n_el, m, n_vol)``.

        The scalar equation of transport and convection-diffusion is
        loaded with the Gauss rule of its advection term; everything else
        uses the nodal rule ``M f``.
        """
        g = self.geometry
        if isinstance(self.model, Transport):
            f = self.model.source(g.quad_x, t)  # (n_el, n_q, 1)
            return np.einsum("qi,q,eqc->eci", g.quad_interp, g.quad_weights, f)
        f = self.model.source(g.x, t)  # (n_el, n_vol, m)
        out = np.moveaxis(f, -1, 1) * g.mass
        if isinstance(self.model, ConvectionDiffusion):
            fq = self.model.source(g.quad_x, t)[..., -1]
            out[:, -1] = np.einsum("qi,q,eq->ei", g.quad_interp, g.quad_weights, fq)
        return out


# ---------------------------------------------------------------------------
# per-model kernels
# ---------------------------------------------------------------------------

def _face_speed(model, geom: Geometry, idx) -> np.ndarray:
    """Outward normal speed ``beta . n`` at face nodes, ``(n, 2d, n_face)``."""
    out = np.empty((len(idx), 2 * geom.d, geom.face_maps.shape[1]))
    for lf in range(2 * geom.d):
        xf = geom.x[idx][:, geom.face_maps[lf]]
        out[:, lf] = np.sum(model.beta(xf) * geom.face_normals[lf], axis=-1)
    return out


def _scalar_tau(op: LocalOperator, s: np.ndarray) -> np.ndarray:
    """Stabilization of the scalar unknown at outward normal speed ``s``."""
    if isinstance(op.model, ConvectionDiffusion):
        return convdiff_tau(op.scheme, op.model, s, op.h_tau, op.p)
    return npc_transport_tau(s) if op.scheme.kind == NPC else np.abs(s)


def _gauss_face_mass(op: LocalOperator, idx, lf: int, coef) -> np.ndarray:
    """``<coef(beta.n) u, v>`` on local face ``lf`` with the Gauss face rule.

    Exact for linear ``beta``; the nodal GLL rule would lose control of the
    solution at stagnation corners.  Shape ``(len(idx), n_face, n_face)``.
    """
    g = op.geometry
    xf = g.face_quad_x[idx, lf]
    sq = np.sum(op.model.beta(xf) * g.face_normals[lf], axis=-1)  # (n, n_fq)
    L = g.face_quad_interp[lf]
    wc = g.face_quad_weights[lf] * coef(sq)
    return np.matmul(L.T[None], wc[..., None] * L[None])


def _transport_block(op: LocalOperator, idx, include_mass: bool) -> np.ndarray:
    """Scalar advection block in split form.

    ``-(u, div(beta v)) + <(s + tau) u, v>`` is rewritten as
    ``1/2 [(div(beta u), v) - (u, div(beta v))] - 1/2 (div(beta) u, v)
    + <(s/2 + tau) u, v>``.  The bracket is antisymmetric under any
    quadrature, so the discrete local energy bound holds whatever rule
    integrates it.
    """
    g, model = op.geometry, op.model
    xq = g.quad_x[idx]
    beta = model.beta(xq)  # (n, n_q, d)
    I = g.quad_interp
    W = g.quad_weights
    div = model.divergence(xq)
    # C = (beta . grad u + div(beta) u) at the Gauss points
    C = div[..., None] * I[None]
    for k in range(g.d):
        C = C + beta[..., k][..., None] * g.quad_deriv[k][None]
    strong = np.matmul(I.T[None], W[:, None] * C)
    A = 0.5 * (strong - np.swapaxes(strong, 1, 2))
    A -= 0.5 * np.matmul(I.T[None], (W * div)[..., None] * I[None])
    diag = np.arange(g.n_vol)
    for lf in range(2 * g.d):
        fmap = g.face_maps[lf]
        A[:, fmap[:, None], fmap[None, :]] += _gauss_face_mass(
            op, idx, lf, lambda sq: 0.5 * sq + _scalar_tau(op, sq))
    if isinstance(model, ConvectionDiffusion):
        A[:, diag, diag] += model.nu * g.mass
    if include_mass and op.dt is not None:
        A[:, diag, diag] += g.mass / op.dt
    return A


def _shallow_water_matrices(op: LocalOperator, idx, include_mass: bool) -> np.ndarray:
    g, model = op.geometry, op.model
    nv = g.n_vol
    n = len(idx)
    A = np.zeros((n, 3 * nv, 3 * nv))
    M = g.mass
    sq = np.sqrt(model.Phi)
    diag = np.arange(nv)
    blk = lambda r, c: (slice(r * nv, (r + 1) * nv), slice(c * nv, (c + 1) * nv))
    for k in range(2):
        DtM = g.deriv[k].T * M[None, :]
        A[(slice(None),) + blk(0, 1 + k)] -= DtM
        A[(slice(None),) + blk(1 + k, 0)] -= model.Phi * DtM
    for lf in range(4):
        fmap = g.face_maps[lf]
        wf = g.face_weights[lf]
        nrm = g.face_normals[lf]
        A[:, fmap, fmap] += wf * sq
        for k in range(2):
            A[:, fmap, (1 + k) * nv + fmap] += wf * nrm[k]
    fc = model.coriolis(g.x[idx])  # (n, nv)
    for c in (1, 2):
        A[:, c * nv + diag, c * nv + diag] += model.gamma * M
    A[:, nv + diag, 2 * nv + diag] -= fc * M
    A[:, 2 * nv + diag, nv + diag] += fc * M
    if include_mass and op.dt is not None:
        for c in range(3):
            A[:, c * nv + diag, c * nv + diag] += M / op.dt
    return A


def _convdiff_constant_blocks(op: LocalOperator):
    """Element-independent blocks ``B_i = D_i^T M`` and ``C_i = -D_i^T M + F_i``."""
    g = op.geometry
    Bs, Cs = [], []
    for i in range(g.d):
        DtM = g.deriv[i].T * g.mass[None, :]
        C = -DtM.copy()
        for lf in range(2 * g.d):
            fmap = g.face_maps[lf]
            C[fmap, fmap] += g.face_weights[lf] * g.face_normals[lf, i]
        Bs.append(DtM)
        Cs.append(C)
    return Bs, Cs


def _convdiff_full(op: LocalOperator, idx, include_mass: bool) -> np.ndarray:
    g, model = op.geometry, op.model
    nv, d = g.n_vol, g.d
    n = len(idx)
    A = np.zeros((n, (d + 1) * nv, (d + 1) * nv))
    Bs, Cs = _convdiff_constant_blocks(op)
    diag = np.arange(nv)
    for i in range(d):
        A[:, i * nv + diag, i * nv + diag] = g.mass / model.kappa
        A[:, i * nv:(i + 1) * nv, d * nv:] = -Bs[i]
        A[:, d * nv:, i * nv:(i + 1) * nv] = Cs[i]
    A[:, d * nv:, d * nv:] = _transport_block(op, idx, include_mass)
    return A


def _convdiff_condensed(op: LocalOperator, idx) -> np.ndarray:
    """Schur complement ``A_uu + kappa sum_i C_i M^-1 B_i`` on ``u``."""
    Bs, Cs = _convdiff_constant_blocks(op)
    Minv = 1.0 / op.geometry.mass
    G = sum(C @ (Minv[:, None] * B) for B, C in zip(Bs, Cs))
    return _transport_block(op, idx, True) + op.model.kappa * G[None]


def _convdiff_solve(op: LocalOperator, rhs, idx):
    g = op.geometry
    d = g.d
    Bs, Cs = _convdiff_constant_blocks(op)
    Minv = 1.0 / g.mass
    kappa = op.model.kappa
    ru = rhs[:, d].copy()
    for i in range(d):
        ru = ru - kappa * np.matmul(Cs[i][None], (Minv * rhs[:, i])[..., None])[..., 0]
    u = np.matmul(op._inverses(idx), ru[..., None])[..., 0]
    out = np.empty_like(rhs)
    out[:, d] = u
    for i in range(d):
        out[:, i] = kappa * Minv * (rhs[:, i] + np.matmul(Bs[i][None], u[..., None])[..., 0])
    return out


def _full_matrices(op: LocalOperator, idx, include_mass: bool) -> np.ndarray:
    model = op.model
    if isinstance(model, Transport):
        return _transport_block(op, idx, include_mass)
    if isinstance(model, ShallowWater):
        return _shallow_water_matrices(op, idx, include_mass)
    return _convdiff_full(op, idx, include_mass)


def _solve_matrices(op: LocalOperator, idx) -> np.ndarray:
    """Matrices whose inverses are stored (condensed for convection-diffusion)."""
    if isinstance(op.model, ConvectionDiffusion):
        return _convdiff_condensed(op, idx)
    return _full_matrices(op, idx, True)


def _trace_coupling(op: LocalOperator) -> np.ndarray:
    g, model = op.geometry, op.model
    n_el, d, nf = g.n_el, g.d, g.face_maps.shape[1]
    # the scalar row is carried by face_coupling
    B = np.zeros((n_el, 2 * d, op.m, nf, op.mt))
    if isinstance(model, Transport):
        return B
    if isinstance(model, ShallowWater):
        sq = np.sqrt(model.Phi)
        for lf in range(4):
            wf = g.face_weights[lf]
            B[:, lf, 0, :, 0] = wf
            for k in range(2):
                B[:, lf, 1 + k, :, 0] = -wf * sq * g.face_normals[lf, k]
        return B
    # convection-diffusion: -<u_hat, w.n> in the flux equations
    for lf in range(2 * d):
        for i in range(d):
            B[:, lf, i, :, 0] = -g.face_weights[lf] * g.face_normals[lf, i]
    return B


def _face_coupling(op: LocalOperator) -> np.ndarray:
    g = op.geometry
    idx = np.arange(g.n_el)
    nf = g.face_maps.shape[1]
    F = np.empty((g.n_el, 2 * g.d, nf, nf))
    for lf in range(2 * g.d):
        F[:, lf] = _gauss_face_mass(op, idx, lf, lambda sq: _scalar_tau(op, sq))
    return F


def assemble_local(model, scheme: FluxScheme, mesh: Mesh, ref: ReferenceElement,
                   dt: Optional[float] = None, geometry: Optional[Geometry] = None) -> LocalOperator:
    """Assemble and invert the local operators of every element.

    Elements whose matrices coincide exactly share one stored inverse.

    Raises
    ------
    ValueError
        For unsupported model/flux pairs, a non-positive ``dt`` or a
        singular local matrix.
    """
    scheme.check_model(model)
    if dt is not None and not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    geom = geometry if geometry is not None else build_geometry(mesh, ref)
    d = geom.d
    m = model.n_components(d)
    mt = 1
    if isinstance(model, ShallowWater):
        mt = 1  # only the phi component of the weighted trace is consumed
    op = LocalOperator(model, scheme, geom, ref.p, dt, m, mt, model.time_components(d),
                       trace_coupling=np.empty(0), inverse=np.empty(0),
                       inverse_index=np.zeros(geom.n_el, dtype=np.intp),
                       h_tau=float(np.min(mesh.widths)))
    op.trace_coupling = _trace_coupling(op)
    if not isinstance(model, ShallowWater):
        op.face_coupling = _face_coupling(op)

    n_el = geom.n_el
    first = _solve_matrices(op, np.array([0]))
    N = first.shape[-1]
    size = max(1, _CHUNK_BUDGET // (N * N))
    shared = all(np.array_equal(_solve_matrices(op, c), np.broadcast_to(first, (len(c), N, N)))
                 for c in _chunks(np.arange(n_el), size))
    try:
        if shared:
            inv = np.linalg.inv(first)
            index = np.zeros(n_el, dtype=np.intp)
        else:
            inv = np.empty((n_el, N, N))
            for c in _chunks(np.arange(n_el), size):
                inv[c] = np.linalg.inv(_solve_matrices(op, c))
            index = np.arange(n_el)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular local operator; check model coefficients and mesh") from exc
    if not np.all(np.isfinite(inv)):
        raise ValueError("local operator inverse is not finite")
    op.inverse, op.inverse_index, op.shared = inv, index, shared
    return op
