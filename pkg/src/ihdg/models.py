"""Linear PDE systems in first-order form and the built-in experiment problems.

Every model is written as ``sum_k d_k(A_k q) + C q = f`` (plus ``dq/dt`` on
its time-dependent components).  Coefficient fields are plain callables of
points ``x`` with shape ``(..., d)``; time-dependent data also take ``t``.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

PointFn = Callable[[np.ndarray], np.ndarray]
SpaceTimeFn = Callable[[np.ndarray, float], np.ndarray]


def _zero_scalar(x, t=0.0):
    return np.zeros(np.shape(x)[:-1])


@dataclass(frozen=True)
class Transport:
    """Scalar transport ``beta . grad u = f`` with inflow data ``g``."""

    beta: PointFn
    div_beta: Optional[PointFn] = None
    forcing: Optional[SpaceTimeFn] = None
    inflow: Optional[SpaceTimeFn] = None

    name = "transport"

    def n_components(self, d: int) -> int:
        return 1

    def trace_components(self, d: int) -> int:
        return 1

    def divergence(self, x):
        if self.div_beta is None:
            return np.zeros(np.shape(x)[:-1])
        return np.asarray(self.div_beta(x), dtype=float)

    def source(self, x, t=0.0):
        f = _zero_scalar(x) if self.forcing is None else self.forcing(x, t)
        return np.asarray(f, dtype=float)[..., None]

    def boundary_value(self, x, t=0.0):
        g = _zero_scalar(x) if self.inflow is None else self.inflow(x, t)
        return np.asarray(g, dtype=float)[..., None]

    def time_components(self, d: int) -> np.ndarray:
        return np.array([True])

    def monitored_components(self, d: int) -> np.ndarray:
        return np.array([True])

    def well_posedness_alpha(self, x) -> float:
        """Lower bound estimate of ``-div beta`` over the sample points."""
        return float(np.min(-self.divergence(x)))


@dataclass(frozen=True)
class ShallowWater:
    """Linearized rotating shallow water in ``(phi, Phi u, Phi v)`` variables."""

    Phi: float = 1.0
    f0: float = 0.0
    beta_cor: float = 0.0
    y_m: float = 0.0
    gamma: float = 0.0
    tau_wind: tuple[float, float] = (0.0, 0.0)
    rho: float = 1.0
    forcing: Optional[SpaceTimeFn] = None

    name = "shallow-water"

    def __post_init__(self):
        if not self.Phi > 0:
            raise ValueError(f"mean geopotential Phi must be positive, got {self.Phi}")
        if self.gamma < 0:
            raise ValueError(f"bottom friction must be non-negative, got {self.gamma}")

    def n_components(self, d: int) -> int:
        if d != 2:
            raise ValueError("shallow water is defined in 2D only")
        return 3

    def trace_components(self, d: int) -> int:
        return 3

    def coriolis(self, x):
        x = np.asarray(x, dtype=float)
        return self.f0 + self.beta_cor * (x[..., 1] - self.y_m)

    def source(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (3,))
        out[..., 1] = self.tau_wind[0] / self.rho
        out[..., 2] = self.tau_wind[1] / self.rho
        if self.forcing is not None:
            out = out + self.forcing(x, t)
        return out

    def time_components(self, d: int) -> np.ndarray:
        return np.ones(3, dtype=bool)

    def monitored_components(self, d: int) -> np.ndarray:
        return np.ones(3, dtype=bool)


@dataclass(frozen=True)
class ConvectionDiffusion:
    """``sigma/kappa + grad u = 0``, ``div sigma + beta . grad u + nu u = f``.

    Unknowns are ordered ``(sigma_1, ..., sigma_d, u)``.  ``neumann`` marks
    boundary sides ``(axis, side)`` carrying a zero diffusive flux; all other
    boundary faces take Dirichlet data ``dirichlet(x, t)``.
    """

    kappa: float
    beta: PointFn
    div_beta: Optional[PointFn] = None
    nu: float = 0.0
    forcing: Optional[SpaceTimeFn] = None
    dirichlet: Optional[SpaceTimeFn] = None
    neumann: Callable[[int, int], bool] = field(default=lambda axis, side: False)

    name = "convection-diffusion"

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"diffusion coefficient must be positive, got {self.kappa}")
        if self.nu < 0:
            raise ValueError(f"reaction coefficient must be non-negative, got {self.nu}")

    def n_components(self, d: int) -> int:
        return d + 1

    def trace_components(self, d: int) -> int:
        return 1

    def divergence(self, x):
        if self.div_beta is None:
            return np.zeros(np.shape(x)[:-1])
        return np.asarray(self.div_beta(x), dtype=float)

    def source(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        d = x.shape[-1]
        out = np.zeros(x.shape[:-1] + (d + 1,))
        if self.forcing is not None:
            out[..., d] = self.forcing(x, t)
        return out

    def boundary_value(self, x, t=0.0):
        g = _zero_scalar(x) if self.dirichlet is None else self.dirichlet(x, t)
        return np.asarray(g, dtype=float)[..., None]

    def time_components(self, d: int) -> np.ndarray:
        mask = np.zeros(d + 1, dtype=bool)
        mask[d] = True
        return mask

    def monitored_components(self, d: int) -> np.ndarray:
        return self.time_components(d)

    def coercivity(self, x) -> float:
        """Sampled estimate of ``lambda = min(nu - div beta / 2)``."""
        return float(np.min(self.nu - self.divergence(x) / 2))


def flux_jacobian(model, x, n) -> tuple[np.ndarray, np.ndarray]:
    """Normal flux Jacobian ``A(n) = sum_k A_k n_k`` and ``|A| = R|S|R^-1``.

    Closed-form eigendecompositions are used for every model.  ``x`` and
    ``n`` broadcast against each other with trailing axis ``d``; the result
    has shape ``(..., m, m)``.
    """
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    if not np.allclose(np.linalg.norm(n, axis=-1), 1.0, atol=1e-12):
        raise ValueError("normal vectors must have unit length")
    d = n.shape[-1]
    if isinstance(model, Transport):
        s = np.sum(model.beta(x) * n, axis=-1)
        return s[..., None, None], np.abs(s)[..., None, None]
    if isinstance(model, ShallowWater):
        shape = np.broadcast_shapes(x.shape, n.shape)[:-1]
        n = np.broadcast_to(n, shape + (d,))
        A = np.zeros(shape + (3, 3))
        A[..., 0, 1:] = n
        A[..., 1:, 0] = model.Phi * n
        c = np.sqrt(model.Phi)
        absA = np.zeros(shape + (3, 3))
        absA[..., 0, 0] = c
        absA[..., 1:, 1:] = c * n[..., :, None] * n[..., None, :]
        return A, absA
    if isinstance(model, ConvectionDiffusion):
        # sigma rows carry u n_i, the u row carries sigma . n + (beta . n) u
        s = np.sum(model.beta(x) * n, axis=-1)
        shape = s.shape
        n = np.broadcast_to(n, shape + (d,))
        A = np.zeros(shape + (d + 1, d + 1))
        A[..., :d, d] = n
        A[..., d, :d] = n
        A[..., d, d] = s
        # eigenvalues (s +- sqrt(s^2 + 4)) / 2 on span{(n, .), e_u}; 0 elsewhere
        root = np.sqrt(s**2 + 4)
        lam = np.stack([(s + root) / 2, (s - root) / 2], axis=-1)
        absA = np.zeros_like(A)
        for k in range(2):
            # eigenvector (n, lam_k) up to scaling; normalise in the 2D subspace
            vec = np.concatenate([n, lam[..., k:k + 1]], axis=-1)
            vec = vec / np.sqrt(1 + lam[..., k:k + 1] ** 2)
            absA += np.abs(lam[..., k])[..., None, None] * vec[..., :, None] * vec[..., None, :]
        return A, absA
    raise TypeError(f"unsupported model {type(model).__name__}")


def eigen_decomposition(model, x, n) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form ``(R, eigenvalues)`` with ``A(n) = R diag(S) R^-1``."""
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    d = n.shape[-1]
    if isinstance(model, Transport):
        s = np.sum(model.beta(x) * n, axis=-1)
        return np.ones(s.shape + (1, 1)), s[..., None]
    if isinstance(model, ShallowWater):
        shape = np.broadcast_shapes(x.shape, n.shape)[:-1]
        n = np.broadcast_to(n, shape + (2,))
        c = np.sqrt(model.Phi)
        t = np.stack([-n[..., 1], n[..., 0]], axis=-1)
        R = np.zeros(shape + (3, 3))
        R[..., 0, 0], R[..., 0, 2] = -c, c
        R[..., 1:, 0] = model.Phi * n
        R[..., 1:, 1] = t
        R[..., 1:, 2] = model.Phi * n
        lam = np.broadcast_to(np.array([-c, 0.0, c]), shape + (3,))
        return R, lam
    if isinstance(model, ConvectionDiffusion):
        s = np.sum(model.beta(x) * n, axis=-1)
        shape = s.shape
        n = np.broadcast_to(n, shape + (d,))
        root = np.sqrt(s**2 + 4)
        lam = np.zeros(shape + (d + 1,))
        lam[..., 0] = (s + root) / 2
        lam[..., 1] = (s - root) / 2
        R = np.zeros(shape + (d + 1, d + 1))
        for k in range(2):
            R[..., :d, k] = n
            R[..., d, k] = lam[..., k]
        # remaining eigenvectors: sigma directions orthogonal to n, eigenvalue 0
        basis = np.eye(d)
        col = 2
        for b in range(d):
            if col > d:
                break
            v = np.broadcast_to(basis[b], shape + (d,)).copy()
            for j in range(2, col):
                w = R[..., :d, j]
                v -= np.sum(v * w, axis=-1, keepdims=True) * w / np.sum(w * w, axis=-1, keepdims=True)
            v -= np.sum(v * n, axis=-1, keepdims=True) * n
            norm = np.linalg.norm(v, axis=-1, keepdims=True)
            if np.all(norm > 1e-8):
                R[..., :d, col] = v / norm
                col += 1
        return R, lam
    raise TypeError(f"unsupported model {type(model).__name__}")


# ---------------------------------------------------------------------------
# Built-in experiments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Problem:
    """A model on a box together with its reference data."""

    name: str
    model: object
    bounds: tuple[tuple[float, float], ...]
    exact: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    initial: Optional[Callable[[np.ndarray], np.ndarray]] = None
    injection_period: Optional[float] = None

    @property
    def d(self) -> int:
        return len(self.bounds)


def _sin_profile(x):
    """``sin(pi x) cos(pi y) sin(pi z) / pi`` and its gradient and Laplacian."""
    X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
    sx, cx = np.sin(np.pi * X), np.cos(np.pi * X)
    sy, cy = np.sin(np.pi * Y), np.cos(np.pi * Y)
    sz, cz = np.sin(np.pi * Z), np.cos(np.pi * Z)
    u = sx * cy * sz / np.pi
    grad = np.stack([cx * cy * sz, -sx * sy * sz, sx * cy * cz], axis=-1)
    lap = -3 * np.pi**2 * u
    return u, grad, lap


def discontinuous_inflow(x, t=0.0):
    """Inflow data of the 2D discontinuous transport case.

    Defined on ``x = 0`` and ``y = 0``; other boundary points are outflow
    and never read, so they get zero.
    """
    x = np.asarray(x, dtype=float)
    X, Y = x[..., 0], x[..., 1]
    tol = 1e-12
    g = np.zeros(X.shape)
    bottom = np.abs(Y) < tol
    g = np.where(bottom & (X <= 1.0), np.sin(np.pi * X) ** 6, g)
    g = np.where(np.abs(X) < tol, 1.0, g)
    return g


def transport2d_discont() -> Problem:
    def beta(x):
        x = np.asarray(x, dtype=float)
        return np.stack([1 + np.sin(np.pi * x[..., 1] / 2), np.full(x.shape[:-1], 2.0)], axis=-1)

    model = Transport(beta=beta, div_beta=lambda x: np.zeros(np.shape(x)[:-1]),
                      inflow=discontinuous_inflow)
    return Problem("transport2d-discont", model, ((0.0, 2.0), (0.0, 2.0)))


def transport3d_smooth() -> Problem:
    def beta(x):
        x = np.asarray(x, dtype=float)
        return np.stack([x[..., 2], x[..., 0], x[..., 1]], axis=-1)

    def exact(x, t=0.0):
        return _sin_profile(np.asarray(x, dtype=float))[0][..., None]

    def forcing(x, t=0.0):
        x = np.asarray(x, dtype=float)
        _, grad, _ = _sin_profile(x)
        return np.sum(beta(x) * grad, axis=-1)

    model = Transport(beta=beta, div_beta=lambda x: np.zeros(np.shape(x)[:-1]),
                      forcing=forcing, inflow=lambda x, t=0.0: exact(x)[..., 0])
    return Problem("transport3d-smooth", model, ((0.0, 1.0),) * 3, exact=exact)


def standing_wave_exact(x, t=0.0, Phi=1.0):
    """Standing-wave mode in the stored variables ``(phi, Phi u, Phi v)``."""
    x = np.asarray(x, dtype=float)
    X, Y = x[..., 0], x[..., 1]
    omega = np.pi * np.sqrt(2 * Phi)
    w = omega * t
    amp = np.pi / omega
    phi = np.cos(np.pi * X) * np.cos(np.pi * Y) * np.cos(w)
    u = amp * np.sin(np.pi * X) * np.cos(np.pi * Y) * np.sin(w)
    v = amp * np.cos(np.pi * X) * np.sin(np.pi * Y) * np.sin(w)
    return np.stack([phi, Phi * u, Phi * v], axis=-1)


def shallow_standing_wave(Phi: float = 1.0) -> Problem:
    model = ShallowWater(Phi=Phi)
    exact = functools.partial(standing_wave_exact, Phi=Phi)
    return Problem("shallow-standing-wave", model, ((0.0, 1.0), (0.0, 1.0)),
                   exact=exact, initial=lambda x: exact(x, 0.0))


def _linear_beta(x):
    x = np.asarray(x, dtype=float)
    return np.stack([1 + x[..., 2], 1 + x[..., 0], 1 + x[..., 1]], axis=-1)


def _smooth_convdiff(name, kappa, nu, beta, div_beta) -> Problem:
    def exact(x, t=0.0):
        u, grad, _ = _sin_profile(np.asarray(x, dtype=float))
        return np.concatenate([-kappa * grad, u[..., None]], axis=-1)

    def forcing(x, t=0.0):
        x = np.asarray(x, dtype=float)
        u, grad, lap = _sin_profile(x)
        return -kappa * lap + np.sum(beta(x) * grad, axis=-1) + nu * u

    model = ConvectionDiffusion(kappa=kappa, beta=beta, div_beta=div_beta, nu=nu,
                                forcing=forcing, dirichlet=lambda x, t=0.0: exact(x)[..., -1])
    return Problem(name, model, ((0.0, 1.0),) * 3, exact=exact)


def convdiff3d(kappa: float = 1e-3, nu: float = 1.0) -> Problem:
    return _smooth_convdiff("convdiff3d", kappa, nu, _linear_beta,
                            lambda x: np.zeros(np.shape(x)[:-1]))


def elliptic3d(nu: float = 1.0) -> Problem:
    zero = lambda x: np.zeros(np.shape(x)[:-1] + (3,))
    return _smooth_convdiff("elliptic3d", 1.0, nu, zero, lambda x: np.zeros(np.shape(x)[:-1]))


KOVASZNAY_RE = 100.0


def kovasznay_beta(x, Re: float = KOVASZNAY_RE):
    x = np.asarray(x, dtype=float)
    lam = Re / 2 - np.sqrt(Re**2 / 4 + 4 * np.pi**2)
    ex = np.exp(lam * x[..., 0])
    y = x[..., 1]
    return np.stack([1 - ex * np.cos(2 * np.pi * y),
                     lam / (2 * np.pi) * ex * np.sin(2 * np.pi * y),
                     np.zeros(x.shape[:-1])], axis=-1)


_BUMPS = ((1.0, 0.0, 0.0), (1.0, 0.5, 0.0), (1.0, -0.5, 0.0))


def contaminant_profile(x, literal: bool = False):
    """Injected concentration: three bumps of width 0.5.

    ``literal=True`` uses the positive exponent as printed in the source
    description instead of Gaussian bumps.
    """
    x = np.asarray(x, dtype=float)
    sign = 1.0 if literal else -1.0
    total = np.zeros(x.shape[:-1])
    for c in _BUMPS:
        r2 = sum((x[..., k] - c[k]) ** 2 for k in range(3))
        total = total + np.exp(sign * r2 / 0.5**2)
    return total


def contaminant_gradient(x, literal: bool = False):
    x = np.asarray(x, dtype=float)
    sign = 1.0 if literal else -1.0
    grad = np.zeros(x.shape)
    for c in _BUMPS:
        r2 = sum((x[..., k] - c[k]) ** 2 for k in range(3))
        g = np.exp(sign * r2 / 0.5**2)
        for k in range(3):
            grad[..., k] += g * sign * 2 * (x[..., k] - c[k]) / 0.5**2
    return grad


def contaminant(kappa: float = 0.01, literal: bool = False) -> Problem:
    def initial(x):
        x = np.asarray(x, dtype=float)
        sigma = -kappa * contaminant_gradient(x, literal)
        return np.concatenate([sigma, contaminant_profile(x, literal)[..., None]], axis=-1)

    model = ConvectionDiffusion(
        kappa=kappa, beta=kovasznay_beta, div_beta=lambda x: np.zeros(np.shape(x)[:-1]),
        nu=0.0, neumann=_contaminant_neumann)
    return Problem("contaminant", model, ((0.0, 5.0), (-1.25, 1.25), (-1.25, 1.25)),
                   initial=initial, injection_period=1.0)


def _contaminant_neumann(axis: int, side: int) -> bool:
    # Dirichlet u = 0 on the x = 0 face only
    return not (axis == 0 and side == 0)


EXPERIMENTS = {
    "transport2d-discont": transport2d_discont,
    "transport3d-smooth": transport3d_smooth,
    "shallow-standing-wave": shallow_standing_wave,
    "convdiff3d": convdiff3d,
    "elliptic3d": elliptic3d,
    "contaminant": contaminant,
}


def evaluate_exact(experiment: str, x, t: float = 0.0, **params) -> np.ndarray:
    """Exact (or prescribed) values of a built-in experiment at points ``x``.

    The discontinuous 2D transport case has no closed-form interior solution;
    only its boundary data may be queried.  For the contaminant case the
    injected profile ``u0`` is returned.
    """
    x = np.asarray(x, dtype=float)
    if experiment not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {experiment!r}")
    if experiment == "transport2d-discont":
        lo, hi = 0.0, 2.0
        on_boundary = np.any((np.abs(x - lo) < 1e-12) | (np.abs(x - hi) < 1e-12), axis=-1)
        if not np.all(on_boundary):
            raise ValueError("transport2d-discont has no closed-form interior solution")
        return discontinuous_inflow(x)[..., None]
    if experiment == "contaminant":
        return contaminant_profile(x, params.get("literal", False))[..., None]
    problem = EXPERIMENTS[experiment](**params)
    return problem.exact(x, t)
