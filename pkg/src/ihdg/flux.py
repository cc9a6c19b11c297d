"""Stabilization parameters shared by the local solver and the trace update."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import ConvectionDiffusion, ShallowWater, Transport, flux_jacobian

UPWIND = "upwind"
NPC = "npc"
ELLIPTIC_TAU = "elliptic-tau"
KINDS = (UPWIND, NPC, ELLIPTIC_TAU)


@dataclass(frozen=True)
class FluxScheme:
    """Choice of numerical flux.

    Parameters
    ----------
    kind : {"upwind", "npc", "elliptic-tau"}
    gamma_stab : float
        Multiplier in ``tau = gamma_stab (p+1)(p+2)/h`` for ``elliptic-tau``.
    npc_length : float
        Length scale ``l`` in the convection-diffusion NPC choice
        ``tau = kappa/l + max(-beta.n, 0)``.
    """

    kind: str = UPWIND
    gamma_stab: float = 1.0
    npc_length: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown flux {self.kind!r}; expected one of {KINDS}")
        if self.gamma_stab <= 0:
            raise ValueError("gamma_stab must be positive")
        if self.npc_length <= 0:
            raise ValueError("npc_length must be positive")

    def check_model(self, model) -> None:
        if isinstance(model, ShallowWater) and self.kind != UPWIND:
            raise ValueError(f"flux {self.kind!r} is not available for shallow water")
        if isinstance(model, Transport) and self.kind == ELLIPTIC_TAU:
            raise ValueError("elliptic-tau applies to convection-diffusion only")


def npc_transport_tau(s: np.ndarray) -> np.ndarray:
    """``|s| (1 + sgn s)/2 - s`` with ``sgn 0 = 0``; equals ``max(-s, 0)``."""
    s = np.asarray(s, dtype=float)
    return np.abs(s) * (1 + np.sign(s)) / 2 - s


def convdiff_tau(scheme: FluxScheme, model: ConvectionDiffusion, s: np.ndarray,
                 h: float, p: int) -> np.ndarray:
    """One-sided stabilization ``tau`` for outward normal speed ``s = beta.n``."""
    s = np.asarray(s, dtype=float)
    if scheme.kind == UPWIND:
        return 0.5 * (np.sqrt(s**2 + 4) - s)
    if scheme.kind == NPC:
        return model.kappa / scheme.npc_length + np.maximum(-s, 0.0)
    return np.full(s.shape, scheme.gamma_stab * (p + 1) * (p + 2) / h)


def stabilization(scheme: FluxScheme, model, x, n, h: float = 1.0, p: int = 1) -> np.ndarray:
    """Stabilization seen from the side with outward normal ``n``.

    Returns ``|A|`` (upwind, shape ``(..., m, m)``) for hyperbolic models and
    the scalar ``tau`` (shape ``(...)``) for NPC transport and for every
    convection-diffusion scheme.
    """
    scheme.check_model(model)
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    if not np.allclose(np.linalg.norm(n, axis=-1), 1.0, atol=1e-12):
        raise ValueError("normal vectors must have unit length")
    if isinstance(model, ConvectionDiffusion):
        s = np.sum(model.beta(x) * n, axis=-1)
        return convdiff_tau(scheme, model, s, h, p)
    if scheme.kind == NPC:
        s = np.sum(model.beta(x) * n, axis=-1)
        return npc_transport_tau(s)
    return flux_jacobian(model, x, n)[1]
