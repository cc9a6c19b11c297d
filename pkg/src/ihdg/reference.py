"""Gauss-Lobatto-Legendre nodal reference elements on [-1, 1]^d.

Nodes are collocated with the quadrature points, so the mass matrix is
diagonal and every face node is also a volume node.  Volume nodes are stored
in lexicographic order with the first axis running fastest.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np


def legendre(p: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(P_p(x), P_{p-1}(x))`` from the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), x.copy()
    if p == 0:
        return prev, np.zeros_like(x)
    for k in range(2, p + 1):
        prev, cur = cur, ((2 * k - 1) * x * cur - (k - 1) * prev) / k
    return cur, prev


def gll_nodes(p: int, tol: float = 1e-14, max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """GLL nodes and weights for polynomial order ``p``.

    The interior nodes are the roots of ``(1 - x^2) P_p'(x)``, found by Newton
    iteration started from the Chebyshev-Gauss-Lobatto points.

    Returns
    -------
    nodes, weights : ndarray, shape (p + 1,)
        Ascending nodes with exact endpoints, and the matching weights.
    """
    if p < 1:
        raise ValueError(f"GLL rule needs p >= 1, got {p}")
    x = -np.cos(np.pi * np.arange(p + 1) / p)
    for _ in range(max_iter):
        pn, pm = legendre(p, x)
        step = (x * pn - pm) / ((p + 1) * pn)
        x = x - step
        if np.max(np.abs(step)) < tol:
            break
    else:
        raise RuntimeError(f"GLL Newton iteration did not converge for p={p}")
    x[0], x[-1] = -1.0, 1.0
    # enforce exact symmetry about the origin
    x = 0.5 * (x - x[::-1])
    if p % 2 == 0:
        x[p // 2] = 0.0
    pn, _ = legendre(p, x)
    w = 2.0 / (p * (p + 1) * pn**2)
    return x, w


def differentiation_matrix(x: np.ndarray) -> np.ndarray:
    """Lagrange differentiation matrix on the nodes ``x``.

    Built from barycentric weights; the diagonal is the negative off-diagonal
    row sum so constants are differentiated to exactly zero.
    """
    x = np.asarray(x, dtype=float)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    bary = 1.0 / np.prod(diff, axis=1)
    D = (bary[None, :] / bary[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def lagrange_basis(x_nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate all Lagrange cardinal functions of ``x_nodes`` at points ``x``.

    Returns an array of shape ``(len(x), len(x_nodes))``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = len(x_nodes)
    out = np.ones((len(x), n))
    for j in range(n):
        for k in range(n):
            if k != j:
                out[:, j] *= (x - x_nodes[k]) / (x_nodes[j] - x_nodes[k])
    return out


@dataclass(frozen=True)
class ReferenceElement:
    """Tensor-product GLL element of order ``p`` in ``d`` dimensions."""

    p: int
    d: int
    nodes_1d: np.ndarray = field(repr=False)
    weights_1d: np.ndarray = field(repr=False)
    diff_1d: np.ndarray = field(repr=False)
    face_maps: np.ndarray = field(repr=False)

    @property
    def n_1d(self) -> int:
        return self.p + 1

    @property
    def n_vol(self) -> int:
        return (self.p + 1) ** self.d

    @property
    def n_face(self) -> int:
        return (self.p + 1) ** (self.d - 1)

    @property
    def n_faces(self) -> int:
        return 2 * self.d

    @property
    def multi_index(self) -> np.ndarray:
        """Per-axis 1D index of every volume node, shape ``(n_vol, d)``."""
        flat = np.arange(self.n_vol)
        return np.stack([(flat // self.n_1d**a) % self.n_1d for a in range(self.d)], axis=1)

    @property
    def nodes(self) -> np.ndarray:
        """Reference coordinates of the volume nodes, shape ``(n_vol, d)``."""
        return self.nodes_1d[self.multi_index]

    @property
    def weights(self) -> np.ndarray:
        """Tensor-product quadrature weights, shape ``(n_vol,)``."""
        return np.prod(self.weights_1d[self.multi_index], axis=1)

    def face_weights(self, face: int) -> np.ndarray:
        """Quadrature weights on reference face ``face`` in face-node order."""
        axis = face // 2
        others = [a for a in range(self.d) if a != axis]
        mi = self.multi_index[self.face_maps[face]]
        if not others:
            return np.ones(1)
        return np.prod(self.weights_1d[mi[:, others]], axis=1)

    def derivative(self, axis: int) -> np.ndarray:
        """Volume differentiation matrix along reference axis ``axis``."""
        eye = np.eye(self.n_1d)
        mats = [self.diff_1d if a == axis else eye for a in range(self.d)]
        # first axis fastest -> it is the innermost Kronecker factor
        return reduce(np.kron, mats[::-1])

    def restrict(self, values: np.ndarray, face: int) -> np.ndarray:
        """Volume nodal values (last axis) restricted to face ``face``."""
        return values[..., self.face_maps[face]]

    def lift(self, face_values: np.ndarray, face: int) -> np.ndarray:
        """Scatter face nodal values into an otherwise zero volume vector."""
        out = np.zeros(face_values.shape[:-1] + (self.n_vol,), dtype=face_values.dtype)
        out[..., self.face_maps[face]] = face_values
        return out


def build_reference(p: int, d: int) -> ReferenceElement:
    """Build the order-``p`` GLL reference element in dimension ``d``."""
    if not isinstance(p, (int, np.integer)) or not 1 <= p <= 16:
        raise ValueError(f"polynomial order must be an integer in [1, 16], got {p!r}")
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d!r}")
    x, w = gll_nodes(int(p))
    D = differentiation_matrix(x)
    n1 = p + 1
    flat = np.arange(n1**d)
    mi = np.stack([(flat // n1**a) % n1 for a in range(d)], axis=1)
    maps = []
    for axis in range(d):
        for side in (0, 1):
            target = 0 if side == 0 else p
            maps.append(flat[mi[:, axis] == target])
    face_maps = np.array(maps, dtype=np.intp)
    for arr in (x, w, D, face_maps):
        arr.setflags(write=False)
    return ReferenceElement(int(p), int(d), x, w, D, face_maps)
