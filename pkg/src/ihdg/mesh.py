"""Structured box meshes of quads/hexes with face connectivity."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

INFLOW = "inflow"
OUTFLOW = "outflow"
CHARACTERISTIC = "characteristic"


@dataclass(frozen=True)
class Mesh:
    """Axis-aligned box split into ``prod(cells)`` congruent elements.

    Elements are numbered lexicographically with the first axis fastest.
    Interior faces are stored once, oriented so that the minus element is the
    one on the low side and the stored normal is ``+e_axis``.  Boundary faces
    carry ``plus_elem == -1`` and the outward normal of their only element.

    Local face ``2*axis + side`` of an element is the face normal to ``axis``
    on its low (``side=0``) or high (``side=1``) end, matching
    :attr:`ReferenceElement.face_maps`.
    """

    bounds: tuple[tuple[float, float], ...]
    cells: tuple[int, ...]
    edges: tuple[np.ndarray, ...] = field(repr=False)
    minus_elem: np.ndarray = field(repr=False)
    minus_face: np.ndarray = field(repr=False)
    plus_elem: np.ndarray = field(repr=False)
    plus_face: np.ndarray = field(repr=False)
    normals: np.ndarray = field(repr=False)
    face_axis: np.ndarray = field(repr=False)
    elem_faces: np.ndarray = field(repr=False)

    @property
    def d(self) -> int:
        return len(self.cells)

    @property
    def n_elements(self) -> int:
        return int(np.prod(self.cells))

    @property
    def n_faces(self) -> int:
        return len(self.minus_elem)

    @property
    def widths(self) -> np.ndarray:
        return np.array([(b - a) / n for (a, b), n in zip(self.bounds, self.cells)])

    @property
    def h(self) -> float:
        """Largest element diameter."""
        return float(np.sqrt(np.sum(self.widths**2)))

    @property
    def volume_jacobian(self) -> float:
        return float(np.prod(self.widths / 2))

    def face_jacobian(self, axis: int) -> float:
        w = self.widths / 2
        return float(np.prod(np.delete(w, axis)))

    @property
    def area_factors(self) -> np.ndarray:
        return np.array([self.face_jacobian(a) for a in self.face_axis])

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(self.plus_elem >= 0)

    @property
    def boundary(self) -> np.ndarray:
        return np.flatnonzero(self.plus_elem < 0)

    def boundary_tag(self, face: int) -> tuple[int, int] | None:
        """``(axis, side)`` of the domain boundary a face lies on, or None."""
        if self.plus_elem[face] >= 0:
            return None
        lf = int(self.minus_face[face])
        return lf // 2, lf % 2

    def element_index(self, e: np.ndarray | int) -> np.ndarray:
        """Per-axis cell index of element(s) ``e``."""
        e = np.asarray(e)
        out, stride = [], 1
        for n in self.cells:
            out.append((e // stride) % n)
            stride *= n
        return np.stack(out, axis=-1)

    def element_lower(self) -> np.ndarray:
        idx = self.element_index(np.arange(self.n_elements))
        return np.stack([self.edges[a][idx[:, a]] for a in range(self.d)], axis=1)

    def element_upper(self) -> np.ndarray:
        idx = self.element_index(np.arange(self.n_elements))
        return np.stack([self.edges[a][idx[:, a] + 1] for a in range(self.d)], axis=1)

    def physical_nodes(self, ref) -> np.ndarray:
        """Physical coordinates of all volume nodes, shape ``(n_el, n_vol, d)``.

        The affine map is written as a convex combination of the cell edges so
        that nodes shared by neighbouring elements coincide bit for bit.
        """
        lo, hi = self.element_lower(), self.element_upper()
        xi = ref.nodes
        return lo[:, None, :] * (1 - xi[None]) / 2 + hi[:, None, :] * (1 + xi[None]) / 2

    def face_nodes(self, ref) -> np.ndarray:
        """Physical coordinates of face nodes seen from the minus side."""
        x = self.physical_nodes(ref)
        idx = ref.face_maps[self.minus_face]
        return x[self.minus_elem[:, None], idx]

    def total_boundary_measure(self) -> float:
        """Sum over elements of their surface measure."""
        w = self.widths
        per_elem = sum(2 * np.prod(np.delete(w, a)) for a in range(self.d))
        return float(self.n_elements * per_elem)


def build_box(bounds: Sequence[Sequence[float]], cells: Sequence[int] | int) -> Mesh:
    """Uniform structured mesh of the box ``bounds`` with ``cells`` per axis.

    ``cells`` may be a single integer, applied to every axis.
    """
    bounds = tuple((float(a), float(b)) for a, b in bounds)
    d = len(bounds)
    if d not in (1, 2, 3):
        raise ValueError(f"box must have 1-3 axes, got {d}")
    if isinstance(cells, (int, np.integer)):
        cells = (int(cells),) * d
    cells = tuple(int(c) for c in cells)
    if len(cells) != d:
        raise ValueError(f"{len(cells)} cell counts given for a {d}-D box")
    if any(c <= 0 for c in cells):
        raise ValueError(f"cell counts must be positive, got {cells}")
    if any(b <= a for a, b in bounds):
        raise ValueError(f"box widths must be positive, got {bounds}")

    edges = tuple(np.linspace(a, b, n + 1) for (a, b), n in zip(bounds, cells))
    for e in edges:
        e.setflags(write=False)
    n_el = int(np.prod(cells))
    strides = np.cumprod((1,) + cells[:-1])
    idx = np.stack([(np.arange(n_el) // strides[a]) % cells[a] for a in range(d)], axis=1)

    minus_e, minus_f, plus_e, plus_f, normals, axes = [], [], [], [], [], []
    elem_faces = np.full((n_el, 2 * d), -1, dtype=np.intp)
    count = 0
    for axis in range(d):
        n = np.zeros(d)
        n[axis] = 1.0
        # low boundary, interior faces, high boundary along this axis
        lo = np.flatnonzero(idx[:, axis] == 0)
        for e in lo:
            minus_e.append(e); minus_f.append(2 * axis); plus_e.append(-1); plus_f.append(-1)
            normals.append(-n); axes.append(axis)
            elem_faces[e, 2 * axis] = count
            count += 1
        left = np.flatnonzero(idx[:, axis] < cells[axis] - 1)
        for e in left:
            r = e + strides[axis]
            minus_e.append(e); minus_f.append(2 * axis + 1); plus_e.append(r); plus_f.append(2 * axis)
            normals.append(n.copy()); axes.append(axis)
            elem_faces[e, 2 * axis + 1] = count
            elem_faces[r, 2 * axis] = count
            count += 1
        hi = np.flatnonzero(idx[:, axis] == cells[axis] - 1)
        for e in hi:
            minus_e.append(e); minus_f.append(2 * axis + 1); plus_e.append(-1); plus_f.append(-1)
            normals.append(n.copy()); axes.append(axis)
            elem_faces[e, 2 * axis + 1] = count
            count += 1

    arrays = [np.array(a, dtype=np.intp) for a in (minus_e, minus_f, plus_e, plus_f)]
    normals = np.array(normals, dtype=float)
    axes = np.array(axes, dtype=np.intp)
    for a in arrays + [normals, axes, elem_faces]:
        a.setflags(write=False)
    return Mesh(bounds, cells, edges, *arrays, normals, axes, elem_faces)


def classify_face(beta_dot_n: np.ndarray) -> str:
    """Label a face from the sign of ``beta . n^-`` at its trace nodes.

    Returns ``"inflow"`` when ``beta . n <= 0`` everywhere, ``"outflow"``
    when ``>= 0`` everywhere, otherwise ``"characteristic"``.  A face with
    ``beta . n == 0`` at every node satisfies both and is reported as inflow.
    """
    s = np.asarray(beta_dot_n)
    if np.all(s <= 0):
        return INFLOW
    if np.all(s >= 0):
        return OUTFLOW
    return CHARACTERISTIC
