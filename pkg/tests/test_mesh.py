import numpy as np
import pytest

from ihdg.mesh import INFLOW, OUTFLOW, CHARACTERISTIC, build_box, classify_face
from ihdg.reference import build_reference


def test_unit_square_counts():
    m = build_box([(0, 1), (0, 1)], 2)
    assert m.n_elements == 4
    assert m.n_faces == 12
    assert len(m.interior) == 4 and len(m.boundary) == 8


def test_cube_512():
    assert build_box([(0, 1)] * 3, 8).n_elements == 512


def test_diameter_2d():
    m = build_box([(0, 2), (0, 2)], 32)
    assert m.n_elements == 1024
    assert m.h == pytest.approx(np.sqrt(2) * 2 / 32, rel=1e-14)


@pytest.mark.parametrize("bad", [0, -1, (2, 0)])
def test_rejects_bad_counts(bad):
    with pytest.raises(ValueError):
        build_box([(0, 1), (0, 1)], bad)


@pytest.mark.parametrize("d,n", [(1, 5), (2, 3), (3, 2)])
def test_connectivity_involution(d, n):
    m = build_box([(0, 1)] * d, n)
    for f in m.interior:
        me, mf = m.minus_elem[f], m.minus_face[f]
        pe, pf = m.plus_elem[f], m.plus_face[f]
        assert m.elem_faces[me, mf] == f and m.elem_faces[pe, pf] == f
        assert mf // 2 == pf // 2 and mf % 2 == 1 and pf % 2 == 0
    # every element face slot refers to a face that lists it
    for e in range(m.n_elements):
        for lf in range(2 * d):
            f = m.elem_faces[e, lf]
            assert (m.minus_elem[f], m.minus_face[f]) == (e, lf) or \
                (m.plus_elem[f], m.plus_face[f]) == (e, lf)


def test_normals_unit_and_boundary_outward():
    m = build_box([(0, 1)] * 3, 3)
    np.testing.assert_array_equal(np.linalg.norm(m.normals, axis=1), 1.0)
    centre = np.full(3, 0.5)
    ref = build_reference(1, 3)
    xf = m.face_nodes(ref).mean(axis=1)
    for f in m.boundary:
        assert np.dot(xf[f] - centre, m.normals[f]) > 0


def test_face_nodes_align_across_sides():
    m = build_box([(0, 1), (0, 2), (-1, 1)], (3, 2, 2))
    ref = build_reference(3, 3)
    x = m.physical_nodes(ref)
    for f in m.interior:
        a = x[m.minus_elem[f], ref.face_maps[m.minus_face[f]]]
        b = x[m.plus_elem[f], ref.face_maps[m.plus_face[f]]]
        assert np.max(np.abs(a - b)) < 1e-12


def test_surface_measure():
    m = build_box([(0, 2), (0, 1), (0, 1)], (2, 2, 3))
    ref = build_reference(2, 3)
    total = 0.0
    for e in range(m.n_elements):
        for lf in range(6):
            total += m.face_jacobian(lf // 2) * ref.face_weights(lf).sum()
    assert total == pytest.approx(m.total_boundary_measure(), rel=1e-13)


def test_classify_face():
    beta = np.array([2.0, 0.0])
    assert classify_face(np.array([beta @ [1, 0]])) == OUTFLOW
    assert classify_face(np.array([beta @ [-1, 0]])) == INFLOW
    assert classify_face(np.array([-1.0, 1.0])) == CHARACTERISTIC


def test_left_boundary_is_inflow_for_discontinuous_case():
    y = np.linspace(0, 2, 11)
    beta_x = 1 + np.sin(np.pi * y / 2)
    assert classify_face(-beta_x) == INFLOW
