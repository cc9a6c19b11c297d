import numpy as np
import pytest

from ihdg.reference import build_reference, differentiation_matrix, gll_nodes, lagrange_basis


@pytest.mark.parametrize("p", range(1, 17))
def test_nodes_sorted_symmetric_and_weights_sum(p):
    x, w = gll_nodes(p)
    assert np.all(np.diff(x) > 0)
    assert x[0] == -1.0 and x[-1] == 1.0
    np.testing.assert_array_equal(x, -x[::-1])
    assert abs(w.sum() - 2.0) < 1e-13


def test_linear_rule_is_trapezoid():
    x, w = gll_nodes(1)
    np.testing.assert_array_equal(x, [-1.0, 1.0])
    np.testing.assert_allclose(w, [1.0, 1.0], rtol=0, atol=1e-15)


def test_cubic_interior_nodes():
    x, _ = gll_nodes(3)
    np.testing.assert_allclose(x[1:3], [-np.sqrt(0.2), np.sqrt(0.2)], atol=1e-15)


def test_cubic_nodes_match_bisection_roots():
    # roots of (1 - x^2) P_3'(x) = (1 - x^2)(15 x^2 - 3)/2 located by bisection
    def f(x):
        return 7.5 * x**2 - 1.5

    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(lo) * f(mid) <= 0:
            hi = mid
        else:
            lo = mid
    x, _ = gll_nodes(3)
    assert abs(x[2] - 0.5 * (lo + hi)) < 1e-14


@pytest.mark.parametrize("p", [1, 2, 5, 9])
def test_quadrature_exactness(p):
    x, w = gll_nodes(p)
    for q in range(2 * p):
        exact = (1 - (-1) ** (q + 1)) / (q + 1)
        assert abs(np.dot(w, x**q) - exact) < 1e-12


@pytest.mark.parametrize("p", [1, 3, 6, 12])
def test_differentiation_exact_on_polynomials(p):
    x, _ = gll_nodes(p)
    D = differentiation_matrix(x)
    np.testing.assert_allclose(D.sum(axis=1), 0.0, atol=1e-11)
    rng = np.random.default_rng(p)
    c = rng.standard_normal(p + 1)
    poly = np.polynomial.Polynomial(c)
    got = D @ poly(x)
    want = poly.deriv()(x)
    assert np.max(np.abs(got - want)) <= 1e-12 * max(1.0, np.max(np.abs(want))) * p**2


def test_lagrange_basis_is_cardinal():
    x, _ = gll_nodes(4)
    np.testing.assert_allclose(lagrange_basis(x, x), np.eye(5), atol=1e-14)


def test_face_maps_counts_and_coverage():
    ref = build_reference(2, 2)
    assert ref.face_maps.shape == (4, 3)
    ref3 = build_reference(3, 3)
    nodes = ref3.nodes
    boundary = np.flatnonzero(np.any(np.abs(nodes) == 1.0, axis=1))
    covered = np.unique(ref3.face_maps.ravel())
    np.testing.assert_array_equal(covered, boundary)
    for lf in range(6):
        axis, side = lf // 2, lf % 2
        assert np.all(nodes[ref3.face_maps[lf], axis] == (1.0 if side else -1.0))


def test_restrict_lift_round_trip():
    ref = build_reference(3, 2)
    rng = np.random.default_rng(0)
    vals = rng.standard_normal(ref.n_face)
    for lf in range(4):
        back = ref.restrict(ref.lift(vals, lf), lf)
        np.testing.assert_array_equal(back, vals)


def test_tensor_derivative_matches_axis():
    ref = build_reference(3, 3)
    X = ref.nodes
    u = X[:, 0] ** 2 * X[:, 1] + X[:, 2] ** 3
    np.testing.assert_allclose(ref.derivative(0) @ u, 2 * X[:, 0] * X[:, 1], atol=1e-12)
    np.testing.assert_allclose(ref.derivative(1) @ u, X[:, 0] ** 2, atol=1e-12)
    np.testing.assert_allclose(ref.derivative(2) @ u, 3 * X[:, 2] ** 2, atol=1e-12)


@pytest.mark.parametrize("p,d", [(0, 2), (17, 1), (2, 4), (2, 0)])
def test_rejects_bad_order_or_dimension(p, d):
    with pytest.raises(ValueError):
        build_reference(p, d)
