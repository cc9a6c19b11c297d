import numpy as np
import pytest

from conftest import build, constant_transport
from ihdg.flux import FluxScheme
from ihdg.local import assemble_local, build_geometry
from ihdg.mesh import build_box
from ihdg.models import ShallowWater
from ihdg.oracle import direct_solve
from ihdg.reference import build_reference
from ihdg.solver import SolverConfig, discretize, solve
from ihdg.trace import residual_norm


def test_zero_trace_and_rhs_give_zero(transport2d_small):
    _, disc = transport2d_small
    lam = np.zeros((disc.mesh.n_faces, disc.trace.mt, disc.ref.n_face))
    q = disc.local_solve(lam, disc.zeros())
    assert np.all(q == 0.0)


@pytest.mark.parametrize("flux", ["upwind", "npc"])
def test_constant_inflow_reproduced_on_one_element(flux):
    model = constant_transport([1.0, 0.0], g=1.0)
    mesh = build_box([(0, 1), (0, 1)], 1)
    disc = discretize(model, FluxScheme(flux), mesh, build_reference(3, 2))
    q, _, rep = solve(disc, SolverConfig(tol=1e-13))
    assert rep.converged
    np.testing.assert_allclose(q, 1.0, atol=1e-12)


def test_local_solve_round_trip(transport2d_small):
    _, disc = transport2d_small
    rng = np.random.default_rng(3)
    q = rng.standard_normal(disc.shape)
    lam = rng.standard_normal((disc.mesh.n_faces, 1, disc.ref.n_face))
    idx = np.arange(disc.mesh.n_elements)
    b = disc.local.apply(q) - disc.local.rhs_from_trace(lam, disc.mesh.elem_faces, idx)
    back = disc.local_solve(lam, b)
    np.testing.assert_allclose(back, q, atol=1e-10)


def test_elliptic_tau_one_factorizes():
    # h = 1/2, p = 2: gamma (p+1)(p+2)/h = 1
    _, disc = build("elliptic3d", 2, 2, flux="elliptic-tau", gamma_stab=0.5 / 12)
    assert np.all(np.isfinite(disc.local.inverse))


def test_mass_term_scales_with_dt():
    prob, disc1 = build("convdiff3d", 2, 1, dt=0.1)
    _, disc2 = build("convdiff3d", 2, 1, dt=0.05)
    A1 = disc1.local.matrix(0)
    A2 = disc2.local.matrix(0)
    n_vol = disc1.ref.n_vol
    M = np.zeros((4, n_vol))
    M[3] = disc1.geometry.mass
    np.testing.assert_allclose(A2 - A1, np.diag((M / 0.05 - M / 0.1).ravel()), atol=1e-10)


def test_shallow_water_small_dt_is_mass_dominated():
    dt = 1e-6
    mesh = build_box([(0, 1), (0, 1)], 4)
    ref = build_reference(2, 2)
    op = assemble_local(ShallowWater(), FluxScheme("upwind"), mesh, ref, dt)
    A = op.matrix(0)
    Mdt = np.diag(np.tile(build_geometry(mesh, ref).mass, 3) / dt)
    assert np.max(np.abs(A - Mdt)) / np.max(np.abs(Mdt)) < 1e-4


def test_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        build("convdiff3d", 2, 1, dt=0.0)


@pytest.mark.parametrize("flux", ["upwind", "npc"])
def test_transport_trace_is_upwind_value(flux):
    model = constant_transport([1.0, 0.5], g=-1.0)
    mesh = build_box([(0, 1), (0, 1)], 3)
    disc = discretize(model, FluxScheme(flux), mesh, build_reference(2, 2))
    q = np.random.default_rng(4).standard_normal(disc.shape)
    lam = disc.trace.apply(q)
    fm = disc.ref.face_maps
    for f in mesh.interior:
        # beta . n > 0 on every interior face, so the minus side is upwind
        np.testing.assert_array_equal(lam[f, 0], q[mesh.minus_elem[f], 0, fm[mesh.minus_face[f]]])
    for f in mesh.boundary:
        side = q[mesh.minus_elem[f], 0, fm[mesh.minus_face[f]]]
        want = side if mesh.normals[f] @ [1.0, 0.5] > 0 else -1.0
        np.testing.assert_array_equal(lam[f, 0], want)


def test_shallow_water_trace_of_rest_state():
    mesh = build_box([(0, 1), (0, 1)], 2)
    disc = discretize(ShallowWater(), FluxScheme("upwind"), mesh, build_reference(1, 2), dt=0.1)
    q = disc.zeros()
    q[:, 0] = 1.0
    lam = disc.trace.apply(q)
    # |A| (1, 0, 0) = (sqrt(Phi), 0, 0) with Phi = 1, on walls as well
    np.testing.assert_allclose(lam[:, 0], 1.0, rtol=1e-14)
    np.testing.assert_allclose(lam[:, 1:], 0.0, atol=1e-14)


@pytest.mark.parametrize("flux", ["upwind", "npc", "elliptic-tau"])
def test_convdiff_trace_of_constant(flux):
    prob, disc = build("convdiff3d", 2, 1, flux=flux)
    q = disc.zeros()
    q[:, 3] = 1.0
    lam = disc.trace.apply(q)
    mesh = disc.mesh
    np.testing.assert_allclose(lam[mesh.interior], 1.0, rtol=1e-13)


def test_residual_norm_examples():
    mass = np.array([0.5, 0.5])
    a = np.array([[[1.0, 1.0]]])
    assert residual_norm(a, a, mass) == 0.0
    assert residual_norm(a, np.zeros_like(a), mass) == pytest.approx(1.0)
    b = np.array([[[3.0, 0.0], [1.0, 1.0]]])
    assert residual_norm(b, np.zeros_like(b), mass, [0]) == pytest.approx(np.sqrt(4.5))


def test_trace_face_order_independent(transport2d_small):
    _, disc = transport2d_small
    q = np.random.default_rng(5).standard_normal(disc.shape)
    order = np.random.default_rng(6).permutation(disc.mesh.n_faces)
    np.testing.assert_array_equal(disc.trace.apply(q), disc.trace.apply(q, order=order))


def test_trace_fixed_point_matches_oracle(transport2d_small):
    _, disc = transport2d_small
    q, lam = direct_solve(disc)
    np.testing.assert_allclose(disc.trace.apply(q), lam, atol=1e-12)
