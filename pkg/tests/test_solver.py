import numpy as np
import pytest

from conftest import build, constant_transport
from ihdg.flux import FluxScheme
from ihdg.mesh import build_box
from ihdg.oracle import direct_solve, iteration_matrix, spectral_radius
from ihdg.reference import build_reference
from ihdg.solver import (CONVERGED, DIVERGED, MAX_ITER, SolverConfig, discretize,
                         power_iterate, solve)
from ihdg.theory import layer_count


def test_zero_problem_converges_in_one_iteration():
    model = constant_transport([1.0, 1.0], g=0.0)
    disc = discretize(model, FluxScheme("upwind"), build_box([(0, 1)] * 2, 3),
                      build_reference(2, 2))
    q, _, rep = solve(disc)
    assert rep.iterations == 1 and rep.status == CONVERGED
    assert np.all(q == 0.0)


@pytest.mark.parametrize("flux", ["upwind", "npc"])
def test_matches_direct_solve(flux):
    _, disc = build("transport2d-discont", 4, 2, flux=flux)
    q, _, rep = solve(disc, SolverConfig(tol=1e-13))
    assert rep.converged
    assert rep.residuals[-1] < 1e-13
    q_ref, _ = direct_solve(disc)
    assert np.max(np.abs(q - q_ref)) < 1e-11


def test_convdiff_matches_direct_solve():
    _, disc = build("convdiff3d", 2, 1, kappa=1e-3)
    q, _, rep = solve(disc, SolverConfig(tol=1e-13))
    assert rep.converged
    q_ref, _ = direct_solve(disc)
    assert np.max(np.abs(q - q_ref)) < 1e-10


def test_npc_converges_within_layer_count():
    prob, disc = build("transport2d-discont", 4, 3, flux="npc")
    J = layer_count(disc.mesh, prob.model.beta)
    q, _, rep = solve(disc, SolverConfig(tol=1e-13))
    # J sweeps reach the exact solution; one more confirms it
    assert rep.iterations <= J + 1
    q_ref, _ = direct_solve(disc)
    assert np.max(np.abs(q - q_ref)) < 1e-12


@pytest.mark.parametrize("orders", [("reversed", "natural"), ("natural", "reversed"), "perm"])
def test_ordering_is_bit_identical(orders):
    _, disc = build("transport2d-discont", 4, 2)
    base, _, rep0 = solve(disc, SolverConfig(tol=1e-12))
    if orders == "perm":
        rng = np.random.default_rng(11)
        eo = rng.permutation(disc.mesh.n_elements)
        fo = rng.permutation(disc.mesh.n_faces)
    else:
        eo, fo = orders
    q, _, rep = solve(disc, SolverConfig(tol=1e-12, element_order=eo, face_order=fo, chunk=5))
    assert rep.iterations == rep0.iterations
    assert rep.residuals == rep0.residuals
    assert np.array_equal(q, base)


def test_bad_ordering_rejected():
    _, disc = build("transport2d-discont", 2, 1)
    with pytest.raises(ValueError):
        solve(disc, SolverConfig(element_order=[0, 0, 1, 2]))


def test_residual_history_is_recorded():
    prob, disc = build("transport3d-smooth", 2, 2)
    _, _, rep = solve(disc, SolverConfig(tol=1e-10), exact=prob.exact)
    assert len(rep.residuals) == rep.iterations == len(rep.errors)
    assert rep.residuals[-1] < 1e-10


def test_stagnation_needs_exact_solution():
    _, disc = build("transport3d-smooth", 2, 1)
    with pytest.raises(ValueError):
        solve(disc, SolverConfig(criterion="stagnation"))
    prob, _ = build("transport3d-smooth", 2, 1)
    _, _, rep = solve(disc, SolverConfig(criterion="stagnation", tol=1e-8), exact=prob.exact)
    assert rep.converged


def test_max_iter_reported():
    _, disc = build("transport2d-discont", 4, 2)
    _, _, rep = solve(disc, SolverConfig(max_iter=3))
    assert rep.status == MAX_ITER and rep.iterations == 3


def test_elliptic_tau_one_diverges():
    # tau = 1 on 64 hexes with p = 1: gamma (p+1)(p+2)/h = 1 with h = 1/4
    _, disc = build("elliptic3d", 4, 1, flux="elliptic-tau", gamma_stab=0.25 / 6)
    rho, _ = power_iterate(disc, n_steps=300)
    assert rho > 1
    _, _, rep = solve(disc, SolverConfig(max_iter=2000))
    assert rep.status == DIVERGED


def test_power_iterate_transport_contracts():
    _, disc = build("transport2d-discont", 4, 1)
    rho, _ = power_iterate(disc, n_steps=2000)
    exact = spectral_radius(iteration_matrix(disc))
    # the sweep is far from normal, so power iteration creeps up slowly
    assert abs(rho - exact) < 0.02 * exact
    assert 0.45 <= exact <= 0.55


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol=0)
    with pytest.raises(ValueError):
        SolverConfig(criterion="energy")
    with pytest.raises(ValueError):
        SolverConfig(max_iter=0)
