import numpy as np
import pytest

from conftest import build
from ihdg.bench import convergence_slope
from ihdg.oracle import (assemble_global, direct_solve, iteration_matrix, nilpotency_index,
                         power_spectral_radius, schur_trace_solve, spectral_radius)
from ihdg.theory import layer_count


@pytest.mark.parametrize("flux", ["upwind", "npc"])
def test_direct_solution_satisfies_both_block_rows(flux):
    _, disc = build("transport2d-discont", 4, 2, flux=flux)
    system = assemble_global(disc)
    q, lam = direct_solve(disc)
    r_vol, r_tr = system.residuals(q, lam)
    assert r_vol < 1e-12 and r_tr < 1e-12


def test_schur_complement_agrees_with_direct():
    _, disc = build("convdiff3d", 2, 1, kappa=1e-3)
    _, lam = direct_solve(disc)
    np.testing.assert_allclose(schur_trace_solve(disc), lam, atol=1e-11)


def test_cap_is_enforced():
    _, disc = build("transport2d-discont", 8, 3)
    with pytest.raises(ValueError):
        direct_solve(disc, cap=100)
    with pytest.raises(ValueError):
        iteration_matrix(disc, cap=100)


@pytest.mark.parametrize("flux", ["upwind", "npc"])
@pytest.mark.parametrize("p", [1, 2])
def test_smooth_transport_rates(flux, p):
    hs, errs = [], []
    for cells in (2, 4):
        prob, disc = build("transport3d-smooth", cells, p, flux=flux)
        q, _ = direct_solve(disc)
        hs.append(1.0 / cells)
        errs.append(disc.l2_error(q, prob.exact))
    # two coarse meshes only; the full rate check lives in the acceptance suite
    assert convergence_slope(hs, errs) > p + 0.5


def test_iteration_matrix_matches_sweep():
    _, disc = build("transport2d-discont", 2, 2)
    G = iteration_matrix(disc)
    rng = np.random.default_rng(2)
    q = rng.standard_normal(disc.shape)
    saved = disc.trace.w_data
    disc.trace.w_data = None
    try:
        swept, _ = disc.sweep(q, disc.zeros())
    finally:
        disc.trace.w_data = saved
    np.testing.assert_allclose(G @ q.ravel(), swept.ravel(), atol=1e-12)


def test_upwind_spectral_radius_is_at_least_half():
    _, disc = build("transport2d-discont", 4, 1)
    G = iteration_matrix(disc)
    rho = spectral_radius(G)
    est, _ = power_spectral_radius(G, max_steps=3000)
    assert 0.5 - 1e-9 <= rho < 0.55
    assert abs(est - rho) < 0.02


def test_npc_sweep_is_nilpotent_with_layer_index():
    prob, disc = build("transport2d-discont", 4, 2, flux="npc")
    J = layer_count(disc.mesh, prob.model.beta)
    G = iteration_matrix(disc)
    assert nilpotency_index(G, 3 * J) == J
    assert spectral_radius(G) < 1e-6


def test_elliptic_tau_one_has_radius_above_one():
    _, disc = build("elliptic3d", 2, 1, flux="elliptic-tau", gamma_stab=0.5 / 6)
    assert spectral_radius(iteration_matrix(disc)) > 1


def test_power_radius_on_known_matrix():
    G = np.diag([0.9, -0.5, 0.1])
    est, ok = power_spectral_radius(G, tol=1e-12)
    assert ok and est == pytest.approx(0.9, rel=1e-9)
    assert nilpotency_index(np.array([[0.0, 1.0], [0.0, 0.0]]), 5) == 2
