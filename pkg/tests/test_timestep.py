import numpy as np
import pytest

from conftest import build
from ihdg.flux import FluxScheme
from ihdg.mesh import build_box
from ihdg.oracle import direct_solve
from ihdg.reference import build_reference
from ihdg.solver import SolverConfig
from ihdg.timestep import (BACKWARD_EULER, CRANK_NICOLSON, TimeLoopConfig, advance,
                           shallow_water_energy, time_discretization)


def _wave(cells, p, scheme, dt, n_steps, warm=True, tol=1e-12):
    cfg = TimeLoopConfig(scheme, dt, n_steps, warm, SolverConfig(tol=tol))
    disc_dt = dt if scheme == BACKWARD_EULER else dt / 2
    prob, disc = build("shallow-standing-wave", cells, p, dt=disc_dt)
    q0 = disc.interpolate(lambda x, t: prob.initial(x))
    return prob, disc, cfg, q0


def test_zero_state_stays_zero():
    prob, disc, cfg, q0 = _wave(2, 2, CRANK_NICOLSON, 1e-2, 5)
    q, hist = advance(disc, cfg, np.zeros_like(q0))
    assert np.all(q == 0.0)
    assert hist.iterations == [1] * 5


def test_discretization_dt_must_match_scheme():
    prob, disc, cfg, q0 = _wave(2, 1, CRANK_NICOLSON, 1e-2, 1)
    with pytest.raises(ValueError):
        advance(disc, TimeLoopConfig(BACKWARD_EULER, 1e-2, 1), q0)


def test_backward_euler_step_matches_direct_solve():
    dt = 1e-3
    prob, disc, cfg, q0 = _wave(4, 1, BACKWARD_EULER, dt, 1, tol=1e-13)
    q, hist = advance(disc, cfg, q0)
    rhs = disc.local.forcing(dt) + disc.local.mass_rows(q0) / dt
    q_ref, _ = direct_solve(disc, rhs, dt)
    assert np.max(np.abs(q - q_ref)) < 1e-10


def test_crank_nicolson_energy_drift():
    prob, disc, cfg, q0 = _wave(4, 4, CRANK_NICOLSON, 1e-3, 100, tol=1e-13)
    e0 = shallow_water_energy(disc, q0)
    q, hist = advance(disc, cfg, q0)
    assert not hist.aborted and hist.steps == 100
    assert abs(shallow_water_energy(disc, q) - e0) / e0 < 1e-6


def test_crank_nicolson_tracks_exact_solution():
    prob, disc, cfg, q0 = _wave(4, 3, CRANK_NICOLSON, 1e-3, 20)
    q, hist = advance(disc, cfg, q0, exact=prob.exact)
    assert len(hist.errors) == 20
    assert hist.errors[-1] < 1e-3


def test_small_dt_takes_two_iterations():
    prob, disc, cfg, q0 = _wave(4, 2, CRANK_NICOLSON, 1e-6, 20, tol=1e-10)
    _, hist = advance(disc, cfg, q0)
    assert hist.iterations == [2] * 20


def test_warm_start_lowers_first_residual():
    n = 100
    prob, disc, warm_cfg, q0 = _wave(4, 2, CRANK_NICOLSON, 1e-3, n)
    _, warm = advance(disc, warm_cfg, q0)
    cold_cfg = TimeLoopConfig(CRANK_NICOLSON, 1e-3, n, False, warm_cfg.solver)
    _, cold = advance(disc, cold_cfg, q0)
    assert all(w <= c for w, c in zip(warm.first_residuals, cold.first_residuals))
    assert sum(warm.iterations) < sum(cold.iterations)


def test_energy_requires_shallow_water():
    _, disc = build("convdiff3d", 2, 1, dt=0.1)
    with pytest.raises(TypeError):
        shallow_water_energy(disc, disc.zeros())


def test_convdiff_time_discretization_uses_half_step():
    prob, _ = build("convdiff3d", 2, 1)
    disc = time_discretization(prob.model, FluxScheme("upwind"), build_box(prob.bounds, 2),
                               build_reference(1, 3), TimeLoopConfig(CRANK_NICOLSON, 0.2))
    assert disc.local.dt == pytest.approx(0.1)


def test_config_validation():
    with pytest.raises(ValueError):
        TimeLoopConfig(dt=0.0)
    with pytest.raises(ValueError):
        TimeLoopConfig(scheme="leapfrog")
