import numpy as np
import pytest

from ihdg.flux import FluxScheme
from ihdg.mesh import build_box
from ihdg.models import EXPERIMENTS, Transport
from ihdg.reference import build_reference
from ihdg.solver import discretize


def build(experiment, cells, p, flux="upwind", dt=None, gamma_stab=1.0, **params):
    """Problem and discretization of a built-in experiment."""
    problem = EXPERIMENTS[experiment](**params)
    mesh = build_box(problem.bounds, cells)
    disc = discretize(problem.model, FluxScheme(flux, gamma_stab), mesh,
                      build_reference(p, mesh.d), dt)
    return problem, disc


def constant_transport(beta, g=1.0, forcing=None):
    beta = np.asarray(beta, dtype=float)
    return Transport(beta=lambda x: np.broadcast_to(beta, np.shape(x)).copy(),
                     inflow=lambda x, t=0.0: np.full(np.shape(x)[:-1], g),
                     forcing=forcing)


@pytest.fixture
def transport2d_small():
    return build("transport2d-discont", 4, 2)


ACCEPTANCE = {}


def record(criterion, ok, detail):
    """Store the one-line verdict of an acceptance criterion."""
    ACCEPTANCE[criterion] = f"criterion {criterion:>3}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE[criterion])
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(str(k).rstrip("s")), str(k))):
        terminalreporter.write_line(ACCEPTANCE[key])
