import os

import numpy as np
import pytest

from resexplore import model, solver
from resexplore.ensemble import run_ensemble

SET_A = dict(alpha=0.5, r=0.02, a=2.5, lam=2.0, k=5.0)
SET_B = dict(alpha=0.5, r=0.02, a=0.5, lam=10.0, k=1.0)
SET_S = dict(alpha=0.5, r=0.02, a=1.0, lam=5.0, k=5.0)

ACCEPTANCE_RESULTS = {}


def params_of(d):
    return model.validate(d["alpha"], d["r"], d["a"], d["lam"], d["k"])


@pytest.fixture(scope="session")
def params_a():
    return params_of(SET_A)


@pytest.fixture(scope="session")
def params_b():
    return params_of(SET_B)


@pytest.fixture(scope="session")
def params_s():
    return params_of(SET_S)


@pytest.fixture(scope="session")
def surface_a(params_a):
    return solver.solve(params_a, solver.default_grid(params_a))


@pytest.fixture(scope="session")
def surface_b(params_b):
    return solver.solve(params_b, solver.default_grid(params_b))


@pytest.fixture(scope="session")
def surface_s(params_s):
    return solver.solve(params_s, solver.default_grid(params_s))


def midpoint_r0(surface, x0):
    return 0.5 * (float(surface.frontier.r_star_at(x0)) + surface.grid.r_max)


@pytest.fixture(scope="session")
def ensemble_b_large(surface_b):
    """Set B, x0 = 1, R0 mid consumption region, 10^4 paths to t = 100."""
    r0 = midpoint_r0(surface_b, 1.0)
    return run_ensemble(1.0, r0, surface_b, 10_000, 100.0, 20240101,
                        workers=os.cpu_count() or 1)


@pytest.fixture(scope="session")
def ensemble_a_1000(surface_a):
    r0 = midpoint_r0(surface_a, 1.0)
    return run_ensemble(1.0, r0, surface_a, 1000, 100.0, 777)


def record_acceptance(number, passed, detail):
    ACCEPTANCE_RESULTS[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
