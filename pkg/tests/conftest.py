"""Shared fixtures: the canonical configuration solved at three nested
resolutions, plus the zero-field (kappa0 = 0) variant for the regression
suite.  Session-scoped because the 257-row solve dominates the budget."""

import time

import numpy as np
import pytest

from sonicpatch import (PolytropicLaw, ThermoParams, ThermoTable,
                        resolve_bernoulli)
from sonicpatch.boundary import CurveSpec, build_hodograph_boundary
from sonicpatch.recovery import build_forward_map
from sonicpatch.solver import recover_WZ, solve
from sonicpatch.verify import run_verification

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_table(kappa0=0.05):
    law = PolytropicLaw(A=0.1, Gamma=2.0)
    B = resolve_bernoulli(law, kappa0=kappa0, n0=1.0, rho0=0.5,
                          rho_ref=0.5, q_ref=0.4)
    params = ThermoParams(kappa0=kappa0, n0=1.0, rho0=0.5, B=B,
                          rho_range=(0.3, 0.9))
    return ThermoTable(law, params, t_max=0.3)


def make_curve():
    return CurveSpec.from_coeffs(phi=[0.0, 0.0, 0.05],
                                 theta_hat=[0.0, -0.2],
                                 x_span=(0.0, 1.0),
                                 char_profile=[0.35, -0.4], t0=0.25)


@pytest.fixture(scope="session")
def table():
    return make_table()


@pytest.fixture(scope="session")
def curve():
    return make_curve()


@pytest.fixture(scope="session")
def hb(table, curve):
    return build_hodograph_boundary(curve, table)


@pytest.fixture(scope="session")
def sol65(table, hb):
    return solve(table, hb, shape=(65, 65), tol=1e-10, max_iters=60)


@pytest.fixture(scope="session")
def sol129(table, hb):
    t0 = time.perf_counter()
    out = solve(table, hb, shape=(129, 129), tol=1e-10, max_iters=60)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="session")
def sol257(table, hb):
    return solve(table, hb, shape=(257, 257), tol=1e-10, max_iters=60)


@pytest.fixture(scope="session")
def wz65(sol65, hb):
    return recover_WZ(sol65, hb)


@pytest.fixture(scope="session")
def wz129(sol129, hb):
    return recover_WZ(sol129[0], hb)


@pytest.fixture(scope="session")
def wz257(sol257, hb):
    return recover_WZ(sol257, hb)


@pytest.fixture(scope="session")
def fm65(wz65, hb, table):
    return build_forward_map(wz65, hb, table)


@pytest.fixture(scope="session")
def fm129(wz129, hb, table):
    return build_forward_map(wz129, hb, table)


@pytest.fixture(scope="session")
def fm257(wz257, hb, table):
    return build_forward_map(wz257, hb, table)


@pytest.fixture(scope="session")
def report(fm129, fm257, wz129, wz257, sol65, sol129, sol257, wz65, hb,
           table):
    """Joint residual verification on the two finest canonical runs."""
    return run_verification([(fm129, wz129), (fm257, wz257)], hb, table,
                            results=[sol65, sol129[0], sol257],
                            wz_fields=[wz65, wz129, wz257])


@pytest.fixture(scope="session")
def newtonian():
    """kappa0 = 0 pipeline at three reduced resolutions."""
    table = make_table(kappa0=0.0)
    hbn = build_hodograph_boundary(make_curve(), table)
    results = [solve(table, hbn, shape=shp, tol=1e-10, max_iters=60)
               for shp in ((33, 33), (65, 65), (129, 129))]
    wzs = [recover_WZ(r, hbn) for r in results]
    fms = [build_forward_map(w, hbn, table) for w in wzs]
    return {"table": table, "hb": hbn, "results": results,
            "wzs": wzs, "fms": fms}
