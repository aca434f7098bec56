"""Degenerate Goursat solver: grid construction, characteristic geometry,
the Picard sweep's edge behavior, and the convergence bookkeeping."""

from types import SimpleNamespace

import numpy as np
import pytest

import fixtures_frozen as fz
from sonicpatch import ConvergenceError, DomainSizeError
from sonicpatch._interp import interp_uniform
from sonicpatch.solver import (_lagrange_nonuniform, char_plus, choose_delta,
                               make_grid, recover_WZ, solve, tau1_of)


# ----- low-level interpolation helpers --------------------------------------

def test_uniform_interp_reproduces_quadratics():
    xs = np.arange(12, dtype=float)
    vals = -2.0 * xs ** 2 + xs - 5.0
    q = np.linspace(1.0, 10.0, 77)  # interior: four-point stencils apply
    want = -2.0 * q ** 2 + q - 5.0
    assert np.max(np.abs(interp_uniform(vals, q) - want)) < 1e-12
    # nodal values are reproduced exactly, edges included
    assert np.array_equal(interp_uniform(vals, xs), vals)
    # scalar input comes back as a scalar-shaped array
    out = interp_uniform(vals, 3.5)
    assert out.shape == ()
    with pytest.raises(ValueError):
        interp_uniform(vals, 12.5)


def test_nonuniform_lagrange_reproduces_cubics():
    xs = np.sort(np.concatenate([np.linspace(0, 1, 7) ** 2, [1.2, 1.5]]))
    vals = 2.0 * xs ** 3 - xs ** 2 + 0.5 * xs + 1.0
    q = np.linspace(xs[0], xs[-1], 91)
    want = 2.0 * q ** 3 - q ** 2 + 0.5 * q + 1.0
    assert np.max(np.abs(_lagrange_nonuniform(xs, vals, q) - want)) < 1e-12


# ----- characteristic geometry ----------------------------------------------

def test_entry_parameter_fixture(table, hb):
    zeta = 0.5 * float(hb.chi_bar(0.08))
    t1 = tau1_of(table, 0.08, zeta)
    assert abs(t1 - fz.TAU1_SAMPLE) / fz.TAU1_SAMPLE < 1e-8
    # the reflected characteristic through (tau, zeta) hits zeta = 0 at tau1
    assert abs(char_plus(table, 0.08, zeta, t1)) < 1e-15
    assert float(char_plus(table, 0.08, zeta, 0.08)) == zeta
    # wide offsets reach the degenerate edge instead
    assert tau1_of(table, 0.08, 2.0 * zeta) is None


def test_grid_layout(table):
    g = make_grid(table, 0.1, (65, 65))
    assert g.shape == (65, 129)
    assert g.n_seam == 65
    assert g.ups[0] == 0.0 and g.ups[-1] == 0.1
    assert g.chis[0] == 0.0 and g.chis[-1] == 0.1
    assert np.all(np.diff(g.chis) > 0.0)
    # seam columns are the characteristic widths of the rows
    assert np.array_equal(g.chis[:65], g.chib)
    with pytest.raises(DomainSizeError):
        make_grid(table, 0.1, (8, 65))


def test_grid_nesting_is_exact(table):
    ga = make_grid(table, 0.1, (65, 65))
    gb = make_grid(table, 0.1, (129, 129))
    assert np.array_equal(ga.ups, gb.ups[::2])
    assert np.array_equal(ga.chis, gb.chis[::2])


def test_column_maps_roundtrip(table):
    g = make_grid(table, 0.1, (65, 65))
    pos = g.col_pos(g.chis)
    assert np.max(np.abs(pos - np.arange(g.chis.size))) < 1e-4
    chi_q = np.linspace(0.0, 0.1, 777)
    rt = g.chi_of_col(g.col_pos(chi_q))
    assert np.max(np.abs(rt - chi_q)) < 1e-13
    h = 1e-5
    for lo, hi in ((2.0, 62.0), (65.0, 126.0)):  # skip the seam/bulk kink
        p = np.linspace(lo, hi, 211)
        fd = (g.chi_of_col(p + h) - g.chi_of_col(p - h)) / (2 * h)
        assert np.max(np.abs(fd - g.dchi_dcol(p)) / np.abs(fd)) < 1e-4


def test_entry_parameters_on_grid(table):
    g = make_grid(table, 0.1, (65, 65))
    n = g.ups.size
    # region pattern: positive strictly below the seam diagonal
    for i in range(n):
        assert np.all(g.tau1[i, i:] == 0.0)
        if i:
            assert np.all(g.tau1[i, :i] > 0.0)
    assert np.array_equal(g.tau1[:, 0], g.ups)
    # dense inverse-table route agrees with direct root solving
    for i, j in ((40, 13), (60, 2), (33, 20), (64, 50)):
        direct = tau1_of(table, float(g.ups[i]), float(g.chis[j]))
        assert abs(g.tau1[i, j] - direct) < 1e-12


# ----- width selection --------------------------------------------------------

def test_width_auto_selection(table, hb):
    delta, kd = choose_delta(table, hb)
    assert delta == 0.1
    assert 1.0 < kd < 2.0
    assert delta * delta * kd <= 2.0 / 9.0


def test_width_cap_rejected(table, hb):
    with pytest.raises(DomainSizeError):
        choose_delta(table, hb, requested=0.25)


def test_width_halving_until_gate():
    # stiff stand-in coefficient table forces the gate to bite
    stiff = SimpleNamespace(K_delta=lambda d: 50.0, t_max=0.3)
    geom = SimpleNamespace(t0=0.25, chi_max=0.2)
    delta, kd = choose_delta(stiff, geom, requested=0.19)
    assert delta == pytest.approx(0.0475)
    assert kd == 50.0
    assert delta ** 2 * kd <= 2.0 / 9.0
    with pytest.raises(DomainSizeError):
        choose_delta(stiff, geom, requested=0.19, max_halvings=1)


# ----- the iteration -----------------------------------------------------------

def test_solution_edges_are_exact(sol65, hb):
    res = sol65
    assert np.all(res.U[0, :] == 0.0)
    assert np.all(res.V[0, :] == 0.0)
    assert np.array_equal(res.U[:, 0], res.workspace.b1u)


def test_recovered_invariants_on_edges(wz65, hb):
    g = wz65.grid
    assert np.max(np.abs(wz65.W[0, :] - hb.w_sonic(g.chis))) < 1e-14
    assert np.max(np.abs(wz65.Z[0, :] + hb.w_sonic(g.chis))) < 1e-14
    assert np.max(np.abs(wz65.W[:, 0] - hb.char.b0_bar(g.ups))) < 1e-14
    assert wz65.W[0, 0] == pytest.approx(0.1, rel=1e-12)
    assert wz65.Z[0, 0] == pytest.approx(-0.1, rel=1e-12)
    assert wz65.r[0, 0] == pytest.approx(wz65.r2, abs=1e-15)
    # hodograph ordinate decreases along each row
    assert np.all(np.diff(wz65.r, axis=1) < 0.0)


def test_convergence_history(sol65):
    res = sol65
    assert res.converged
    assert res.iterations <= 60
    assert res.history[-1].k == res.iterations
    steps = [max(h.dU, h.dV) for h in res.history]
    assert steps[-1] <= 1e-10
    assert all(h.ratio < 0.7 for h in res.history[2:])
    assert res.M_hat > 0.0
    assert res.envelopes[-1] <= 3.0 * res.M_hat


def test_solver_is_deterministic(table, hb):
    a = solve(table, hb, shape=(33, 33), tol=1e-10, max_iters=60)
    b = solve(table, hb, shape=(33, 33), tol=1e-10, max_iters=60)
    assert np.array_equal(a.U, b.U)
    assert np.array_equal(a.V, b.V)
    assert a.iterations == b.iterations


def test_fixed_point_ignores_start(table, hb):
    base = solve(table, hb, shape=(33, 33), tol=1e-12, max_iters=60)
    rng = np.random.default_rng(7)
    U0 = 1e-3 * rng.standard_normal(base.grid.shape)
    V0 = 1e-3 * rng.standard_normal(base.grid.shape)
    U0[0, :] = V0[0, :] = 0.0
    seeded = solve(table, hb, shape=(33, 33), tol=1e-12, max_iters=60,
                   init=(U0, V0))
    assert np.max(np.abs(seeded.U - base.U)) < 1e-11
    assert np.max(np.abs(seeded.V - base.V)) < 1e-11


def test_bad_start_shape_rejected(table, hb):
    with pytest.raises(DomainSizeError):
        solve(table, hb, shape=(33, 33),
              init=(np.zeros((3, 3)), np.zeros((3, 3))))


def test_iteration_budget_enforced(table, hb):
    with pytest.raises(ConvergenceError):
        solve(table, hb, shape=(33, 33), tol=1e-10, max_iters=2)


def test_snapshots_emitted_on_request(table, hb):
    res = solve(table, hb, shape=(33, 33), tol=1e-8, max_iters=60,
                emit_iterations=True)
    assert res.snapshots is not None
    assert len(res.snapshots) == res.iterations
    assert np.array_equal(res.snapshots[-1][0], res.U)
