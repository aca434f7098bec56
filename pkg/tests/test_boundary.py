"""Boundary-trace construction: hat coefficients on the wall, the
characteristic arc, reciprocal traces, and the compatibility conditions
tying the two data curves together at the corner."""

import numpy as np
import pytest

import fixtures_frozen as fz
from sonicpatch import BracketError, HypothesisError, TableRangeError
from sonicpatch.boundary import (CurveSpec, a0_hat, a1_hat,
                                 build_hodograph_boundary, build_sonic_data)

REL = 1e-8


def rel(a, b):
    return abs(a - b) / abs(b)


def test_hat_coefficients_midwall(curve):
    assert rel(float(a0_hat(curve, 0.5)), fz.A0HAT_MID) < REL
    assert rel(float(a1_hat(curve, 0.5)), fz.A1HAT_MID) < REL


def test_wall_angle_range(curve):
    sd = build_sonic_data(curve)
    assert sd.r2 == pytest.approx(0.0, abs=1e-15)
    assert sd.r1 == pytest.approx(-0.2, abs=1e-14)


def test_angle_inverse_roundtrip(curve):
    sd = build_sonic_data(curve)
    rr = np.linspace(sd.r1, sd.r2, 33)
    xs = sd.x_hat(rr)
    assert xs.shape == rr.shape
    assert np.max(np.abs(curve.theta_hat(xs) - rr)) < 1e-13
    with pytest.raises(BracketError):
        sd.x_hat(sd.r1 - 0.05)


def test_reciprocal_traces_at_midwall(hb):
    # chi = 0.1 lands exactly on the wall midpoint for this angle profile
    assert rel(float(hb.a0(0.1)), -1.0 / fz.A0HAT_MID) < REL
    assert rel(float(hb.a1(0.1)), fz.A1HAT_MID / fz.A0HAT_MID ** 2) < REL
    assert float(hb.a0(0.0)) == pytest.approx(10.0, rel=1e-13)
    assert rel(float(hb.w_sonic(0.1)), -fz.A0HAT_MID) < REL


def test_trace_derivatives_match_finite_differences(hb):
    h = 1e-6
    for chi in (0.02, 0.1, 0.18):
        fd0 = (float(hb.a0(chi + h)) - float(hb.a0(chi - h))) / (2 * h)
        fd1 = (float(hb.a1(chi + h)) - float(hb.a1(chi - h))) / (2 * h)
        assert rel(float(hb.da0(chi)), fd0) < 1e-8
        assert abs(float(hb.da1(chi)) - fd1) < 1e-8 * max(1.0, abs(fd1))


def test_char_trace_profile(hb):
    assert rel(float(hb.char.b0_bar(0.2)), fz.B0BAR_AT_T02) < REL
    assert float(hb.char.b0_bar(0.0)) == pytest.approx(0.1, rel=1e-13)
    assert float(hb.b0(0.0)) == pytest.approx(10.0, rel=1e-13)


def test_base_characteristic_offsets(hb):
    assert rel(float(hb.r_bar(0.2)) - hb.r2, fz.RBAR_OFFSET_AT_T02) < REL
    assert rel(float(hb.chi_bar(0.1)), fz.CHIBAR_AT_T01) < REL
    assert hb.chi_max == pytest.approx(0.2, abs=1e-14)


def test_arc_geometry(hb, curve):
    ch = hb.char
    x0, y0 = ch.point_of_t(0.0)
    assert (float(x0), float(y0)) == pytest.approx(curve.corner, abs=1e-14)
    assert np.all(np.diff(ch.ys) < 0.0)
    assert float(ch.alpha(0.0)) == pytest.approx(hb.r2 + np.pi / 2.0,
                                                 abs=1e-14)
    assert ch.slope_margin() > 0.0
    ts = np.linspace(0.0, ch.t0, 41)
    for t in ts:
        y = float(ch._y_spl(t))
        assert abs(float(ch.t_of_y(y)) - t) < 1e-12
    with pytest.raises(BracketError):
        ch.t_of_y(ch.y_b + 1e-3)


def test_trace_coefficient_dual_route(hb):
    """b0 recomputed from the varpi slope along the arc must reproduce the
    defining profile; the two expressions share no code path."""
    ch = hb.char
    for t in (0.02, 0.05, 0.1, 0.2, 0.24):
        y = float(ch._y_spl(t))
        assert rel(float(ch.b0_tilde(y)), float(ch.b0_bar(t))) < 1e-12


def test_varpi_dual_route(hb):
    ch = hb.char
    for t in (0.05, 0.12, 0.2):
        y = float(ch._y_spl(t))
        assert rel(ch.varpi_from_riemann(y), float(ch.varpi_tilde(y))) < 1e-12


def test_corner_compatibility(hb):
    assert float(hb.b1(0.0)) == 0.0
    # second trace vanishes quadratically at the corner
    assert abs(float(hb.b1(1e-3))) < 1e-4
    assert hb.corner_defect() < 1e-8


def test_margin_constant(hb):
    assert hb.eps0 == pytest.approx(0.1, abs=1e-12)


def test_degenerate_data_rejected(table):
    base = dict(phi=[0.0, 0.0, 0.05], x_span=(0.0, 1.0),
                char_profile=[0.35, -0.4], t0=0.25)
    rising = CurveSpec.from_coeffs(theta_hat=[0.0, 0.2], **base)
    with pytest.raises(HypothesisError):
        build_sonic_data(rising)
    flat = CurveSpec.from_coeffs(theta_hat=[0.0], **base)
    with pytest.raises(HypothesisError):
        build_sonic_data(flat)

    sign_change = CurveSpec.from_coeffs(
        phi=[0.0, 0.0, 0.05], theta_hat=[0.0, -0.2], x_span=(0.0, 1.0),
        char_profile=[-2.0], t0=0.25)
    with pytest.raises(HypothesisError):
        build_hodograph_boundary(sign_change, table)

    too_long = CurveSpec.from_coeffs(
        phi=[0.0, 0.0, 0.05], theta_hat=[0.0, -0.2], x_span=(0.0, 1.0),
        char_profile=[0.35, -0.4], t0=0.35)
    with pytest.raises(TableRangeError):
        build_hodograph_boundary(too_long, table)

    backwards = CurveSpec.from_coeffs(
        phi=[0.0, 0.0, 0.05], theta_hat=[0.0, -0.2], x_span=(1.0, 0.0),
        char_profile=[0.35, -0.4], t0=0.25)
    with pytest.raises(HypothesisError):
        build_sonic_data(backwards)
