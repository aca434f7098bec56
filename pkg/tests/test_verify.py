"""Verification suite on the canonical run: residual convergence orders,
corruption sensitivity, conservation audits, and the contraction
bookkeeping across nested resolutions."""

import json

from sonicpatch.verify import (CheckResult, bernoulli_audit,
                               convergence_audit, physical_window)


def test_residual_report_green(report):
    assert report.passed
    for check in report.checks:
        assert check.passed, check.name
        assert check.order_linf >= 0.9
        assert check.order_l2 >= 0.9
        assert check.corruption_factor >= 10.0
        # the residual actually shrinks under joint refinement
        (h1, linf1, l21, n1), (h2, linf2, l22, n2) = check.levels
        assert h2 < h1 and linf2 < linf1 and l22 < l21
        assert n2 > n1 > 50
    payload = json.loads(report.to_json())
    assert payload["passed"] is True
    assert {c["name"] for c in payload["checks"]} == {
        "first_order_angles", "gradient_decomposition", "char_system"}


def test_bernoulli_audit(wz65, table):
    out = bernoulli_audit(wz65, table)
    assert out["passed"]
    assert out["bernoulli_rel_dev"] < 1e-10
    assert out["density_quad_rel_dev"] < 1e-8
    assert out["mach_route_dev"] < 1e-10
    assert out["mach_min"] >= 1.0
    assert out["q_max"] < out["q_limit"]


def test_convergence_audit(sol65, sol129, sol257, wz65, wz129, wz257):
    out = convergence_audit([sol65, sol129[0], sol257],
                            [wz65, wz129, wz257])
    assert out["passed"]
    assert out["ratio_max_k3"] <= 0.7
    assert out["envelope_bound_ok"] and out["envelope_final_ok"]
    assert out["field_order"] >= 0.9
    assert out["field_diffs"][1] < out["field_diffs"][0]


def test_physical_window_inside_patch(fm65, wz65, hb):
    xa, xb, eta_lo, eta_hi = physical_window(fm65, wz65, hb)
    assert xa < xb
    assert eta_lo < eta_hi < 0.0


def test_check_gate_wiring():
    good = CheckResult("x", [], 1.2, 1.4, 50.0)
    assert good.passed
    assert not CheckResult("x", [], 0.5, 1.4, 50.0).passed
    assert not CheckResult("x", [], 1.2, 0.5, 50.0).passed
    assert not CheckResult("x", [], 1.2, 1.4, 2.0).passed
