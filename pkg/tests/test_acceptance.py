"""Acceptance gate: every criterion below runs at its stated tolerance and
prints one PASS/FAIL line in the terminal summary.  Thresholds here are
contractual; loosening them is never the right fix for a regression."""

import numpy as np

import fixtures_frozen as fz
from conftest import ACCEPTANCE_LINES
from sonicpatch.boundary import a0_hat, a1_hat
from sonicpatch.recovery import invert_map, jacobian_j
from sonicpatch.solver import solve, tau1_of
from sonicpatch.verify import bernoulli_audit, run_verification


def emit(tag, ok, detail):
    ACCEPTANCE_LINES.append("%s %s  %s" % (tag, "PASS" if ok else "FAIL",
                                           detail))
    assert ok, "%s: %s" % (tag, detail)


def test_ac1_contraction_and_budget(sol129):
    res, elapsed = sol129
    ratios = [h.ratio for h in res.history[2:]]
    ratio_max = max(ratios)
    final_step = max(res.history[-1].dU, res.history[-1].dV)
    ok = (res.delta == 0.1 and ratio_max <= 0.7 and res.converged
          and res.iterations <= 60 and final_step <= 1e-10
          and elapsed <= 60.0)
    emit("AC1", ok,
         "(129,129) auto width %.3g: %d sweeps in %.2f s, "
         "max ratio(k>=3)=%.3f <= 0.7, final step %.2e <= 1e-10"
         % (res.delta, res.iterations, elapsed, ratio_max, final_step))


def test_ac2_envelope_bounds(sol129):
    res, _ = sol129
    m_hat = res.M_hat
    geo = [sum((2.0 / 3.0) ** j for j in range(k + 2))
           for k in range(len(res.envelopes))]
    worst = max(e / (m_hat * g) for e, g in zip(res.envelopes, geo))
    final_ratio = res.envelopes[-1] / (3.0 * m_hat)
    ok = worst <= 1.0 + 1e-9 and final_ratio <= 1.0
    emit("AC2", ok,
         "second-difference envelopes: M_hat=%.3f, "
         "max env_k/(M_hat*geo_k)=%.3f <= 1, final env=%.3f <= 3*M_hat=%.3f"
         % (m_hat, worst, res.envelopes[-1], 3.0 * m_hat))


def test_ac3_start_independence(sol129, table, hb):
    base, _ = sol129
    rng = np.random.default_rng(12345)
    U0 = 1e-3 * rng.standard_normal(base.grid.shape)
    V0 = 1e-3 * rng.standard_normal(base.grid.shape)
    U0[0, :] = V0[0, :] = 0.0
    seeded = solve(table, hb, shape=(129, 129), tol=1e-10, max_iters=60,
                   init=(U0, V0))
    dev = max(float(np.max(np.abs(seeded.U - base.U))),
              float(np.max(np.abs(seeded.V - base.V))))
    ok = dev <= 1e-9
    emit("AC3", ok,
         "fixed point from zero vs perturbed start: max field dev "
         "%.2e <= 1e-9" % dev)


def test_ac4_boundary_traces(wz129, hb):
    g = wz129.grid
    d_sonic = float(np.max(np.abs(wz129.W[0, :] - hb.w_sonic(g.chis))))
    d_sonic = max(d_sonic,
                  float(np.max(np.abs(wz129.Z[0, :] + hb.w_sonic(g.chis)))))
    d_char = float(np.max(np.abs(wz129.W[:, 0] - hb.char.b0_bar(g.ups))))
    defect = hb.corner_defect()
    ok = d_sonic <= 1e-9 and d_char <= 1e-9 and defect <= 1e-8
    emit("AC4", ok,
         "invariant traces: sonic-edge dev %.2e <= 1e-9, char-edge dev "
         "%.2e <= 1e-9, corner defect %.2e <= 1e-8"
         % (d_sonic, d_char, defect))


def test_ac5_residual_convergence(report):
    checks = report.checks
    o_min = min(min(c.order_linf, c.order_l2) for c in checks)
    f_min = min(c.corruption_factor for c in checks)
    ok = all(c.passed for c in checks) and o_min >= 0.9 and f_min >= 10.0
    emit("AC5", ok,
         "residual checks (%s): min order %.2f >= 0.9, min corruption "
         "trip %.0fx >= 10x"
         % (",".join(c.name for c in checks), o_min, f_min))


def test_ac6_physical_map(fm129, wz129, hb, table):
    xs, ys = hb.char.point_of_t(fm129.ups)
    landing = float(np.max(np.hypot(fm129.X[:, 0] - np.asarray(xs),
                                    fm129.Y[:, 0] - np.asarray(ys))))
    rng = np.random.default_rng(777)
    worst_rt = 0.0
    for t, chi in zip(0.1 * rng.random(100), 0.1 * rng.random(100)):
        x, y = fm129.point(t, chi)
        tb, chib, _ = invert_map(fm129, float(x), float(y))
        xb, yb = fm129.point(tb, chib)
        worst_rt = max(worst_rt,
                       float(np.hypot(float(xb) - float(x),
                                      float(yb) - float(y))))
    j = jacobian_j(wz129, table)
    one_signed = bool(np.all(j[1:, :] < 0.0))
    jcol = np.abs(j[1:, j.shape[1] // 2])
    power = float(np.polyfit(np.log(wz129.grid.ups[1:]), np.log(jcol), 1)[0])
    ok = (landing <= 1e-6 and worst_rt <= 1e-8 and one_signed
          and abs(power - 1.0) <= 0.1)
    emit("AC6", ok,
         "physical map: arc landing %.2e <= 1e-6, worst roundtrip of 100 "
         "points %.2e <= 1e-8, jacobian one-signed=%s with t-power %.3f"
         % (landing, worst_rt, one_signed, power))


def test_ac7_conservation_and_field_off(wz129, table, newtonian):
    bern = bernoulli_audit(wz129, table)
    nt = newtonian
    rep0 = run_verification([(nt["fms"][1], nt["wzs"][1]),
                             (nt["fms"][2], nt["wzs"][2])],
                            nt["hb"], nt["table"],
                            results=nt["results"], wz_fields=nt["wzs"])
    bern0 = rep0.bernoulli
    ok = (bern["passed"] and bern["bernoulli_rel_dev"] <= 1e-8
          and bern["mach_min"] >= 1.0 and bern["q_max"] < bern["q_limit"]
          and rep0.passed and bern0["bernoulli_rel_dev"] <= 1e-8)
    emit("AC7", ok,
         "conserved head: rel dev %.2e <= 1e-8, M >= %.6f, q_max %.3f < "
         "q_hat %.3f; zero-field rerun passed=%s (rel dev %.2e)"
         % (bern["bernoulli_rel_dev"], bern["mach_min"], bern["q_max"],
            bern["q_limit"], rep0.passed, bern0["bernoulli_rel_dev"]))


def test_ac8_frozen_reference_values(table, hb, curve, newtonian):
    live = {
        "BERNOULLI": table.params.B,
        "N_AT_0P9": table.number_density(0.9),
        "N_CLOSED_0P9": table.number_density(0.9),
        "RHO_SONIC": table.rho_sonic,
        "LIMIT_SPEED": table.q_hat,
        "RHO_SONIC_NEWT": newtonian["table"].rho_sonic,
        "RHO_AT_T02": table.state_of_t(0.2).rho,
        "Q_AT_RHO07": table.bernoulli_speed(0.7)[0],
        "W_AT_RHO08": table.sound_speed(0.8),
        "G_SONIC": float(table.interp("G", 0.0)),
        "F_AT_T01": float(table.coefficients(0.1).F),
        "F1HAT_AT_T01": float(table.coefficients(0.1).F1hat),
        "RBAR_OFFSET_AT_T02": float(hb.r_bar(0.2)) - hb.r2,
        "CHIBAR_AT_T01": float(hb.chi_bar(0.1)),
        "I_AT_T015": float(table.I_of_t(0.15)),
        "Q_AT_T015": float(table.Q_of_t(0.15)),
        "Q_FULL": float(table.Q_of_t(0.0)),
        "TAU1_SAMPLE": tau1_of(table, 0.08, float(hb.chi_bar(0.08)) / 2.0),
        "A0HAT_MID": float(a0_hat(curve, 0.5)),
        "A1HAT_MID": float(a1_hat(curve, 0.5)),
        "B0BAR_AT_T02": float(hb.char.b0_bar(0.2)),
    }
    devs = {k: abs(v - getattr(fz, k)) / abs(getattr(fz, k))
            for k, v in live.items()}
    worst = max(devs, key=devs.get)
    ok = devs[worst] <= 1e-8 and len(devs) == 21
    emit("AC8", ok,
         "%d frozen reference values reproduced; worst rel dev %.2e "
         "(%s) <= 1e-8" % (len(devs), devs[worst], worst))
