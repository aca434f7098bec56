"""Residual verification of a recovered patch.

Every check follows the same discipline: resample the solution onto
coordinates the solver never used, evaluate the governing relations
independently, report norms at two refinement levels plus the fitted
convergence order, and confirm that an injected corruption of known size
trips the residual by a large factor.  A check that cannot detect its own
corruption is vacuous and fails.

Levels refine the solver grid and the sampling lattice together, so both
the frozen discretization error of the fields and the sampling truncation
shrink; the fitted order then reflects the scheme's real convergence
instead of whichever error floor is hit first.

Physical-plane lattices are built in sheared coordinates (x, eta) with
eta = y - phi(x), which follow the thin patch; the shear is undone exactly
in the chain rule, so the residuals are those of the physical-plane
equations.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import DomainSizeError
from .recovery import invert_map_batch

_ORDER_FLOOR = 0.9
_CORRUPTION_FLOOR = 10.0


def _norms(res, mask):
    vals = res[mask]
    if vals.size == 0:
        raise DomainSizeError("no valid lattice points for residual norms")
    linf = float(np.max(np.abs(vals)))
    l2 = float(np.sqrt(np.mean(vals ** 2)))
    return linf, l2, int(vals.size)


def _wiggle(a, b, scale):
    """Smooth O(1) corruption shape, deterministic in the lattice coords."""
    return np.sin(7.3 * a / scale) * np.cos(4.7 * b / scale)


def _wz_splines(wz):
    """Resampling interpolants of W, Z over (upsilon, column index)."""
    cols = np.arange(wz.grid.chis.size, dtype=float)
    sw = RectBivariateSpline(wz.grid.ups, cols, wz.W, kx=3, ky=3)
    sz = RectBivariateSpline(wz.grid.ups, cols, wz.Z, kx=3, ky=3)
    return sw, sz


@dataclass
class CheckResult:
    name: str
    levels: list
    order_linf: float
    order_l2: float
    corruption_factor: float

    @property
    def passed(self):
        return (self.order_l2 >= _ORDER_FLOOR
                and self.order_linf >= _ORDER_FLOOR
                and self.corruption_factor >= _CORRUPTION_FLOOR)

    def to_dict(self):
        return {"name": self.name,
                "levels": [{"h": h, "linf": li, "l2": l2, "points": n}
                           for (h, li, l2, n) in self.levels],
                "order_linf": self.order_linf,
                "order_l2": self.order_l2,
                "corruption_factor": self.corruption_factor,
                "passed": bool(self.passed)}


def physical_window(fm, wz, hb, chi_frac=(0.10, 0.90), t_frac=(0.30, 0.95)):
    """Axis-aligned window in sheared coordinates inside the patch image."""
    grid = wz.grid
    phi = hb.sonic.curve.phi
    eta = fm.Y - phi(fm.X)
    delta = grid.delta
    # column indices bracketing the requested zeta-value range
    ja = int(np.searchsorted(grid.chis, chi_frac[0] * delta))
    jb = int(np.searchsorted(grid.chis, chi_frac[1] * delta))
    jb = min(jb, grid.chis.size - 1)
    N = grid.ups.size
    ia = int(round(t_frac[0] * (N - 1)))
    ib = int(round(t_frac[1] * (N - 1)))
    xa = float(fm.x_anchor[ja])
    xb = float(fm.x_anchor[jb])
    eta_hi = float(np.min(eta[ia, ja:jb + 1]))
    eta_lo = float(np.max(eta[ib, ja:jb + 1]))
    if not eta_lo < eta_hi < 0.0:
        raise DomainSizeError("degenerate sheared window: [%g, %g]"
                              % (eta_lo, eta_hi))
    return xa, xb, eta_lo, eta_hi


def _lattice_state(fm, wz, hb, table, window, n):
    """Invert a sheared lattice and return the angle fields on it."""
    xa, xb, eta_lo, eta_hi = window
    phi = hb.sonic.curve.phi
    xs = np.linspace(xa, xb, n)
    etas = np.linspace(eta_lo, eta_hi, n)
    XX, EE = np.meshgrid(xs, etas, indexing="ij")
    YY = EE + phi(XX)
    t, chi, ok = invert_map_batch(fm, XX, YY)
    t = t.reshape(n, n)
    chi = chi.reshape(n, n)
    ok = ok.reshape(n, n)
    delta = wz.grid.delta
    ok &= (t > 1e-3 * delta) & (t < delta * (1 - 1e-9)) & \
        (chi > 0.0) & (chi < delta * (1 - 1e-9))
    theta = hb.r2 + table.Lambda(t) - chi
    varpi = np.sqrt(1.0 - t ** 2)
    hx = xs[1] - xs[0]
    he = etas[1] - etas[0]
    return dict(XX=XX, EE=EE, t=t, chi=chi, ok=ok, theta=theta,
                varpi=varpi, hx=hx, he=he, phip=phi.deriv()(XX))


def _core_mask(ok):
    core = ok.copy()
    core[0, :] = core[-1, :] = False
    core[:, 0] = core[:, -1] = False
    core[1:-1, 1:-1] &= (ok[:-2, 1:-1] & ok[2:, 1:-1]
                         & ok[1:-1, :-2] & ok[1:-1, 2:])
    return core


def _grad_sheared(g, hx, he, phip):
    """(d/dx, d/dy) of a sheared-lattice field via centered differences."""
    gx = np.full_like(g, np.nan)
    ge = np.full_like(g, np.nan)
    gx[1:-1, :] = (g[2:, :] - g[:-2, :]) / (2.0 * hx)
    ge[:, 1:-1] = (g[:, 2:] - g[:, :-2]) / (2.0 * he)
    return gx - phip * ge, ge


def residual_first_order_angles(fm, wz, hb, table, window, n, corrupt=0.0):
    """Residuals of the two transport relations for (theta, varpi) along
    the forward and backward characteristic directions."""
    st = _lattice_state(fm, wz, hb, table, window, n)
    theta = st["theta"]
    varpi = st["varpi"]
    if corrupt:
        varpi = varpi + corrupt * _wiggle(st["XX"], st["EE"], wz.grid.delta)
        theta = theta + corrupt * _wiggle(st["EE"], st["XX"], wz.grid.delta)
    tx, ty = _grad_sheared(theta, st["hx"], st["he"], st["phip"])
    vx, vy = _grad_sheared(varpi, st["hx"], st["he"], st["phip"])

    t = st["t"]
    F = np.asarray(table.coefficients(t).F)
    fac = t * (1.0 - t ** 2) / F
    omega = np.arcsin(np.clip(st["varpi"], -1.0, 1.0))
    cp = np.cos(theta + omega)
    sp = np.sin(theta + omega)
    cm = np.cos(theta - omega)
    sm = np.sin(theta - omega)
    r_plus = (cp * tx + sp * ty) + fac * (cp * vx + sp * vy)
    r_minus = (cm * tx + sm * ty) - fac * (cm * vx + sm * vy)

    core = _core_mask(st["ok"])
    res = np.concatenate([r_plus[core], r_minus[core]])
    return _norms(res, np.isfinite(res))


def residual_decomposition(fm, wz, hb, table, window, n, corrupt=0.0):
    """Residuals of the gradient decomposition through the invariants.

    Physical gradients of (theta, varpi) are obtained by inverting the
    forward-map Jacobian (spline partials of the recovered surfaces); they
    must match the closed forms built from W and Z at the same points.
    The cross-column partials of the surfaces are emergent, never imposed
    by the column integration, so the comparison is a genuine
    compatibility check, not an algebraic identity.
    """
    st = _lattice_state(fm, wz, hb, table, window, n)
    t = st["t"]
    chi = st["chi"]
    te = np.maximum(t, 1e-9)
    xt, xc, yt, yc = fm.partials(te, chi)
    det = xt * yc - xc * yt
    lam = np.asarray(table.coefficients(t).lam)
    varpi = st["varpi"]
    # theta = r2 + Lambda(t) - chi, varpi = sqrt(1 - t^2) in hodograph vars
    th_t = lam
    th_c = -1.0
    vp_t = -t / varpi
    vp_c = 0.0
    tx = (th_t * yc - th_c * yt) / det
    ty = (th_c * xt - th_t * xc) / det
    vx = (vp_t * yc - vp_c * yt) / det
    vy = (vp_c * xt - vp_t * xc) / det

    grid = wz.grid
    sw, sz = _wz_splines(wz)
    pos = grid.col_pos(chi)
    Wl = sw.ev(t, pos)
    Zl = sz.ev(t, pos)
    if corrupt:
        Wl = Wl + corrupt * _wiggle(st["XX"], st["EE"], grid.delta)
    r = st["theta"]
    s = varpi
    co = table.coefficients(t)
    i2w2 = np.asarray(co.F1hat) / (4.0 * (np.asarray(co.G) + 1.0 - t ** 2))
    pref = np.asarray(co.F1hat) / (4.0 * i2w2 * te)

    sumwz = Wl + Zl
    difwz = Wl - Zl
    f_tx = t * np.sin(r) * sumwz - s * np.cos(r) * difwz
    f_ty = -t * np.cos(r) * sumwz - s * np.sin(r) * difwz
    f_vx = -pref * (t * np.sin(r) * difwz - s * np.cos(r) * sumwz)
    f_vy = pref * (t * np.cos(r) * difwz + s * np.sin(r) * sumwz)

    ok = st["ok"]
    res = np.concatenate([(tx - f_tx)[ok], (ty - f_ty)[ok],
                          (vx - f_vx)[ok], (vy - f_vy)[ok]])
    return _norms(res, np.isfinite(res))


def residual_char_system(wz, hb, table, n, corrupt=0.0):
    """Residuals of the characteristic system for W, Z on a (t, r) lattice.

    The lattice is an axis-aligned rectangle in (t, r), which the solver
    grid is not, so the resampling genuinely exercises the solution."""
    grid = wz.grid
    delta = grid.delta
    r2 = hb.r2
    lam_d = float(table.Lambda(delta))
    ts = np.linspace(0.08 * delta, 0.98 * delta, n)
    rs = np.linspace(r2 + lam_d - 0.98 * delta, r2 - 0.02 * delta, n)
    T, R = np.meshgrid(ts, rs, indexing="ij")
    CHI = r2 + np.asarray(table.Lambda(T)) - R

    sw, sz = _wz_splines(wz)
    POS = grid.col_pos(CHI)
    W = sw.ev(T, POS)
    Z = sz.ev(T, POS)
    if corrupt:
        W = W + corrupt * _wiggle(T, R - r2, delta)

    ht = ts[1] - ts[0]
    hr = rs[1] - rs[0]
    Wt = np.full_like(W, np.nan)
    Wr = np.full_like(W, np.nan)
    Zt = np.full_like(W, np.nan)
    Zr = np.full_like(W, np.nan)
    Wt[1:-1, :] = (W[2:, :] - W[:-2, :]) / (2 * ht)
    Zt[1:-1, :] = (Z[2:, :] - Z[:-2, :]) / (2 * ht)
    Wr[:, 1:-1] = (W[:, 2:] - W[:, :-2]) / (2 * hr)
    Zr[:, 1:-1] = (Z[:, 2:] - Z[:, :-2]) / (2 * hr)

    co = table.coefficients(T)
    F = np.asarray(co.F)
    G = np.asarray(co.G)
    lam = np.asarray(co.lam)
    opg = 1.0 + G
    damp = (G + 2.0 * (1.0 - T ** 2)) * T / F
    r_w = Wt - lam * Wr + opg * W * (W + Z) / (2.0 * Z * F * T) - damp * W
    r_z = Zt + lam * Zr + opg * Z * (W + Z) / (2.0 * W * F * T) - damp * Z

    ok = np.ones_like(W, dtype=bool)
    core = _core_mask(ok)
    res = np.concatenate([r_w[core], r_z[core]])
    return _norms(res, np.isfinite(res))


def _joint_levels(fn_per_level, n, corrupt_size, hs):
    """Run a residual at two solution levels with lattice refined in step;
    corruption is injected at the coarse level."""
    linf1, l21, c1 = fn_per_level(0, n, 0.0)
    linf2, l22, c2 = fn_per_level(1, 2 * n - 1, 0.0)
    linf_c, _, _ = fn_per_level(0, n, corrupt_size)
    order_linf = math.log2(linf1 / linf2) if linf2 > 0 else float("inf")
    order_l2 = math.log2(l21 / l22) if l22 > 0 else float("inf")
    factor = linf_c / linf1 if linf1 > 0 else float("inf")
    return [(hs[0], linf1, l21, c1), (hs[1], linf2, l22, c2)], \
        order_linf, order_l2, factor


def check_first_order_angles(pairs, hb, table, n=17, corrupt_size=1e-3):
    window = physical_window(pairs[0][0], pairs[0][1], hb)
    hs = [p[1].grid.h_ups for p in pairs]

    def fn(lvl, m, c):
        fm, wz = pairs[lvl]
        return residual_first_order_angles(fm, wz, hb, table, window, m, c)

    levels, o1, o2, fac = _joint_levels(fn, n, corrupt_size, hs)
    return CheckResult("first_order_angles", levels, o1, o2, fac)


def check_decomposition(pairs, hb, table, n=17, corrupt_size=1e-3):
    window = physical_window(pairs[0][0], pairs[0][1], hb)
    hs = [p[1].grid.h_ups for p in pairs]

    def fn(lvl, m, c):
        fm, wz = pairs[lvl]
        return residual_decomposition(fm, wz, hb, table, window, m, c)

    levels, o1, o2, fac = _joint_levels(fn, n, corrupt_size, hs)
    return CheckResult("gradient_decomposition", levels, o1, o2, fac)


def check_char_system(pairs, hb, table, n=17, corrupt_size=1e-3):
    hs = [p[1].grid.h_ups for p in pairs]

    def fn(lvl, m, c):
        _, wz = pairs[lvl]
        return residual_char_system(wz, hb, table, m, c)

    levels, o1, o2, fac = _joint_levels(fn, n, corrupt_size, hs)
    return CheckResult("char_system", levels, o1, o2, fac)


def bernoulli_audit(wz, table, quad_rows=9):
    """Recompute the conserved head through the state chain at patch nodes.

    gamma comes from q, the total enthalpy from (p, rho, n); the product
    must reproduce the configured constant.  A subsample of rows also
    recomputes n by quadrature instead of the table spline."""
    ups = wz.grid.ups
    rho = np.asarray(table.interp("rho", ups))
    p = table.law.p(rho)
    nn = np.asarray(table.interp("n", ups))
    q = np.asarray(table.interp("q", ups))
    w = np.asarray(table.interp("w", ups))
    k2 = table.params.kappa0 ** 2
    itot = p + rho + k2 * nn ** 2
    gam = 1.0 / np.sqrt(1.0 - q ** 2)
    b_dev = float(np.max(np.abs(gam * itot / nn - table.params.B))
                  / table.params.B)

    idx = np.linspace(0, ups.size - 1, quad_rows).astype(int)
    n_quad = np.array([table.number_density(float(r)) for r in rho[idx]])
    n_dev = float(np.max(np.abs(n_quad - nn[idx]) / n_quad))

    gw = 1.0 / np.sqrt(1.0 - w ** 2)
    mach = q * gam / (gw * w)
    varpi = np.sqrt(1.0 - ups ** 2)
    mach_dev = float(np.max(np.abs(mach * varpi - 1.0)))
    return {"bernoulli_rel_dev": b_dev,
            "density_quad_rel_dev": n_dev,
            "mach_route_dev": mach_dev,
            "mach_min": float(np.min(mach)),
            "q_max": float(np.max(q)),
            "q_limit": float(table.q_hat),
            "passed": bool(b_dev <= 1e-8 and np.min(mach) >= 1.0 - 1e-12
                           and np.max(q) < table.q_hat)}


def convergence_audit(results, wz_fields):
    """Contraction-rate and grid-refinement diagnostics.

    results: SolveResult at increasing resolutions (same delta).
    wz_fields: matching WZField objects; consecutive pairs are compared on
    shared nodes (each grid is a 2-refinement of the previous)."""
    fine = results[-1]
    ratios = [st.ratio for st in fine.history[2:] if st.ratio == st.ratio]
    ratio_max = max(ratios) if ratios else float("nan")

    # envelopes[i] belongs to sweep k = i + 1, bounded by the partial
    # geometric sum through k (the first sweep saturates it by definition
    # of M_hat)
    geo = [sum((2.0 / 3.0) ** j for j in range(k + 2))
           for k in range(len(fine.envelopes))]
    env_ok = all(e <= fine.M_hat * g * (1.0 + 1e-9)
                 for e, g in zip(fine.envelopes, geo))
    env_final_ok = fine.envelopes[-1] <= 3.0 * fine.M_hat

    diffs = []
    for a, b in zip(wz_fields[:-1], wz_fields[1:]):
        na = a.grid.ups.size
        nb = b.grid.ups.size
        step = (nb - 1) // (na - 1)
        dw = float(np.max(np.abs(a.W - b.W[::step, ::step])))
        dz = float(np.max(np.abs(a.Z - b.Z[::step, ::step])))
        diffs.append(max(dw, dz))
    order = math.log2(diffs[0] / diffs[1]) if len(diffs) >= 2 and \
        diffs[1] > 0 else float("nan")
    return {"ratio_max_k3": ratio_max,
            "iterations": fine.iterations,
            "envelope_bound_ok": bool(env_ok),
            "envelope_final_ok": bool(env_final_ok),
            "M_hat": fine.M_hat,
            "field_diffs": diffs,
            "field_order": order,
            "passed": bool(ratio_max <= 0.7 and env_ok and env_final_ok
                           and (order != order or order >= 0.9))}


@dataclass
class ResidualReport:
    checks: list
    bernoulli: dict
    convergence: dict

    @property
    def passed(self):
        return (all(c.passed for c in self.checks)
                and self.bernoulli.get("passed", False)
                and self.convergence.get("passed", False))

    def to_dict(self):
        return {"checks": [c.to_dict() for c in self.checks],
                "bernoulli": self.bernoulli,
                "convergence": self.convergence,
                "passed": bool(self.passed)}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, **kw)


def run_verification(pairs, hb, table, results=None, wz_fields=None,
                     n=17) -> ResidualReport:
    """pairs: [(forward_map, wz_field)] at two grid resolutions, coarse
    then fine; the residual levels refine lattice and grid together."""
    checks = [
        check_first_order_angles(pairs, hb, table, n=n),
        check_decomposition(pairs, hb, table, n=n),
        check_char_system(pairs, hb, table, n=n),
    ]
    bern = bernoulli_audit(pairs[-1][1], table)
    if results is not None and wz_fields is not None:
        conv = convergence_audit(results, wz_fields)
    else:
        conv = {"passed": True, "skipped": True}
    return ResidualReport(checks=checks, bernoulli=bern, convergence=conv)
