"""Recovery of the physical-plane flow from the hodograph solution.

The hodograph unknowns live on the rectangle (upsilon, chi); the physical
coordinates are recovered by integrating the inverse-map differentials.
Two independent routes are kept deliberately:

* the forward surface integrates the column differentials (through W) up
  from the sonic anchors, one exact antiderivative per grid column;
* trace_xy integrates the cross-characteristic differentials (through Z)
  from either the sonic curve or the characteristic arc with a fixed-step
  RK4 on a freshly interpolated field.

Their agreement, the landing of the chi = 0 column on the characteristic
arc, and the invertibility checks are what the verification suite consumes.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .errors import BracketError, InversionError

_T_EVAL_FLOOR = 1e-9


@dataclass(frozen=True)
class ForwardMapSample:
    """Physical coordinates of the hodograph grid nodes.

    The seam-adapted columns cluster at cubically small separations, so the
    surface splines are built over (upsilon, column index) rather than
    (upsilon, zeta); the grid's column maps convert on the way in and out.
    """

    grid: object
    ups: np.ndarray
    chis: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    x_anchor: np.ndarray
    y_anchor: np.ndarray
    _sx: RectBivariateSpline = field(repr=False)
    _sy: RectBivariateSpline = field(repr=False)

    def point(self, t, chi):
        pos = self.grid.col_pos(chi)
        return (self._sx.ev(t, pos), self._sy.ev(t, pos))

    def partials(self, t, chi):
        """Map partials with respect to (t, chi) at the query points."""
        pos = self.grid.col_pos(chi)
        dcol = self.grid.dchi_dcol(pos)
        xt = self._sx.ev(t, pos, dx=1)
        xc = self._sx.ev(t, pos, dy=1) / dcol
        yt = self._sy.ev(t, pos, dx=1)
        yc = self._sy.ev(t, pos, dy=1) / dcol
        return xt, xc, yt, yc


def _column_rhs(wz, table):
    """Integrands dx/du, dy/du along constant-chi columns, at grid nodes."""
    ups = wz.grid.ups
    F = np.asarray(table.coefficients(ups).F)[:, None]
    u = ups[:, None]
    s = np.sqrt(1.0 - u ** 2)
    r = wz.r
    cw = wz.W_tilde / (2.0 * F)
    rx = -u * (u * np.cos(r) - s * np.sin(r)) * cw
    ry = -u * (u * np.sin(r) + s * np.cos(r)) * cw
    return rx, ry


def build_forward_map(wz, hb, table) -> ForwardMapSample:
    grid = wz.grid
    x_anchor = np.asarray(hb.sonic.x_hat(hb.r2 - grid.chis), dtype=float)
    y_anchor = np.asarray(hb.sonic.curve.phi(x_anchor), dtype=float)

    rx, ry = _column_rhs(wz, table)
    X = x_anchor[None, :] + CubicSpline(grid.ups, rx, axis=0
                                        ).antiderivative()(grid.ups)
    Y = y_anchor[None, :] + CubicSpline(grid.ups, ry, axis=0
                                        ).antiderivative()(grid.ups)
    cols = np.arange(grid.chis.size, dtype=float)
    sx = RectBivariateSpline(grid.ups, cols, X, kx=3, ky=3)
    sy = RectBivariateSpline(grid.ups, cols, Y, kx=3, ky=3)
    return ForwardMapSample(grid=grid, ups=grid.ups, chis=grid.chis,
                            X=X, Y=Y,
                            x_anchor=x_anchor, y_anchor=y_anchor,
                            _sx=sx, _sy=sy)


def jacobian_j(wz, table):
    """Jacobian density of the physical map, j = -t W~ Z~ / (4F).

    Strictly one-signed for t > 0 iff the patch is a diffeomorphism away
    from the sonic edge; vanishes linearly in t on it.
    """
    ups = wz.grid.ups
    F = np.asarray(table.coefficients(ups).F)[:, None]
    return -ups[:, None] * wz.W_tilde * wz.Z_tilde / (4.0 * F)


def trace_xy(wz, hb, table, t_hat: float, chi_hat: float,
             h_ode: float = 5e-4, _spl=None):
    """Physical point of (t_hat, chi_hat) by integrating along the
    cross-characteristic through the interpolated Z~ field.

    Returns (x, y, err) with err a Richardson estimate from step halving.
    Independent of build_forward_map on purpose.
    """
    grid = wz.grid
    delta = grid.delta
    if not (0.0 <= t_hat <= delta and 0.0 <= chi_hat <= delta):
        raise BracketError("query (%g, %g) outside hodograph rectangle"
                           % (t_hat, chi_hat))
    if _spl is None:
        _spl = trace_spline(wz)
    chib_hat = 2.0 * table.Lambda(t_hat)
    lam_hat = table.Lambda(t_hat)
    if chi_hat >= chib_hat:
        t_start = 0.0
        r_land = hb.r2 + 2.0 * lam_hat - chi_hat
        x0 = float(hb.sonic.x_hat(r_land))
        y0 = float(hb.sonic.curve.phi(x0))
    else:
        from .solver import tau1_of
        t_start = tau1_of(table, t_hat, chi_hat)
        x0, y0 = hb.char.point_of_t(t_start)
        x0, y0 = float(x0), float(y0)

    span = t_hat - t_start
    if span <= 0.0:
        return x0, y0, 0.0

    def rhs(t, _xy):
        F = float(table.interp("F", t))
        r = hb.r2 + lam_hat - chi_hat + float(table.Lambda(t))
        chi = chi_hat + 2.0 * float(table.Lambda(t)) - chib_hat
        pos = float(grid.col_pos(min(max(chi, 0.0), delta)))
        zt = float(_spl.ev(t, pos))
        s = math.sqrt(1.0 - t * t)
        fac = t * zt / (2.0 * F)
        return (fac * (t * math.cos(r) + s * math.sin(r)),
                fac * (t * math.sin(r) - s * math.cos(r)))

    def rk4(nstep):
        h = span / nstep
        x, y = x0, y0
        t = t_start
        for _ in range(nstep):
            k1 = rhs(t, (x, y))
            k2 = rhs(t + 0.5 * h, (x + 0.5 * h * k1[0], y + 0.5 * h * k1[1]))
            k3 = rhs(t + 0.5 * h, (x + 0.5 * h * k2[0], y + 0.5 * h * k2[1]))
            k4 = rhs(t + h, (x + h * k3[0], y + h * k3[1]))
            x += h * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6.0
            y += h * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6.0
            t += h
        return x, y

    n = max(2, int(math.ceil(span / h_ode)))
    xa, ya = rk4(n)
    xb, yb = rk4(2 * n)
    err = math.hypot(xa - xb, ya - yb) / 15.0
    return xb, yb, err


def trace_spline(wz):
    """Shared Z~ interpolant (over column index) for trace_xy calls."""
    cols = np.arange(wz.grid.chis.size, dtype=float)
    return RectBivariateSpline(wz.grid.ups, cols, wz.Z_tilde, kx=3, ky=3)


def invert_map(fm: ForwardMapSample, x, y, tol: float = 1e-12,
               max_newton: int = 60):
    """Invert the forward surface at one physical point.

    Newton runs in (s, p) with s = t^2 and p the fractional column index:
    the square removes the sonic-edge degeneracy of the Jacobian, and the
    column index keeps the step well-scaled across the clustered seam
    columns.  Partials in s use dX/ds = dX/dt / (2t) with a floored t.
    Returns (t, chi, flag); flag is True when the iterate had to be
    clamped against the rectangle boundary.
    """
    delta = float(fm.ups[-1])
    pmax = fm.chis.size - 1.0
    dx = fm.X - x
    dy = fm.Y - y
    i0, j0 = np.unravel_index(np.argmin(dx * dx + dy * dy), fm.X.shape)
    s = float(fm.ups[i0]) ** 2
    p = float(j0)
    clamped = False
    for _ in range(max_newton):
        t = math.sqrt(max(s, 0.0))
        te = max(t, _T_EVAL_FLOOR)
        rx = float(fm._sx.ev(t, p)) - x
        ry = float(fm._sy.ev(t, p)) - y
        if abs(rx) <= tol and abs(ry) <= tol:
            return t, float(fm.grid.chi_of_col(p)), clamped
        xs = float(fm._sx.ev(te, p, dx=1)) / (2.0 * te)
        xp = float(fm._sx.ev(te, p, dy=1))
        ys = float(fm._sy.ev(te, p, dx=1)) / (2.0 * te)
        yp = float(fm._sy.ev(te, p, dy=1))
        det = xs * yp - xp * ys
        if det == 0.0:
            raise InversionError("singular jacobian at (%g, col %g)"
                                 % (t, p))
        ds = (-rx * yp + ry * xp) / det
        dp = (-ry * xs + rx * ys) / det
        s_new = s + ds
        p_new = p + dp
        if s_new < 0.0 or s_new > delta ** 2 or p_new < 0.0 or p_new > pmax:
            clamped = True
        s = min(max(s_new, 0.0), delta ** 2)
        p = min(max(p_new, 0.0), pmax)
    t = math.sqrt(max(s, 0.0))
    res = math.hypot(float(fm._sx.ev(t, p)) - x, float(fm._sy.ev(t, p)) - y)
    if res > 1e-9:
        raise InversionError("newton stalled at residual %g for (%g, %g)"
                             % (res, x, y))
    return t, float(fm.grid.chi_of_col(p)), clamped


def invert_map_batch(fm: ForwardMapSample, xs, ys, tol: float = 1e-12,
                     max_newton: int = 40):
    """Vectorized variant of invert_map for lattices of query points.

    Returns (t, chi, ok) arrays; ok is False where Newton finished outside
    the rectangle or above the residual tolerance (points off the patch).
    """
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    delta = float(fm.ups[-1])
    pmax = fm.chis.size - 1.0
    d2 = ((fm.X.ravel()[None, :] - xs[:, None]) ** 2
          + (fm.Y.ravel()[None, :] - ys[:, None]) ** 2)
    seed = np.argmin(d2, axis=1)
    i0, j0 = np.unravel_index(seed, fm.X.shape)
    s = fm.ups[i0] ** 2
    p = j0.astype(float)
    for _ in range(max_newton):
        t = np.sqrt(np.maximum(s, 0.0))
        te = np.maximum(t, _T_EVAL_FLOOR)
        rx = fm._sx.ev(t, p) - xs
        ry = fm._sy.ev(t, p) - ys
        if max(np.abs(rx).max(), np.abs(ry).max()) <= tol:
            break
        xs_d = fm._sx.ev(te, p, dx=1) / (2.0 * te)
        xp = fm._sx.ev(te, p, dy=1)
        ys_d = fm._sy.ev(te, p, dx=1) / (2.0 * te)
        yp = fm._sy.ev(te, p, dy=1)
        det = xs_d * yp - xp * ys_d
        det = np.where(np.abs(det) < 1e-300, 1e-300, det)
        s = s + (-rx * yp + ry * xp) / det
        p = p + (-ry * xs_d + rx * ys_d) / det
        np.clip(s, 0.0, delta ** 2, out=s)
        np.clip(p, 0.0, pmax, out=p)
    t = np.sqrt(np.maximum(s, 0.0))
    rx = fm._sx.ev(t, p) - xs
    ry = fm._sy.ev(t, p) - ys
    # points off the patch stall against the clamped rectangle and keep a
    # visible residual; that is the rejection signal
    ok = np.hypot(rx, ry) <= 1e-9
    return t, np.asarray(fm.grid.chi_of_col(p)), ok


@dataclass(frozen=True)
class PhysicalField:
    """Flow quantities at the grid nodes, physical-plane coordinates."""

    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    varpi: np.ndarray
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    q: np.ndarray
    mach: np.ndarray


def evaluate_fields(wz, fm: ForwardMapSample, table) -> PhysicalField:
    """Velocity and thermodynamic state at the recovered nodes.

    The Mach-like output is recomputed through the state chain (q, gamma,
    w), not copied from 1/varpi, so downstream audits compare two routes.
    """
    grid = wz.grid
    ups = grid.ups
    theta = wz.r
    tcol = np.broadcast_to(ups[:, None], theta.shape)
    varpi = np.sqrt(1.0 - tcol ** 2)
    q = np.broadcast_to(np.asarray(table.interp("q", ups))[:, None],
                        theta.shape)
    w = np.broadcast_to(np.asarray(table.interp("w", ups))[:, None],
                        theta.shape)
    gam = np.asarray(table.interp("gamma", ups))[:, None]
    gw = np.asarray(table.interp("gamma_w", ups))[:, None]
    mach = np.broadcast_to(np.asarray(q * gam / (gw * w)), theta.shape)
    return PhysicalField(x=fm.X, y=fm.Y, theta=theta, varpi=varpi,
                         t=np.asarray(tcol), u=q * np.cos(theta),
                         v=q * np.sin(theta), w=np.asarray(w),
                         q=np.asarray(q), mach=mach)
