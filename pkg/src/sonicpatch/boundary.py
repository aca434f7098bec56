"""Boundary data for the sonic patch.

Two arcs feed the hodograph problem.  The sonic arc is prescribed directly:
a wall curve x -> (x, phi(x)) carries a flow-angle profile theta_hat(x), and
the leading-order expansion of the stream deflection off the sonic line
yields the trace data a0_hat, a1_hat along it.  The characteristic arc is
built the other way around: a strictly positive profile b0_bar(t) for the
outgoing Riemann-invariant trace is chosen first, and the arc that realizes
it is integrated from the corner, so the compatibility between the curve
shape and the trace data holds by construction instead of by root-solving.
A residual of the root-solving route is still exposed for cross-checks.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import BracketError, HypothesisError, TableRangeError

_MESH = 513


def _as_poly(obj) -> Polynomial:
    if isinstance(obj, Polynomial):
        return obj
    return Polynomial(np.asarray(obj, dtype=float))


@dataclass(frozen=True)
class CurveSpec:
    """Wall geometry and prescribed data on it.

    phi: wall profile y = phi(x), convex upstream bump or any smooth shape.
    theta_hat: flow angle along the wall, strictly decreasing.
    x_span: (x_B, x_C) with x_B the corner abscissa.
    char_profile: polynomial c(t); the characteristic-side trace is
        b0_bar(t) = -a0_hat(x_B) + a1_hat(x_B) t + t^2 c(t).
    t0: parameter length of the characteristic arc, 0 < t0 < t_max.
    """

    phi: Polynomial
    theta_hat: Polynomial
    x_span: tuple
    char_profile: Polynomial
    t0: float

    @classmethod
    def from_coeffs(cls, phi, theta_hat, x_span, char_profile, t0):
        return cls(_as_poly(phi), _as_poly(theta_hat),
                   (float(x_span[0]), float(x_span[1])),
                   _as_poly(char_profile), float(t0))

    @property
    def corner(self):
        x_b = self.x_span[0]
        return (x_b, float(self.phi(x_b)))


def wall_denominator(curve: CurveSpec, x):
    th = curve.theta_hat(x)
    return curve.phi.deriv()(x) * np.sin(th) + np.cos(th)


def a0_hat(curve: CurveSpec, x):
    """Sonic-line trace coefficient; must stay <= -eps for hyperbolicity."""
    den = wall_denominator(curve, x)
    if np.any(np.asarray(den) <= 0.0):
        raise HypothesisError("wall tangent turns against the flow angle")
    return curve.theta_hat.deriv()(x) / (2.0 * den)


def a1_hat(curve: CurveSpec, x):
    th = curve.theta_hat(x)
    phip = curve.phi.deriv()(x)
    num = phip * np.cos(th) - np.sin(th)
    den = np.cos(th) + phip * np.sin(th)
    return a0_hat(curve, x) * num / den


def _a0_hat_dx(curve: CurveSpec, x):
    th = curve.theta_hat(x)
    thp = curve.theta_hat.deriv()(x)
    thpp = curve.theta_hat.deriv(2)(x)
    phip = curve.phi.deriv()(x)
    phipp = curve.phi.deriv(2)(x)
    den = phip * np.sin(th) + np.cos(th)
    dden = phipp * np.sin(th) + phip * np.cos(th) * thp - np.sin(th) * thp
    return thpp / (2.0 * den) - thp * dden / (2.0 * den * den)


def _a1_hat_dx(curve: CurveSpec, x):
    th = curve.theta_hat(x)
    thp = curve.theta_hat.deriv()(x)
    phip = curve.phi.deriv()(x)
    phipp = curve.phi.deriv(2)(x)
    num = phip * np.cos(th) - np.sin(th)
    den = np.cos(th) + phip * np.sin(th)
    dnum = phipp * np.cos(th) - phip * np.sin(th) * thp - np.cos(th) * thp
    dden = -np.sin(th) * thp + phipp * np.sin(th) + phip * np.cos(th) * thp
    a0 = a0_hat(curve, x)
    da0 = _a0_hat_dx(curve, x)
    return da0 * num / den + a0 * dnum / den - a0 * num * dden / (den * den)


@dataclass(frozen=True)
class SonicBoundaryData:
    """Trace data along the sonic arc, reparametrized by the angle r."""

    curve: CurveSpec
    r1: float
    r2: float
    _cache: dict = field(default_factory=dict, repr=False)

    def x_hat(self, r):
        """Inverse of theta_hat: abscissa where the wall angle equals r."""
        if np.ndim(r):
            return np.array([self.x_hat(float(ri)) for ri in np.ravel(r)
                             ]).reshape(np.shape(r))
        r = float(r)
        hit = self._cache.get(r)
        if hit is not None:
            return hit
        x_b, x_c = self.curve.x_span
        if not (self.r1 - 1e-12 <= r <= self.r2 + 1e-12):
            raise BracketError("angle %g outside wall range [%g, %g]"
                               % (r, self.r1, self.r2))
        r = min(max(r, self.r1), self.r2)
        f = lambda x: float(self.curve.theta_hat(x)) - r
        if abs(f(x_b)) < 1e-15:
            val = x_b
        elif abs(f(x_c)) < 1e-15:
            val = x_c
        else:
            val = brentq(f, x_b, x_c, xtol=1e-15, rtol=8.9e-16)
        self._cache[r] = val
        return val

    def a0_of_r(self, r):
        return a0_hat(self.curve, self.x_hat(r))

    def a1_of_r(self, r):
        return a1_hat(self.curve, self.x_hat(r))

    def da0_dr(self, r):
        x = self.x_hat(r)
        return _a0_hat_dx(self.curve, x) / self.curve.theta_hat.deriv()(x)

    def da1_dr(self, r):
        x = self.x_hat(r)
        return _a1_hat_dx(self.curve, x) / self.curve.theta_hat.deriv()(x)


def build_sonic_data(curve: CurveSpec) -> SonicBoundaryData:
    x_b, x_c = curve.x_span
    if not x_c > x_b:
        raise HypothesisError("wall span must have x_C > x_B")
    xs = np.linspace(x_b, x_c, _MESH)
    thp = curve.theta_hat.deriv()(xs)
    if np.any(thp >= 0.0):
        raise HypothesisError("wall angle must be strictly decreasing")
    if np.any(wall_denominator(curve, xs) <= 0.0):
        raise HypothesisError("wall tangent turns against the flow angle")
    a0s = a0_hat(curve, xs)
    if np.any(a0s >= 0.0):
        raise HypothesisError("sonic trace coefficient must stay negative")
    r2 = float(curve.theta_hat(x_b))
    r1 = float(curve.theta_hat(x_c))
    return SonicBoundaryData(curve=curve, r1=r1, r2=r2)


def r_bar(table, r2: float, t):
    """Base characteristic in the hodograph plane, r = r2 + Lambda(t)."""
    return r2 + table.Lambda(t)


def chi_bar(table, u):
    """Width of the region swept by reflected characteristics at level u."""
    return 2.0 * table.Lambda(u)


@dataclass(frozen=True)
class CharBoundaryData:
    """Characteristic arc integrated from the chosen trace profile.

    The arc leaves the corner B tangentially to the incoming characteristic
    direction and is parametrized by t (decreasing y).  All per-point
    quantities are exact compositions through t; only the inverse map
    y -> t uses a spline root.
    """

    table: object
    b0_poly: Polynomial
    t0: float
    r2: float
    x_b: float
    y_b: float
    ts: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    _x_spl: CubicSpline = field(repr=False)
    _y_spl: CubicSpline = field(repr=False)

    @property
    def y_a(self):
        return float(self.ys[-1])

    def b0_bar(self, t):
        return self.b0_poly(t)

    def alpha(self, t):
        """Inclination of the arc tangent measured from the x-axis."""
        return r_bar(self.table, self.r2, t) + np.arccos(np.clip(t, -1, 1))

    def point_of_t(self, t):
        return (self._x_spl(t), self._y_spl(t))

    def t_of_y(self, y):
        if np.ndim(y):
            return np.array([self.t_of_y(float(v)) for v in np.ravel(y)
                             ]).reshape(np.shape(y))
        y = float(y)
        if y > self.y_b + 1e-13 or y < self.y_a - 1e-13:
            raise BracketError("ordinate %g outside arc range [%g, %g]"
                               % (y, self.y_a, self.y_b))
        if y >= self.y_b:
            return 0.0
        if y <= self.y_a:
            return self.t0
        f = lambda t: float(self._y_spl(t)) - y
        return brentq(f, 0.0, self.t0, xtol=1e-15, rtol=8.9e-16)

    def psi_prime_of_t(self, t):
        return 1.0 / np.tan(self.alpha(t))

    def psi_prime(self, y):
        return self.psi_prime_of_t(self.t_of_y(y))

    def psi_second(self, y):
        t = self.t_of_y(y)
        lam = self.table.coefficients(t).lam
        alpha = self.alpha(np.asarray(t))
        dalpha = lam - 1.0 / np.sqrt(1.0 - np.asarray(t) ** 2)
        dpsip_dt = -dalpha / np.sin(alpha) ** 2
        return dpsip_dt * self._dt_dy(t)

    def _dt_dy(self, t):
        # dy/dt = sin(alpha) ds/dt = -sin(alpha) t / (2 F b0_bar); diverges
        # like 1/t at the corner (square-root cusp of t(y) there).
        t = np.asarray(t, dtype=float)
        F = self.table.coefficients(t).F
        return -2.0 * F * self.b0_poly(t) / (t * np.sin(self.alpha(t)))

    def dvarpi_dy(self, t):
        """Slope of varpi along the arc; the 1/t of dt/dy cancels against
        the t of dvarpi/dt, so this stays finite at the corner."""
        t = np.asarray(t, dtype=float)
        varpi = np.sqrt(1.0 - t ** 2)
        F = self.table.coefficients(t).F
        return 2.0 * F * self.b0_poly(t) / (varpi * np.sin(self.alpha(t)))

    def varpi_tilde(self, y):
        t = self.t_of_y(y)
        return np.sqrt(1.0 - np.asarray(t) ** 2)

    def theta_tilde(self, y):
        return r_bar(self.table, self.r2, self.t_of_y(y))

    def dtheta_tilde_dy(self, y):
        t = np.asarray(self.t_of_y(y), dtype=float)
        coeff = self.table.coefficients(t)
        i2w2 = coeff.F1hat / (4.0 * (coeff.G + 1.0 - t ** 2))
        return -4.0 * i2w2 * self.dvarpi_dy(t) * t / coeff.F1hat

    def b0_tilde(self, y):
        """Trace coefficient recomputed from the curve-side formula.

        Independent route: uses the slope of varpi along the arc and the
        arclength factor, not the defining profile.  Agreement with
        b0_bar(t(y)) validates the construction.
        """
        t = np.asarray(self.t_of_y(y), dtype=float)
        varpi = np.sqrt(1.0 - t ** 2)
        coeff = self.table.coefficients(t)
        i2w2 = coeff.F1hat / (4.0 * (coeff.G + 1.0 - t ** 2))
        alpha = self.alpha(t)
        sqrt_fac = 1.0 / np.sin(alpha)
        return 2.0 * i2w2 * self.dvarpi_dy(t) / \
            (varpi * coeff.F1hat * sqrt_fac)

    def varpi_from_riemann(self, y):
        """Dual route for varpi on the arc via the Riemann-invariant balance.

        Solves  asin(v) - Q(v) = arccot(psi'(y)) - (r2 + Q(1))  for v.
        Returns the root; callers compare against varpi_tilde(y).
        """
        table = self.table
        q_full = table.Q_of_t(0.0)
        psip = float(self.psi_prime(y))
        target = (math.pi / 2.0 - math.atan(psip)) - (self.r2 + q_full)

        def g(v):
            tt = math.sqrt(max(1.0 - v * v, 0.0))
            return math.asin(v) - table.Q_of_t(tt) - target

        lo = table.varpi_lo
        hi = 1.0
        glo, ghi = g(lo), g(hi)
        if glo > 0.0 or ghi < 0.0:
            raise BracketError("riemann balance has no root in [%g, 1]" % lo)
        return brentq(g, lo, hi, xtol=1e-14, rtol=8.9e-16)

    def slope_margin(self, n=101):
        """min over the arc of F - t^2 (1 - t^2), positivity of which makes
        the riemann balance monotone in varpi."""
        ts = np.linspace(0.0, self.t0, n)
        F = self.table.coefficients(ts).F
        return float(np.min(F - ts ** 2 * (1.0 - ts ** 2)))


def derive_characteristic_data(curve: CurveSpec, table) -> CharBoundaryData:
    x_b, y_b = curve.corner
    t0 = curve.t0
    if not 0.0 < t0 < table.t_max:
        raise TableRangeError("arc parameter t0=%g must lie in (0, t_max=%g)"
                              % (t0, table.t_max))
    r2 = float(curve.theta_hat(x_b))
    a0_b = float(a0_hat(curve, x_b))
    a1_b = float(a1_hat(curve, x_b))

    prof = curve.char_profile
    coeffs = np.zeros(2 + prof.degree() + 1)
    coeffs[0] = -a0_b
    coeffs[1] = a1_b
    coeffs[2:] = prof.coef
    b0_poly = Polynomial(coeffs)

    ts = np.linspace(0.0, t0, _MESH)
    b0s = b0_poly(ts)
    if np.any(b0s <= 0.0):
        raise HypothesisError("characteristic trace profile must stay "
                              "positive on [0, t0]; min %g" % b0s.min())

    alpha0 = r2 + math.pi / 2.0
    alphas = r2 + table.Lambda(ts) + np.arccos(ts)
    if np.any(np.sin(alphas) <= 0.0):
        raise HypothesisError("characteristic arc tangent leaves the upper "
                              "half plane")

    def rhs(t, _state):
        F = float(table.interp("F", t))
        ds_dt = -t / (2.0 * F * float(b0_poly(t)))
        al = r2 + float(table.Lambda(t)) + math.acos(min(max(t, -1.0), 1.0))
        return [math.cos(al) * ds_dt, math.sin(al) * ds_dt]

    sol = solve_ivp(rhs, (0.0, t0), [x_b, y_b], method="DOP853",
                    t_eval=ts, rtol=1e-12, atol=1e-14)
    if not sol.success:
        raise BracketError("characteristic arc integration failed: "
                           + sol.message)
    xs, ys = sol.y

    if np.any(np.diff(ys) >= 0.0):
        raise HypothesisError("characteristic arc must descend strictly")

    # x'(0) = cos(alpha0) * 0 = 0 and y'(0) = 0: clamp both ends' slopes
    # to the analytic tangent for spline accuracy near the cusp.
    dsdt_end = -t0 / (2.0 * float(table.interp("F", t0)) * float(b0_poly(t0)))
    al_end = float(alphas[-1])
    x_spl = CubicSpline(ts, xs, bc_type=((1, 0.0),
                                         (1, math.cos(al_end) * dsdt_end)))
    y_spl = CubicSpline(ts, ys, bc_type=((1, 0.0),
                                         (1, math.sin(al_end) * dsdt_end)))
    del alpha0

    return CharBoundaryData(table=table, b0_poly=b0_poly, t0=t0, r2=r2,
                            x_b=x_b, y_b=y_b, ts=ts, xs=xs, ys=ys,
                            _x_spl=x_spl, _y_spl=y_spl)


@dataclass(frozen=True)
class HodographBoundary:
    """Everything the degenerate Goursat solver needs, in (t, chi) form.

    chi measures arc length backwards along the sonic line from the corner:
    chi = r2 - r.  The reciprocal traces a0, a1, b0, b1 absorb the
    nonlinear change of unknowns that removes the corner singularity.
    """

    sonic: SonicBoundaryData
    char: CharBoundaryData
    table: object
    eps0: float

    @property
    def r1(self):
        return self.sonic.r1

    @property
    def r2(self):
        return self.sonic.r2

    @property
    def t0(self):
        return self.char.t0

    @property
    def chi_max(self):
        return self.r2 - self.r1

    def r_bar(self, t):
        return r_bar(self.table, self.r2, t)

    def chi_bar(self, u):
        return chi_bar(self.table, u)

    def a0(self, chi):
        return -1.0 / self.sonic.a0_of_r(self.r2 - np.asarray(chi))

    def a1(self, chi):
        r = self.r2 - np.asarray(chi)
        return np.asarray(self.sonic.a1_of_r(r)) / \
            np.asarray(self.sonic.a0_of_r(r)) ** 2

    def da0(self, chi):
        r = self.r2 - np.asarray(chi)
        a0h = np.asarray(self.sonic.a0_of_r(r))
        return -np.asarray(self.sonic.da0_dr(r)) / a0h ** 2

    def da1(self, chi):
        r = self.r2 - np.asarray(chi)
        a0h = np.asarray(self.sonic.a0_of_r(r))
        a1h = np.asarray(self.sonic.a1_of_r(r))
        da0h = np.asarray(self.sonic.da0_dr(r))
        da1h = np.asarray(self.sonic.da1_dr(r))
        return -(da1h / a0h ** 2 - 2.0 * a1h * da0h / a0h ** 3)

    def b0(self, u):
        return 1.0 / self.char.b0_bar(u)

    def b1(self, u):
        u = np.asarray(u, dtype=float)
        return self.b0(u) - self.a0(0.0) + self.a1(0.0) * u

    def w_sonic(self, chi):
        """W-trace on the degenerate edge t=0 (equals -a0_hat there)."""
        return -np.asarray(self.sonic.a0_of_r(self.r2 - np.asarray(chi)))

    def corner_defect(self, t_probe=1e-3):
        """|a0_hat(r2) + b0_tilde(y_B)| through the independent route.

        b0_tilde has a removable limit at the corner, so it is sampled just
        inside the arc at t_probe, t_probe/2, t_probe/4 and extrapolated
        quadratically to t = 0."""
        vals = []
        for t in (t_probe, 0.5 * t_probe, 0.25 * t_probe):
            y = float(self.char._y_spl(t))
            vals.append(float(self.char.b0_tilde(y)))
        b0t = (vals[0] - 6.0 * vals[1] + 8.0 * vals[2]) / 3.0
        return abs(float(self.sonic.a0_of_r(self.r2)) + b0t)


def build_hodograph_boundary(curve: CurveSpec, table) -> HodographBoundary:
    sonic = build_sonic_data(curve)
    char = derive_characteristic_data(curve, table)

    xs = np.linspace(*curve.x_span, _MESH)
    cand1 = -np.max(curve.theta_hat.deriv()(xs))
    cand2 = -np.max(a0_hat(curve, xs))
    ts = np.linspace(0.0, char.t0, _MESH)
    cand3 = np.min(char.b0_bar(ts))
    eps0 = float(min(cand1, cand2, cand3))
    if eps0 <= 0.0:
        raise HypothesisError("boundary data degenerate: eps0 = %g" % eps0)

    hb = HodographBoundary(sonic=sonic, char=char, table=table, eps0=eps0)

    b1_0 = float(hb.b1(0.0))
    if abs(b1_0) > 1e-12:
        raise HypothesisError("corner mismatch in reciprocal traces: "
                              "b1(0) = %g" % b1_0)
    # b1'(0) = -b0_bar'(0)/b0_bar(0)^2 + a1(0); the two terms come through
    # independent routes (polynomial coefficients vs root-solved x_hat), so
    # this is a genuine cross-check, not a tautology.
    db1_0 = float(-char.b0_poly.deriv()(0.0) / char.b0_poly(0.0) ** 2
                  + hb.a1(0.0))
    if abs(db1_0) > 1e-10:
        raise HypothesisError("corner slope mismatch: b1'(0) = %g" % db1_0)
    return hb
