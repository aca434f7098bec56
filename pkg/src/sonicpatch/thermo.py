"""State algebra: everything between the pressure law and the solver.

The single hodograph variable t parametrizes supersonic states through
M = 1/sqrt(1 - t^2), where M is the proper Mach number.  A ThermoTable
samples the full state chain on a uniform t grid, wraps the samples in
interpolants, and exposes the scalar coefficient functions the degenerate
characteristic system needs (F, F1hat, the eigenvalue, the semi-linear
coefficient groups) together with the integrated Riemann-type quantities
I and Q.

Conventions: c = 1 throughout; i = p + rho is the enthalpy density and
i_tot = i + kappa0^2 n^2 includes the magnetic contribution.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import (BernoulliError, BracketError, EosRangeError,
                     QuadratureError, TableRangeError)

_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-12, limit=200)


@dataclass(frozen=True)
class ThermoParams:
    """Frozen-in constant, reference densities and the Bernoulli constant."""

    kappa0: float
    n0: float
    rho0: float
    B: float
    rho_range: tuple

    def __post_init__(self):
        if self.kappa0 < 0.0:
            raise EosRangeError("kappa0 must be >= 0")
        if not (self.n0 > 0.0 and self.rho0 > 0.0):
            raise EosRangeError("n0 and rho0 must be positive")
        lo, hi = self.rho_range
        if not 0.0 < lo < hi:
            raise EosRangeError("rho_range must satisfy 0 < lo < hi")


@dataclass(frozen=True)
class ThermoState:
    rho: float
    p: float
    n: float
    i: float
    i_tot: float
    w: float
    q: float
    gamma: float
    gamma_w: float
    M: float
    varpi: float
    t: float


@dataclass(frozen=True)
class Coefficients:
    """Scalar coefficient group of the semi-linear characteristic system.

    G is the recurring bracket (i_tot * curv * gamma_w^2 * f) / (2 i^2 w^2);
    c1 = G + 2 - t^2 and c2 = G + 2(1 - t^2) are the two bracketed factors,
    lam is the (t, r)-plane slope t^2 sqrt(1-t^2)/F and lam_plus = 2 lam.
    """

    F1hat: object
    F: object
    f: object
    G: object
    lam: object
    lam_plus: object
    c1: object
    c2: object


def resolve_bernoulli(law, kappa0, n0, rho0, rho_ref=None, q_ref=None,
                      B=None):
    """Pin the Bernoulli constant directly or through a reference state."""
    have_ref = rho_ref is not None and q_ref is not None
    if B is not None and have_ref:
        raise BernoulliError("give either B or a reference state, not both")
    if B is not None:
        if not B > 0.0:
            raise BernoulliError("B must be positive")
        return float(B)
    if not have_ref:
        raise BernoulliError("need B or a reference state (rho_ref, q_ref)")
    if not 0.0 < q_ref < 1.0:
        raise BernoulliError("reference speed must lie in (0, 1)")
    val, err = quad(lambda s: 1.0 / (s + law.p(s)), rho0, rho_ref,
                    **_QUAD_OPTS)
    n_ref = n0 * math.exp(val)
    i_tot = rho_ref + float(law.p(rho_ref)) + kappa0 ** 2 * n_ref ** 2
    gamma_ref = 1.0 / math.sqrt(1.0 - q_ref ** 2)
    return gamma_ref * i_tot / n_ref


class ThermoTable:
    """Immutable sampled state chain over t in [0, t_max].

    Construction validates the convexity/hyperbolicity conditions on a
    density mesh, locates the sonic density, then samples every coefficient
    on a uniform t grid.  All interpolants pin the exact derivative at t = 0
    so the even symmetry of the state functions survives interpolation.
    """

    def __init__(self, law, params, t_max=0.3, samples=801):
        if not 0.0 < t_max < 1.0:
            raise TableRangeError("t_max must lie in (0, 1)")
        self.law = law
        self.params = params
        self.t_max = float(t_max)
        self._ncache = {}
        self._scache = {}

        self._validate_mesh()
        self.rho_sonic = self._find_sonic()
        self.q_hat = self._limit_speed()
        self._build_grid(samples)
        self._closure_audit()

    # ----- scalar chain ---------------------------------------------------

    def number_density(self, rho):
        """n(rho) = n0 exp(integral_rho0^rho ds/(s + p(s)))."""
        rho = float(rho)
        got = self._ncache.get(rho)
        if got is None:
            val, err = quad(lambda s: 1.0 / (s + self.law.p(s)),
                            self.params.rho0, rho, **_QUAD_OPTS)
            if err > 1e-10 * max(1.0, abs(val)):
                raise QuadratureError(
                    "number-density quadrature error %.3e at rho=%.17g"
                    % (err, rho))
            got = self.params.n0 * math.exp(val)
            self._ncache[rho] = got
        return got

    def enthalpy(self, rho):
        return rho + float(self.law.p(rho))

    def total_enthalpy(self, rho):
        n = self.number_density(rho)
        return self.enthalpy(rho) + self.params.kappa0 ** 2 * n * n

    def sound_speed(self, rho):
        """Magneto-acoustic speed w = sqrt(p' + kappa0^2 n^2/(p + rho))."""
        n = self.number_density(rho)
        w2 = float(self.law.dp(rho)) \
            + self.params.kappa0 ** 2 * n * n / self.enthalpy(rho)
        if not 0.0 < w2 < 1.0:
            raise EosRangeError(
                "w^2 = %.17g outside (0, 1) at rho = %.17g" % (w2, rho))
        return math.sqrt(w2)

    def bernoulli_speed(self, rho):
        """Flow speed and Lorentz factor pinned by the Bernoulli constant."""
        n = self.number_density(rho)
        i_tot = self.enthalpy(rho) + self.params.kappa0 ** 2 * n * n
        gamma = self.params.B * n / i_tot
        if gamma < 1.0:
            raise BernoulliError(
                "Bernoulli closure infeasible (gamma = %.17g < 1) at "
                "rho = %.17g" % (gamma, rho))
        q = math.sqrt(max(0.0, 1.0 - 1.0 / (gamma * gamma)))
        return q, gamma

    def mach(self, rho):
        q, gamma = self.bernoulli_speed(rho)
        w = self.sound_speed(rho)
        gamma_w = 1.0 / math.sqrt(1.0 - w * w)
        return gamma * q / (gamma_w * w)

    def _chain(self, rho):
        """Everything at one density, including the coefficient brackets."""
        par = self.params
        n = self.number_density(rho)
        p = float(self.law.p(rho))
        dp = float(self.law.dp(rho))
        d2p = float(self.law.d2p(rho))
        i = rho + p
        mag = par.kappa0 ** 2 * n * n
        i_tot = i + mag
        w2 = dp + mag / i
        if not 0.0 < w2 < 1.0:
            raise EosRangeError(
                "w^2 outside (0,1) at rho = %.17g" % rho)
        w = math.sqrt(w2)
        gamma_w = 1.0 / math.sqrt(1.0 - w2)
        gamma = par.B * n / i_tot
        if gamma < 1.0:
            raise BernoulliError(
                "Bernoulli closure infeasible at rho = %.17g" % rho)
        q = math.sqrt(max(0.0, 1.0 - 1.0 / (gamma * gamma)))
        mach = gamma * q / (gamma_w * w)
        curv = i * i * d2p + mag * (1.0 - dp)
        if not curv > 0.0:
            raise EosRangeError(
                "i^2 p'' + kappa0^2 n^2 (1 - p') <= 0 at rho = %.17g "
                "(degenerate coefficient chain)" % rho)
        f = gamma_w ** 2 + 2.0 * i * i * w2 * w2 / (i_tot * curv)
        big_g = i_tot * curv * gamma_w ** 2 * f / (2.0 * i * i * w2)
        return dict(rho=rho, p=p, n=n, i=i, i_tot=i_tot, w=w, q=q,
                    gamma=gamma, gamma_w=gamma_w, M=mach, curv=curv,
                    f=f, G=big_g, i2w2=i * i * w2)

    # ----- construction helpers -------------------------------------------

    def _validate_mesh(self, mesh=201):
        from .eos import check_law_positive
        lo, hi = self.params.rho_range
        check_law_positive(self.law, lo, hi, mesh)
        rr = np.linspace(lo, hi, mesh)
        qs = np.empty(mesh)
        ws = np.empty(mesh)
        ms = np.empty(mesh)
        for k, rho in enumerate(rr):
            ch = self._chain(float(rho))   # raises with the offending rho
            qs[k], ws[k], ms[k] = ch["q"], ch["w"], ch["M"]
        if not np.all(np.diff(qs) < 0.0):
            raise EosRangeError("q(rho) is not strictly decreasing on the "
                                "configured interval")
        if not np.all(np.diff(ws) > 0.0):
            raise EosRangeError("w(rho) is not strictly increasing on the "
                                "configured interval")
        if not np.all(np.diff(ms) < 0.0):
            raise EosRangeError("M(rho) is not strictly decreasing on the "
                                "configured interval")
        if not (ms[0] > 1.0 and ms[-1] < 1.0):
            raise BracketError(
                "M - 1 does not change sign on rho_range = [%.17g, %.17g] "
                "(M goes %.6g -> %.6g); sonic state not bracketed"
                % (lo, hi, ms[0], ms[-1]))
        m_need = 1.0 / math.sqrt(1.0 - self.t_max ** 2)
        if ms[0] <= m_need:
            raise TableRangeError(
                "t_max = %.6g unreachable: M at rho_range[0] is %.6g < %.6g"
                % (self.t_max, ms[0], m_need))

    def _find_sonic(self):
        lo, hi = self.params.rho_range
        rho = brentq(lambda r: self.mach(r) - 1.0, lo, hi, xtol=1e-14)
        return float(rho)

    def _limit_speed(self):
        par = self.params
        rest = self.law.rest_enthalpy_integral(par.rho0)
        if math.isinf(rest):
            return 1.0
        m_eff = (par.rho0 + float(self.law.p(par.rho0))) / par.n0 \
            * math.exp(-rest)
        if par.B <= m_eff:
            raise BernoulliError(
                "Bernoulli constant %.17g below the limiting enthalpy per "
                "baryon %.17g; no vacuum limit" % (par.B, m_eff))
        return math.sqrt(1.0 - (m_eff / par.B) ** 2)

    def _rho_of_t_exact(self, t):
        if t == 0.0:
            return self.rho_sonic
        target = 1.0 / math.sqrt(1.0 - t * t)
        lo = self.params.rho_range[0]
        return float(brentq(lambda r: self.mach(r) - target,
                            lo, self.rho_sonic, xtol=1e-14))

    def _build_grid(self, samples):
        ts = np.linspace(0.0, self.t_max, samples)
        cols = ("rho", "p", "n", "i", "i_tot", "w", "q", "gamma", "gamma_w",
                "M", "f", "G", "i2w2")
        data = {c: np.empty(samples) for c in cols}
        for k, t in enumerate(ts):
            ch = self._chain(self._rho_of_t_exact(float(t)))
            for c in cols:
                data[c][k] = ch[c]
        self.ts = ts
        self._node = data
        one_mt2 = 1.0 - ts * ts
        F1hat = 4.0 * data["i2w2"] * (data["G"] + one_mt2)
        F = one_mt2 * (data["G"] + one_mt2)
        lam = ts * ts * np.sqrt(one_mt2) / F
        if not np.all(F > 1.0):
            raise TableRangeError("F(t) <= 1 inside the table; shrink t_max")
        self._node["F1hat"] = F1hat
        self._node["F"] = F
        self._node["lam"] = lam

        def even_spline(vals):
            return CubicSpline(ts, vals, bc_type=((1, 0.0), "not-a-knot"))

        self._spl = {name: even_spline(self._node[name])
                     for name in ("rho", "n", "p", "i", "i_tot", "w", "q",
                                  "gamma", "gamma_w", "f", "G", "F1hat",
                                  "F", "lam", "i2w2")}
        self._spl_lambda = self._spl["lam"].antiderivative()
        # integrand of I in t form is t/(2F): slope 1/(2F(0)) at the origin
        half = ts / (2.0 * F)
        self._spl_half = CubicSpline(
            ts, half, bc_type=((1, 1.0 / (2.0 * F[0])), "not-a-knot"))
        self._spl_half_anti = self._spl_half.antiderivative()
        self.varpi_lo = math.sqrt(1.0 - self.t_max ** 2)

    def _closure_audit(self):
        dev = np.abs(self._node["gamma"] * self._node["i_tot"]
                     / self._node["n"] - self.params.B) / self.params.B
        worst = float(dev.max())
        if worst > 1e-10:
            raise BernoulliError(
                "Bernoulli closure violated on the table (max relative "
                "deviation %.3e)" % worst)

    # ----- public lookups ---------------------------------------------------

    def _check_t(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-12) or np.any(t > self.t_max + 1e-12):
            raise TableRangeError(
                "t outside the built table [0, %.6g]" % self.t_max)
        return np.clip(t, 0.0, self.t_max)

    def sonic_state(self):
        return self.state_of_t(0.0)

    def state_of_t(self, t):
        """The unique supersonic state with cos(omega) = t (root-found)."""
        t = float(t)
        got = self._scache.get(t)
        if got is not None:
            return got
        self._check_t(t)
        rho = self._rho_of_t_exact(t)
        ch = self._chain(rho)
        st = ThermoState(rho=ch["rho"], p=ch["p"], n=ch["n"], i=ch["i"],
                         i_tot=ch["i_tot"], w=ch["w"], q=ch["q"],
                         gamma=ch["gamma"], gamma_w=ch["gamma_w"],
                         M=ch["M"], varpi=math.sqrt(1.0 - t * t), t=t)
        self._scache[t] = st
        return st

    def interp(self, name, t):
        """Vectorized interpolant lookup for a sampled column."""
        t = self._check_t(t)
        return self._spl[name](t)

    def coefficients(self, t):
        t = self._check_t(t)
        G = self._spl["G"](t)
        one_mt2 = 1.0 - t * t
        F = self._spl["F"](t)
        F1hat = self._spl["F1hat"](t)
        lam = t * t * np.sqrt(one_mt2) / F
        return Coefficients(F1hat=F1hat, F=F, f=self._spl["f"](t), G=G,
                            lam=lam, lam_plus=2.0 * lam,
                            c1=G + 2.0 - t * t, c2=G + 2.0 * one_mt2)

    def Lambda(self, t):
        """integral_0^t of the (t, r)-plane characteristic slope."""
        t = self._check_t(t)
        return self._spl_lambda(t)

    def I_of_t(self, t):
        """I(varpi(t)); zero at t = t_max (the configured lower bound)."""
        t = self._check_t(t)
        return self._spl_half_anti(self.t_max) - self._spl_half_anti(t)

    def Q_of_t(self, t):
        t = self._check_t(t)
        return self._spl_lambda(self.t_max) - self._spl_lambda(t)

    def _t_of_varpi(self, varpi):
        varpi = float(varpi)
        if varpi > 1.0 + 1e-12 or varpi < self.varpi_lo - 1e-12:
            raise TableRangeError(
                "varpi = %.17g outside [%.17g, 1]" % (varpi, self.varpi_lo))
        varpi = min(1.0, max(self.varpi_lo, varpi))
        return math.sqrt(max(0.0, 1.0 - varpi * varpi))

    def I_of_varpi(self, varpi):
        """Adaptive quadrature of 2 i^2 w^2/(s F1(s)) from varpi_lo."""
        tv = self._t_of_varpi(varpi)

        def integrand(s):
            t = math.sqrt(max(0.0, 1.0 - s * s))
            return 2.0 * self._spl["i2w2"](t) / (s * self._spl["F1hat"](t))

        val, err = quad(integrand, self.varpi_lo, float(varpi), **_QUAD_OPTS)
        if err > 1e-9 * max(1.0, abs(val)):
            raise QuadratureError("I quadrature error %.3e" % err)
        return val

    def Q_of_varpi(self, varpi):
        """Adaptive quadrature of 4 i^2 w^2 sqrt(1-s^2)/F1(s) from varpi_lo.

        Evaluated after the exact substitution s = sqrt(1-u^2), which removes
        the square-root cusp of the integrand at s = 1.
        """
        tv = self._t_of_varpi(varpi)

        def integrand(u):
            one = 1.0 - u * u
            return 4.0 * self._spl["i2w2"](u) * u * u \
                / (math.sqrt(one) * self._spl["F1hat"](u))

        val, err = quad(integrand, tv, self.t_max, **_QUAD_OPTS)
        if err > 1e-9 * max(1.0, abs(val)):
            raise QuadratureError("Q quadrature error %.3e" % err)
        return val

    def K_delta(self, delta, mesh=401):
        """sup over [0, delta] of 1/F and of the two coefficient brackets."""
        tt = np.linspace(0.0, min(delta, self.t_max), mesh)
        co = self.coefficients(tt)
        return float(np.max(np.maximum.reduce(
            [1.0 / co.F, co.c1 / co.F, co.c2 / co.F])))

    def table_rows(self, resolution=129):
        """Dump columns t,varpi,rho,p,n,w,q,gamma,M,F1hat,F,I,Q."""
        tt = np.linspace(0.0, self.t_max, resolution)
        varpi = np.sqrt(1.0 - tt * tt)
        co = self.coefficients(tt)
        cols = [tt, varpi, self._spl["rho"](tt), self._spl["p"](tt),
                self._spl["n"](tt), self._spl["w"](tt), self._spl["q"](tt),
                self._spl["gamma"](tt), 1.0 / varpi, co.F1hat, co.F,
                self.I_of_t(tt), self.Q_of_t(tt)]
        return np.column_stack(cols)
