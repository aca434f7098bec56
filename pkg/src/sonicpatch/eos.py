"""Pressure laws.

A pressure law supplies p(rho) together with its first two derivatives on
the working density interval.  The solver itself only ever sees these three
callables plus a couple of closed-form hooks, so adding a new law means
subclassing PressureLaw and registering it in build_pressure_law.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError, EosRangeError


class PressureLaw:
    """Abstract convex pressure law."""

    kind = "abstract"
    #: laws with p'' = 0 are admitted for analytic tests only; the genuinely
    #: convex branch of the theory needs i^2 p'' + kappa0^2 n^2 (1-p') > 0,
    #: which a linear law satisfies only with a nonzero magnetic constant.
    test_only = False

    def p(self, rho):
        raise NotImplementedError

    def dp(self, rho):
        raise NotImplementedError

    def d2p(self, rho):
        raise NotImplementedError

    def rest_enthalpy_integral(self, rho0):
        """integral_0^rho0 p'(s)/(s + p(s)) ds, used for the limit speed.

        May return math.inf when the integral diverges at s = 0 (then the
        limiting enthalpy per baryon is zero and the limit speed is 1).
        """
        val, err = quad(lambda s: self.dp(s) / (s + self.p(s)), 0.0, rho0,
                        epsabs=1e-12, epsrel=1e-10, limit=200)
        return val

    def describe(self):
        return {"kind": self.kind, "test_only": self.test_only}


@dataclass(frozen=True)
class PolytropicLaw(PressureLaw):
    """p = A rho**Gamma with A > 0, Gamma > 1."""

    A: float
    Gamma: float

    kind = "polytropic"
    test_only = False

    def p(self, rho):
        return self.A * np.power(rho, self.Gamma)

    def dp(self, rho):
        return self.A * self.Gamma * np.power(rho, self.Gamma - 1.0)

    def d2p(self, rho):
        g = self.Gamma
        return self.A * g * (g - 1.0) * np.power(rho, g - 2.0)

    def describe(self):
        return {"kind": self.kind, "A": self.A, "Gamma": self.Gamma,
                "test_only": self.test_only}


@dataclass(frozen=True)
class AffineLaw(PressureLaw):
    """p = sigma rho with sigma in (0, 1).

    p'' = 0, so this law violates the convexity hypothesis of the pure-gas
    theory; it is kept because the whole thermodynamic chain has closed
    forms against which the quadrature paths can be checked.
    """

    sigma: float

    kind = "affine-linear"
    test_only = True

    def p(self, rho):
        return self.sigma * np.asarray(rho, dtype=float) * 1.0

    def dp(self, rho):
        return self.sigma * np.ones_like(np.asarray(rho, dtype=float))

    def d2p(self, rho):
        return np.zeros_like(np.asarray(rho, dtype=float))

    def rest_enthalpy_integral(self, rho0):
        # p'/(s+p) = sigma/((1+sigma) s): divergent at 0, limit mass is 0
        return float("inf")

    def number_density_closed(self, rho, rho0, n0):
        return n0 * np.power(np.asarray(rho) / rho0, 1.0 / (1.0 + self.sigma))

    def describe(self):
        return {"kind": self.kind, "sigma": self.sigma,
                "test_only": self.test_only}


def build_pressure_law(config):
    """Construct a PressureLaw from a config mapping.

    config must carry 'law' in {'polytropic', 'affine-linear'} plus the
    law's parameters.  Parameter-range violations raise ConfigError; the
    convexity scan over an explicit density interval happens later, at
    state-table build time, where the magnetic term is known.
    """
    kind = config.get("law")
    if kind == "polytropic":
        A = float(config.get("A", 0.0))
        Gamma = float(config.get("Gamma", 0.0))
        if not A > 0.0:
            raise ConfigError("polytropic law needs A > 0, got %r" % A)
        if not Gamma > 1.0:
            raise ConfigError("polytropic law needs Gamma > 1, got %r" % Gamma)
        return PolytropicLaw(A=A, Gamma=Gamma)
    if kind == "affine-linear":
        sigma = float(config.get("sigma", 0.0))
        if not 0.0 < sigma < 1.0:
            raise ConfigError("affine-linear law needs sigma in (0,1), got %r"
                              % sigma)
        return AffineLaw(sigma=sigma)
    raise ConfigError("unknown pressure law %r" % kind)


def check_law_positive(law, rho_lo, rho_hi, mesh=201):
    """Validate p > 0 and p'' >= 0 on a mesh; names the first offender."""
    rr = np.linspace(rho_lo, rho_hi, mesh)
    pv = np.asarray(law.p(rr), dtype=float)
    bad = np.nonzero(~(pv > 0.0))[0]
    if bad.size:
        raise EosRangeError("p(rho) <= 0 at rho = %.17g" % rr[bad[0]])
    cv = np.asarray(law.d2p(rr), dtype=float)
    if not law.test_only:
        bad = np.nonzero(~(cv > 0.0))[0]
        if bad.size:
            raise EosRangeError("p''(rho) <= 0 at rho = %.17g" % rr[bad[0]])
