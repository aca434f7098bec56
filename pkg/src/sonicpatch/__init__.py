"""Local sonic-supersonic patches for steady irrotational magneto-fluids.

The package builds classical solutions of the steady irrotational
isentropic relativistic MHD system in a small region pinched between a
sonic arc and a characteristic arc: thermodynamic tables for a general
convex pressure law, boundary-trace construction, a degenerate Goursat
solve in a partial hodograph plane, recovery of the physical-plane flow,
and a residual verification suite.
"""

__version__ = "0.1.0"

from .errors import (
    BernoulliError,
    BracketError,
    ConfigError,
    ConvergenceError,
    DomainSizeError,
    EosRangeError,
    HypothesisError,
    InversionError,
    PositivityError,
    QuadratureError,
    SonicPatchError,
    TableRangeError,
)
from .eos import AffineLaw, PolytropicLaw, PressureLaw, build_pressure_law
from .thermo import ThermoParams, ThermoState, ThermoTable, resolve_bernoulli

__all__ = [
    "AffineLaw",
    "BernoulliError",
    "BracketError",
    "ConfigError",
    "ConvergenceError",
    "DomainSizeError",
    "EosRangeError",
    "HypothesisError",
    "InversionError",
    "PolytropicLaw",
    "PositivityError",
    "PressureLaw",
    "QuadratureError",
    "SonicPatchError",
    "TableRangeError",
    "ThermoParams",
    "ThermoState",
    "ThermoTable",
    "__version__",
    "build_pressure_law",
    "resolve_bernoulli",
]
