"""Exception hierarchy for the solver pipeline.

Every error raised by the library derives from SonicPatchError so the CLI
can report the failing stage and exit cleanly.
"""


class SonicPatchError(Exception):
    """Base class for all library errors."""


class ConfigError(SonicPatchError):
    """Invalid or inconsistent run configuration."""


class EosRangeError(SonicPatchError):
    """A pressure-law or state quantity left its admissible range."""


class BernoulliError(SonicPatchError):
    """The Bernoulli closure is infeasible at the requested density."""


class QuadratureError(SonicPatchError):
    """An adaptive quadrature failed to reach its error target."""


class TableRangeError(SonicPatchError):
    """A lookup outside the built state-table interval."""


class HypothesisError(SonicPatchError):
    """A boundary-data hypothesis (sign or smallness condition) failed."""


class BracketError(SonicPatchError):
    """A bracketed root search could not be started or did not converge."""


class DomainSizeError(SonicPatchError):
    """The solver domain is too large for the contraction prerequisites."""


class PositivityError(SonicPatchError):
    """A positivity guard (reciprocal field) was violated."""


class ConvergenceError(SonicPatchError):
    """The fixed-point iteration did not reach tolerance."""


class InversionError(SonicPatchError):
    """The physical-plane inverse map failed for a query point."""
