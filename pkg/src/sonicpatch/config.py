"""Run configuration: TOML schema, validation, canonical defaults.

One structured config file drives the whole pipeline.  Parsing is strict:
unknown keys and malformed values raise ConfigError with the offending
path, so harness scripts fail fast instead of running with silently
dropped settings.
"""

import hashlib
import json
import sys
from dataclasses import dataclass, field
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .errors import ConfigError

_EOS_KEYS = {"law", "A", "Gamma", "sigma", "kappa0", "n0", "rho0",
             "rho_range", "t_max", "rho_ref", "q_ref", "B", "samples"}
_BOUNDARY_KEYS = {"phi", "theta_hat", "x_span", "char_profile", "t0"}
_SOLVER_KEYS = {"delta", "grid", "tol", "max_iters", "max_halvings"}
_RECOVERY_KEYS = {"h_ode", "lattice"}
_OUTPUT_KEYS = {"out_dir", "seed", "emit_iterations"}


def _require(cond, path, msg):
    if not cond:
        raise ConfigError("%s: %s" % (path, msg))


def _check_keys(block, allowed, path):
    extra = set(block) - allowed
    _require(not extra, path, "unknown keys %s" % sorted(extra))


def _floats(seq, path, min_len=1):
    try:
        out = [float(v) for v in seq]
    except (TypeError, ValueError):
        raise ConfigError("%s: expected a list of numbers" % path)
    _require(len(out) >= min_len, path, "needs at least %d entries" % min_len)
    return out


@dataclass(frozen=True)
class SolverBlock:
    delta: Optional[float] = None      # None: largest admissible width
    grid: tuple = (129, 129)           # (rows, bulk columns)
    tol: float = 1e-10
    max_iters: int = 60
    max_halvings: int = 4


@dataclass(frozen=True)
class RecoveryBlock:
    h_ode: float = 5e-4
    lattice: int = 17


@dataclass(frozen=True)
class OutputBlock:
    out_dir: str = "out"
    seed: int = 12345
    emit_iterations: bool = False


@dataclass(frozen=True)
class RunConfig:
    """Validated pipeline settings; `raw` keeps the effective values for
    hashing so artifact manifests can be traced back to them."""

    eos: dict
    boundary: dict
    solver: SolverBlock
    recovery: RecoveryBlock
    output: OutputBlock
    raw: dict = field(repr=False, default_factory=dict)

    def config_hash(self) -> str:
        # out_dir is where artifacts land, not what they contain
        scrubbed = {k: dict(v) for k, v in self.raw.items()}
        scrubbed.get("output", {}).pop("out_dir", None)
        blob = json.dumps(scrubbed, sort_keys=True, separators=(",", ":"),
                          default=float)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _validate_eos(block):
    _check_keys(block, _EOS_KEYS, "eos")
    _require("law" in block, "eos.law", "missing")
    kappa0 = float(block.get("kappa0", 0.0))
    _require(kappa0 >= 0.0, "eos.kappa0", "must be >= 0")
    _require(float(block.get("n0", 0.0)) > 0.0, "eos.n0", "must be > 0")
    _require(float(block.get("rho0", 0.0)) > 0.0, "eos.rho0", "must be > 0")
    rng = _floats(block.get("rho_range", ()), "eos.rho_range", 2)
    _require(0.0 < rng[0] < rng[1], "eos.rho_range",
             "must satisfy 0 < lo < hi")
    t_max = float(block.get("t_max", 0.3))
    _require(0.0 < t_max < 1.0, "eos.t_max", "must lie in (0, 1)")
    have_ref = "rho_ref" in block or "q_ref" in block
    have_b = "B" in block
    _require(have_ref != have_b, "eos",
             "give exactly one of {rho_ref+q_ref, B}")
    if have_ref:
        _require("rho_ref" in block and "q_ref" in block, "eos",
                 "reference state needs both rho_ref and q_ref")
        _require(0.0 < float(block["q_ref"]) < 1.0, "eos.q_ref",
                 "must lie in (0, 1)")
    samples = int(block.get("samples", 801))
    _require(samples >= 101, "eos.samples", "must be >= 101")
    return dict(block, kappa0=kappa0, t_max=t_max, samples=samples,
                rho_range=tuple(rng))


def _validate_boundary(block):
    _check_keys(block, _BOUNDARY_KEYS, "boundary")
    phi = _floats(block.get("phi", ()), "boundary.phi")
    theta = _floats(block.get("theta_hat", ()), "boundary.theta_hat", 2)
    span = _floats(block.get("x_span", ()), "boundary.x_span", 2)
    _require(span[0] < span[1], "boundary.x_span", "must satisfy lo < hi")
    prof = _floats(block.get("char_profile", ()), "boundary.char_profile")
    t0 = float(block.get("t0", 0.0))
    _require(t0 > 0.0, "boundary.t0", "must be > 0")
    return {"phi": phi, "theta_hat": theta, "x_span": tuple(span),
            "char_profile": prof, "t0": t0}


def _validate_solver(block):
    _check_keys(block, _SOLVER_KEYS, "solver")
    delta = block.get("delta")
    if delta is not None:
        delta = float(delta)
        if delta == 0.0:
            delta = None
        else:
            _require(delta > 0.0, "solver.delta", "must be > 0 (0 = auto)")
    grid = block.get("grid", (129, 129))
    try:
        grid = (int(grid[0]), int(grid[1]))
    except (TypeError, ValueError, IndexError):
        raise ConfigError("solver.grid: expected [rows, bulk_columns]")
    _require(grid[0] >= 9 and grid[1] >= 9, "solver.grid",
             "both extents must be >= 9")
    tol = float(block.get("tol", 1e-10))
    _require(tol > 0.0, "solver.tol", "must be > 0")
    max_iters = int(block.get("max_iters", 60))
    _require(max_iters >= 1, "solver.max_iters", "must be >= 1")
    max_halvings = int(block.get("max_halvings", 4))
    _require(max_halvings >= 0, "solver.max_halvings", "must be >= 0")
    return SolverBlock(delta=delta, grid=grid, tol=tol,
                       max_iters=max_iters, max_halvings=max_halvings)


def _validate_recovery(block):
    _check_keys(block, _RECOVERY_KEYS, "recovery")
    h_ode = float(block.get("h_ode", 5e-4))
    _require(h_ode > 0.0, "recovery.h_ode", "must be > 0")
    lattice = int(block.get("lattice", 17))
    _require(lattice >= 5, "recovery.lattice", "must be >= 5")
    return RecoveryBlock(h_ode=h_ode, lattice=lattice)


def _validate_output(block):
    _check_keys(block, _OUTPUT_KEYS, "output")
    seed = int(block.get("seed", 12345))
    _require(seed >= 0, "output.seed", "must be >= 0")
    return OutputBlock(out_dir=str(block.get("out_dir", "out")),
                       seed=seed,
                       emit_iterations=bool(block.get("emit_iterations",
                                                      False)))


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table")
    known = {"eos", "boundary", "solver", "recovery", "output"}
    _check_keys(data, known, "config")
    _require("eos" in data, "eos", "missing section")
    _require("boundary" in data, "boundary", "missing section")
    eos = _validate_eos(dict(data["eos"]))
    boundary = _validate_boundary(dict(data["boundary"]))
    solver = _validate_solver(dict(data.get("solver", {})))
    recovery = _validate_recovery(dict(data.get("recovery", {})))
    output = _validate_output(dict(data.get("output", {})))
    raw = {
        "eos": {k: (list(v) if isinstance(v, tuple) else v)
                for k, v in eos.items()},
        "boundary": {k: (list(v) if isinstance(v, tuple) else v)
                     for k, v in boundary.items()},
        "solver": {"delta": solver.delta, "grid": list(solver.grid),
                   "tol": solver.tol, "max_iters": solver.max_iters,
                   "max_halvings": solver.max_halvings},
        "recovery": {"h_ode": recovery.h_ode, "lattice": recovery.lattice},
        "output": {"out_dir": output.out_dir, "seed": output.seed,
                   "emit_iterations": output.emit_iterations},
    }
    return RunConfig(eos=eos, boundary=boundary, solver=solver,
                     recovery=recovery, output=output, raw=raw)


def load(path: str) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = _toml.load(fh)
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc))
    except _toml.TOMLDecodeError as exc:
        raise ConfigError("config %s is not valid TOML: %s" % (path, exc))
    return from_dict(data)


def canonical_dict() -> dict:
    """The shipped default: a polytropic gas with a weak frozen-in field
    over a gently curved wall with strictly decreasing flow angle."""
    return {
        "eos": {"law": "polytropic", "A": 0.1, "Gamma": 2.0,
                "kappa0": 0.05, "n0": 1.0, "rho0": 0.5,
                "rho_ref": 0.5, "q_ref": 0.4,
                "rho_range": [0.3, 0.9], "t_max": 0.3},
        "boundary": {"phi": [0.0, 0.0, 0.05],
                     "theta_hat": [0.0, -0.2],
                     "x_span": [0.0, 1.0],
                     "char_profile": [0.35, -0.4],
                     "t0": 0.25},
        "solver": {"grid": [129, 129], "tol": 1e-10,
                   "max_iters": 60, "max_halvings": 4},
        "recovery": {"h_ode": 5e-4, "lattice": 17},
        "output": {"out_dir": "out", "seed": 12345,
                   "emit_iterations": False},
    }


def canonical() -> RunConfig:
    return from_dict(canonical_dict())
