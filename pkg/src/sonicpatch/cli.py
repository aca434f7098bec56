"""Command-line pipeline: tables -> boundary -> solve -> recover -> verify.

Every artifact is a CSV or JSON file written atomically (a ``.partial``
file is renamed into place, so an interrupted stage leaves only the
suffixed file behind).  Identical config and seed produce byte-identical
CSV artifacts; the manifest records the config hash and library versions
so every file is traceable to the settings that made it.
"""

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__, config as cfg
from .boundary import (CurveSpec, a0_hat, build_hodograph_boundary,
                       wall_denominator)
from .errors import ConfigError, SonicPatchError
from .eos import build_pressure_law
from .recovery import build_forward_map, evaluate_fields
from .solver import choose_delta, recover_WZ, solve, _CONTRACTION_GATE
from .thermo import ThermoParams, ThermoTable, resolve_bernoulli
from .verify import run_verification

_EXIT_CONFIG = 2
_EXIT_STAGE = 3
_EXIT_DELTA = 4


# ----- artifact plumbing ----------------------------------------------------

def _atomic_write(path, text):
    tmp = path + ".partial"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_csv(path, header, columns):
    cols = [np.ravel(np.asarray(c, dtype=float)) for c in columns]
    arr = np.column_stack(cols)
    lines = [header]
    lines.extend(",".join("%.17g" % v for v in row) for row in arr)
    _atomic_write(path, "\n".join(lines) + "\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


class ArtifactSink:
    def __init__(self, out_dir, rcfg, subcommand):
        self.out_dir = out_dir
        self.rcfg = rcfg
        self.subcommand = subcommand
        self.paths = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name):
        p = os.path.join(self.out_dir, name)
        d = os.path.dirname(p)
        if d:
            os.makedirs(d, exist_ok=True)
        self.paths.append(p)
        return p

    def csv(self, name, header, columns):
        _write_csv(self.path(name), header, columns)

    def json(self, name, payload):
        _atomic_write(self.path(name),
                      json.dumps(payload, indent=2, sort_keys=True,
                                 default=float) + "\n")

    def finish(self):
        manifest = {
            "config_sha256": self.rcfg.config_hash(),
            "subcommand": self.subcommand,
            "versions": {
                "python": "%d.%d.%d" % sys.version_info[:3],
                "numpy": np.__version__,
                "scipy": __import__("scipy").__version__,
                "sonicpatch": __version__,
            },
            "artifacts": {
                os.path.relpath(p, self.out_dir): {
                    "sha256": _sha256(p),
                    "bytes": os.path.getsize(p),
                } for p in self.paths
            },
        }
        _atomic_write(os.path.join(self.out_dir, "manifest.json"),
                      json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ----- pipeline stages ------------------------------------------------------

def build_table(rcfg):
    eos = rcfg.eos
    law = build_pressure_law(eos)
    B = resolve_bernoulli(law, eos["kappa0"], eos["n0"], eos["rho0"],
                          eos.get("rho_ref"), eos.get("q_ref"),
                          eos.get("B"))
    params = ThermoParams(kappa0=eos["kappa0"], n0=eos["n0"],
                          rho0=eos["rho0"], B=B,
                          rho_range=tuple(eos["rho_range"]))
    return ThermoTable(law, params, t_max=eos["t_max"],
                       samples=eos["samples"])


def build_boundary(rcfg, table):
    curve = CurveSpec.from_coeffs(**rcfg.boundary)
    return curve, build_hodograph_boundary(curve, table)


def stage_tables(rcfg, table, sink):
    ts = table.ts
    cols = [ts, np.sqrt(1.0 - ts * ts)]
    cols += [table._node[name] for name in
             ("rho", "p", "n", "w", "q", "gamma", "M", "F1hat", "F")]
    cols += [table.I_of_t(ts), table.Q_of_t(ts)]
    sink.csv("tables.csv", "t,varpi,rho,p,n,w,q,gamma,M,F1hat,F,I,Q", cols)


def stage_boundary(rcfg, table, hb, sink):
    rs = np.linspace(hb.r1, hb.r2, 401)
    sink.csv("boundary_sonic.csv", "r,a0hat,a1hat",
             [rs, hb.sonic.a0_of_r(rs), hb.sonic.a1_of_r(rs)])
    ts = np.linspace(0.0, hb.t0, 401)
    sink.csv("boundary_char.csv", "t,b0bar", [ts, hb.char.b0_bar(ts)])


def _delta_or_halt(rcfg, table, hb, log=print):
    """Resolve the patch width; a forced width that the contraction gate
    rejects is an error, with the halving trail logged for diagnosis."""
    forced = rcfg.solver.delta
    used, kd = choose_delta(table, hb, forced, rcfg.solver.max_halvings)
    if forced is not None and used < forced:
        d = forced
        while d > used * (1.0 + 1e-12):
            kd_d = table.K_delta(d)
            log("auto-halving: delta=%.17g gives delta^2*K_delta=%.6g "
                "> %.6g" % (d, d * d * kd_d, _CONTRACTION_GATE))
            d *= 0.5
        log("admissible width is %.17g; rerun with that delta or drop the "
            "override" % used)
        return None, None
    return used, kd


def stage_solve(rcfg, table, hb, sink, log=print):
    delta, _ = _delta_or_halt(rcfg, table, hb, log)
    if delta is None:
        return None, None
    out = solve(table, hb, delta=delta, shape=rcfg.solver.grid,
                tol=rcfg.solver.tol, max_iters=rcfg.solver.max_iters,
                max_halvings=rcfg.solver.max_halvings,
                emit_iterations=rcfg.output.emit_iterations)
    wz = recover_WZ(out, hb)
    grid = out.grid
    T = np.broadcast_to(grid.ups[:, None], wz.W.shape)
    sink.csv("solution_WZ.csv", "t,r,W,Z", [T, wz.r, wz.W, wz.Z])
    sink.csv("history.csv", "k,dU,dV,ratio",
             [[st.k for st in out.history],
              [st.dU for st in out.history],
              [st.dV for st in out.history],
              [st.ratio for st in out.history]])
    if out.snapshots is not None:
        CH = np.broadcast_to(grid.chis[None, :], wz.W.shape)
        for k, (Uk, Vk) in enumerate(out.snapshots, start=1):
            sink.csv("iterations/iter_%04d.csv" % k, "upsilon,chi,U,V",
                     [T, CH, Uk, Vk])
    return out, wz


def stage_recover(rcfg, table, hb, wz, sink):
    fm = build_forward_map(wz, hb, table)
    pf = evaluate_fields(wz, fm, table)
    sink.csv("physical.csv", "x,y,theta,varpi,t,u,v,w,q,M",
             [pf.x, pf.y, pf.theta, pf.varpi, pf.t,
              pf.u, pf.v, pf.w, pf.q, pf.mach])
    return fm, pf


def stage_verify(rcfg, table, hb, sink, log=print):
    delta, _ = _delta_or_halt(rcfg, table, hb, log)
    if delta is None:
        return None
    n_t, n_b = rcfg.solver.grid
    # joint 2-refinement needs an even interval count on each axis
    n_t += 1 - n_t % 2
    n_b += 1 - n_b % 2
    shapes = [((n_t + 1) // 2, (n_b + 1) // 2), (n_t, n_b),
              (2 * n_t - 1, 2 * n_b - 1)]
    results, wzs, fms = [], [], []
    for shp in shapes:
        out = solve(table, hb, delta=delta, shape=shp, tol=rcfg.solver.tol,
                    max_iters=rcfg.solver.max_iters,
                    max_halvings=rcfg.solver.max_halvings)
        wz = recover_WZ(out, hb)
        results.append(out)
        wzs.append(wz)
        fms.append(build_forward_map(wz, hb, table))
    rep = run_verification([(fms[1], wzs[1]), (fms[2], wzs[2])], hb, table,
                           results=results, wz_fields=wzs,
                           n=rcfg.recovery.lattice)
    sink.json("report.json", rep.to_dict())
    for c in rep.checks:
        log("%-24s %s  order_linf=%.3f order_l2=%.3f corruption=%.1fx"
            % (c.name, "PASS" if c.passed else "FAIL",
               c.order_linf, c.order_l2, c.corruption_factor))
    log("bernoulli                %s  rel_dev=%.3e"
        % ("PASS" if rep.bernoulli["passed"] else "FAIL",
           rep.bernoulli["bernoulli_rel_dev"]))
    log("convergence              %s  ratio_max=%.3f field_order=%.3f"
        % ("PASS" if rep.convergence["passed"] else "FAIL",
           rep.convergence["ratio_max_k3"],
           rep.convergence["field_order"]))
    return rep


# ----- hypothesis diagnostics -----------------------------------------------

def arc_concavity(char, n=201):
    """Max of the second derivative of the arc profile x = psi(y); the
    construction requires a strictly concave profile (negative values)."""
    ts = np.linspace(char.ts[0], char.ts[-1], n)[1:-1]
    alpha = char.alpha(ts)
    ys = char.point_of_t(ts)[1]
    # psi'(y) = cot(alpha(y)); differentiate through the parametrization
    dal = np.gradient(alpha, ts)
    dy = np.gradient(ys, ts)
    dpsi2 = (-dal / np.sin(alpha) ** 2) / dy
    return float(np.max(dpsi2))


def run_diagnostics(rcfg):
    """Evaluate every standing hypothesis with its measured margin.

    Diagnostics never raise: a failed construction marks its hypothesis
    failed and the dependent checks are reported as skipped.
    """
    diags = []

    def add(name, passed, margin, detail):
        diags.append({"name": name, "passed": bool(passed),
                      "margin": float(margin), "detail": detail})

    curve = CurveSpec.from_coeffs(**rcfg.boundary)
    xs = np.linspace(*curve.x_span, 801)
    thp = curve.theta_hat.deriv()(xs)
    add("wall_angle_decreasing", np.max(thp) < 0.0, -np.max(thp),
        "needs max theta_hat' < 0 over the wall span")
    den = wall_denominator(curve, xs)
    add("wall_denominator_positive", np.min(den) > 0.0, np.min(den),
        "needs cos(theta_hat) + phi' sin(theta_hat) > 0")
    if np.min(den) > 0.0:
        a0s = a0_hat(curve, xs)
        add("sonic_trace_negative", np.max(a0s) < 0.0, -np.max(a0s),
            "needs a0_hat < 0 along the sonic line")
    else:
        add("sonic_trace_negative", False, float("nan"),
            "skipped: wall denominator not positive")

    table = None
    try:
        table = build_table(rcfg)
        add("state_chain_admissible", True, float(np.min(
            np.asarray(table._node["F"]) - 1.0)),
            "convexity, positivity and F > 1 hold on the density window")
        add("limit_speed_margin", True,
            table.q_hat - float(np.max(table._node["q"])),
            "flow speed stays below the limit speed q_hat=%.6g"
            % table.q_hat)
    except SonicPatchError as exc:
        add("state_chain_admissible", False, float("nan"), str(exc))

    hb = None
    if table is not None:
        try:
            hb = build_hodograph_boundary(curve, table)
            add("eps0_positive", hb.eps0 > 0.0, hb.eps0,
                "smallest of the three boundary-data margins")
            add("corner_compatibility", hb.corner_defect() <= 1e-8,
                hb.corner_defect(),
                "|a0_hat(r2) + b0_tilde(y_B)| at the corner")
            psi2 = arc_concavity(hb.char)
            add("arc_concave", psi2 < 0.0, -psi2,
                "needs psi'' < 0 along the characteristic arc")
            cap = min(hb.t0, hb.chi_max, table.t_max)
            try:
                delta, kd = choose_delta(table, hb, rcfg.solver.delta,
                                         rcfg.solver.max_halvings)
                add("contraction_gate", True,
                    _CONTRACTION_GATE - delta * delta * kd,
                    "delta=%.6g gives delta^2*K_delta=%.6g <= 2/9"
                    % (delta, delta * delta * kd))
            except SonicPatchError as exc:
                add("contraction_gate", False, float("nan"), str(exc))
            add("width_within_cap", True, cap,
                "admissible width cap min(t0, chi_max, t_max)=%.6g" % cap)
        except SonicPatchError as exc:
            add("eps0_positive", False, float("nan"), str(exc))
    return diags


def stage_validate(rcfg, sink, log=print):
    diags = run_diagnostics(rcfg)
    for d in diags:
        log("%s %-26s margin=%-12.6g %s"
            % ("PASS" if d["passed"] else "FAIL", d["name"], d["margin"],
               d["detail"]))
    sink.json("validate.json", {"diagnostics": diags,
                                "all_passed": all(d["passed"]
                                                  for d in diags)})
    return diags


# ----- entry point ----------------------------------------------------------

def _parse_grid(text):
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(
            "grid must look like 129x129 (rows x bulk columns)")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="sonicpatch",
        description="Construct and verify a sonic-supersonic flow patch.")
    ap.add_argument("subcommand",
                    choices=["tables", "boundary", "solve", "recover",
                             "verify", "all", "validate"])
    ap.add_argument("--config", metavar="PATH",
                    help="TOML config; omit for the built-in default")
    ap.add_argument("--out-dir", metavar="PATH")
    ap.add_argument("--delta", type=float,
                    help="patch width override (0 = auto)")
    ap.add_argument("--grid", type=_parse_grid, metavar="NxM",
                    help="rows x bulk columns (total columns N+M-1)")
    ap.add_argument("--tol", type=float)
    ap.add_argument("--max-iters", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--emit-iterations", action="store_true", default=None)
    return ap


def _apply_overrides(rcfg, args):
    raw = json.loads(json.dumps(rcfg.raw))
    if args.out_dir is not None:
        raw["output"]["out_dir"] = args.out_dir
    if args.delta is not None:
        raw["solver"]["delta"] = args.delta
    if args.grid is not None:
        raw["solver"]["grid"] = list(args.grid)
    if args.tol is not None:
        raw["solver"]["tol"] = args.tol
    if args.max_iters is not None:
        raw["solver"]["max_iters"] = args.max_iters
    if args.seed is not None:
        raw["output"]["seed"] = args.seed
    if args.emit_iterations:
        raw["output"]["emit_iterations"] = True
    return cfg.from_dict(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rcfg = cfg.load(args.config) if args.config else cfg.canonical()
        rcfg = _apply_overrides(rcfg, args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return _EXIT_CONFIG

    sub = args.subcommand
    sink = ArtifactSink(rcfg.output.out_dir, rcfg, sub)
    stage = "config"
    try:
        if sub == "validate":
            stage_validate(rcfg, sink)
            sink.finish()
            return 0

        stage = "tables"
        table = build_table(rcfg)
        if sub in ("tables", "all"):
            stage_tables(rcfg, table, sink)
        if sub == "tables":
            sink.finish()
            return 0

        stage = "boundary"
        curve, hb = build_boundary(rcfg, table)
        if sub in ("boundary", "all"):
            stage_boundary(rcfg, table, hb, sink)
        if sub == "boundary":
            sink.finish()
            return 0

        if sub == "verify":
            stage = "verify"
            rep = stage_verify(rcfg, table, hb, sink)
            sink.finish()
            if rep is None:
                return _EXIT_DELTA
            return 0 if rep.passed else _EXIT_STAGE

        stage = "solve"
        out, wz = stage_solve(rcfg, table, hb, sink)
        if out is None:
            sink.finish()
            return _EXIT_DELTA
        if sub == "solve":
            sink.finish()
            return 0

        stage = "recover"
        stage_recover(rcfg, table, hb, wz, sink)
        if sub == "recover":
            sink.finish()
            return 0

        stage = "verify"
        rep = stage_verify(rcfg, table, hb, sink)
        sink.finish()
        return 0 if rep is not None and rep.passed else _EXIT_STAGE
    except SonicPatchError as exc:
        print("%s: %s" % (stage, exc), file=sys.stderr)
        return _EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
