"""Command-line front end.

Subcommands: catalog, construct, energy, minimize, lav-scan, vary, approx,
falsify, dini, report.  Every run writes its outputs plus a manifest sidecar
(config hash, package version, worker cap) so identical configs reproduce
identical bytes; all floats print as shortest round-trip decimals via repr.

Exit codes: 0 success; 1 a probe found a violation certificate (so CI can
assert both presence and absence); 2 invalid configuration; 3 computation
error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__, construction, lagrangian, probes, solver, special
from .energy import energy as energy_of
from .trajectory import PLTrajectory

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_BAD_CONFIG = 2
EXIT_COMPUTE = 3

_CATALOG_BLURBS = {
    "quadratic_gradient": "||p||^2 control case; affine minimizers",
    "tonelli_singular": "capped-linear weight around the densely singular w, plus p^2",
    "dense_osc": "(y - v)^2 p^8 with the dyadic ramp staircase v",
    "dense_osc_lav": "dense_osc pinned at 0: Lipschitz energies stay above 2^-56",
    "mania_reg": "dense_osc_lav + eps p^2 below the gap constant",
    "superlinear_osc": "w-weight plus (y - w)^2 omega(p), omega superlinear",
    "lav_coercive": "one-sided version with g-ramp recentering and Theta penalty",
    "cusp_vector": "planar cusp (|t|, sign(t)|t|^(1/3)) with p2^6 weight",
}


def _fail(code: int, msg: str):
    print(f"error: {msg}", file=sys.stderr)
    raise SystemExit(code)


def _floats(text: str):
    return [float(x) for x in text.split(",") if x != ""]


def _load_params(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        return lagrangian._params_from_json(json.load(fh))


def _load_traj(path: str) -> PLTrajectory:
    with open(path) as fh:
        return PLTrajectory.from_json(json.load(fh))


def _spec_from_args(args) -> lagrangian.LagrangianSpec:
    params = _load_params(getattr(args, "params", None))
    return lagrangian.make(args.entry, params)


def _mesh_from_args(spec, args) -> np.ndarray:
    n = int(getattr(args, "mesh", 64) or 64)
    a, b = spec.domain
    mesh = np.linspace(a, b, n + 1)
    return np.unique(np.concatenate([mesh, [x for x in spec.anchors if a < x < b]]))


def _write_outputs(args, payloads: dict, config: dict) -> None:
    """payloads: filename suffix -> text.  Without --out, print to stdout."""
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    manifest = {
        "config": config,
        "config_sha256": hashlib.sha256(blob).hexdigest(),
        "version": __version__,
        "varlab_threads": int(os.environ.get("VARLAB_THREADS", "1") or 1),
    }
    out = getattr(args, "out", None)
    if out:
        for suffix, text in payloads.items():
            path = out if len(payloads) == 1 else f"{out}{suffix}"
            with open(path, "w") as fh:
                fh.write(text)
        with open(f"{out}.manifest.json", "w") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=1)
    else:
        for _, text in payloads.items():
            sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _config_of(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in vars(args).items() if k not in skip}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_catalog(args):
    lines = [f"{name}: {_CATALOG_BLURBS[name]}" for name in lagrangian.ENTRIES]
    _write_outputs(args, {".txt": "\n".join(lines) + "\n"}, _config_of(args))
    return EXIT_OK


def cmd_construct(args):
    T = special.pick_T()
    points = _floats(args.points) if args.points else [0.0, T / 2.0]
    points = points[: args.stages + 1] if args.stages is not None else points
    kw = {}
    if args.mode == "illustrative":
        if not (args.t_schedule and args.r_schedule):
            _fail(EXIT_BAD_CONFIG, "illustrative mode needs --t-schedule and --r-schedule")
        kw = {"t_schedule": _floats(args.t_schedule), "r_schedule": _floats(args.r_schedule)}
    st = construction.build(points, mode=args.mode, T=T, **kw)
    reports = [construction.verify_stage(st, n, grid=args.grid) for n in range(st.built_upto + 1)]
    ok = all(r.all_passed for r in reports)
    lines = []
    for r in reports:
        for c in r.checks:
            lines.append(f"stage {r.stage} {'PASS' if c.passed else 'FAIL'} {c.name} margin={c.margin!r}")
    summary = "\n".join(lines) + "\n"
    payloads = {
        ".state.json": st.dumps(),
        ".verify.txt": summary,
    }
    _write_outputs(args, payloads, _config_of(args))
    if args.mode == "faithful" and not ok:
        return EXIT_COMPUTE
    return EXIT_OK


def cmd_energy(args):
    spec = _spec_from_args(args)
    traj = _load_traj(args.traj) if args.traj else spec.reference_pl()
    est = energy_of(spec, traj, tol=args.tol)
    payloads = {".json": json.dumps(est.to_json()), ".csv": est.to_csv()}
    _write_outputs(args, payloads, _config_of(args))
    return EXIT_OK


def cmd_minimize(args):
    spec = _spec_from_args(args)
    bc = _floats(args.bc) if args.bc else list(spec.reference_bc())
    mesh = _mesh_from_args(spec, args)
    if args.method == "dp":
        res = solver.minimize_dp(spec, bc, mesh, slope_bound=args.M,
                                 grid_size=args.grid_size)
    else:
        init = PLTrajectory(mesh, np.linspace(bc[0], bc[1], len(mesh)))
        res = solver.minimize_descent(spec, bc, init, seed=args.seed)
    _write_outputs(args, {".json": json.dumps(res.to_json())}, _config_of(args))
    return EXIT_OK


def cmd_lav_scan(args):
    spec = _spec_from_args(args)
    bc = _floats(args.bc) if args.bc else list(spec.reference_bc())
    meshes = []
    for n in (int(x) for x in args.mesh.split(",")):
        a, b = spec.domain
        m = np.unique(np.concatenate([np.linspace(a, b, n + 1),
                                      [x for x in spec.anchors if a < x < b],
                                      [x for x in spec.breakpoints if a < x < b]]))
        meshes.append(m)
    table = solver.lavrentiev_scan(spec, bc, _floats(args.M), meshes,
                                   value_grid_size=args.grid_size)
    _write_outputs(args, {".csv": table.to_csv(),
                          ".json": json.dumps(table.to_json())}, _config_of(args))
    return EXIT_OK


def cmd_vary(args):
    spec = _spec_from_args(args)
    base = _load_traj(args.traj) if args.traj else spec.reference_pl()
    direction = _load_traj(args.dir)
    gammas = _floats(args.gammas)
    curve = probes.vary(spec, base, direction, gammas, tol=args.tol)
    rows = ["gamma,energy,error_bound"]
    rows += [f"{g!r},{val!r},{err!r}" for g, val, err in curve.rows()]
    _write_outputs(args, {".csv": "\n".join(rows) + "\n"}, _config_of(args))
    return EXIT_OK


def cmd_approx(args):
    spec = _spec_from_args(args)
    traj = _load_traj(args.traj) if args.traj else spec.reference_pl()
    lo, hi = _floats(args.U)
    res = probes.affine_replace(spec, traj, (lo, hi), args.epsilon, seed=args.seed)
    out = {
        "branch": res.branch, "window": list(res.window), "m": res.m,
        "achieved": res.achieved, "epsilon": res.epsilon,
        "succeeded": res.succeeded, "iterations": res.iterations,
        "trajectory": res.u.to_json(),
    }
    _write_outputs(args, {".json": json.dumps(out)}, _config_of(args))
    return EXIT_OK if res.succeeded else EXIT_COMPUTE


def cmd_falsify(args):
    spec = _spec_from_args(args)
    traj = _load_traj(args.traj) if args.traj else spec.reference_pl()
    windows = []
    for chunk in args.windows.split(";"):
        lo, hi = _floats(chunk)
        windows.append((lo, hi))
    certs = probes.chord_falsify(spec, traj, args.R, windows, tol=args.tol)
    payload = json.dumps({"certificates": [c.to_json() for c in certs]})
    _write_outputs(args, {".json": payload}, _config_of(args))
    return EXIT_VIOLATION if certs else EXIT_OK


def cmd_dini(args):
    T = special.pick_T()
    points = _floats(args.points) if args.points else [0.0, T / 2.0]
    st = construction.build(points, mode="faithful", T=T)
    cert = construction.dini_certificate(st, args.n, args.k_max)
    _write_outputs(args, {".json": json.dumps(cert)}, _config_of(args))
    return EXIT_OK


def cmd_report(args):
    spec = _spec_from_args(args)
    traj = _load_traj(args.traj) if args.traj else spec.reference_pl()
    rep = probes.necessary_condition_report(spec, traj, args.at)
    payload = {
        "point": rep.point,
        "flags": [
            {
                "component": f.component, "kink": f.kink,
                "finite_infinite_mismatch": f.finite_infinite_mismatch,
                "approx_continuity_failure": f.approx_continuity_failure,
            }
            for f in rep.flags
        ],
        "certificates": [c.to_json() for c in rep.certificates],
        "scales_searched": rep.scales_searched,
        "note": rep.note,
    }
    _write_outputs(args, {".json": json.dumps(payload)}, _config_of(args))
    return EXIT_VIOLATION if rep.certificates else EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="varlab",
                                description="variational pathology laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, entry=True):
        if entry:
            sp.add_argument("--entry", required=True, choices=lagrangian.ENTRIES)
            sp.add_argument("--params", help="JSON file of entry parameters")
        sp.add_argument("--tol", type=float, default=1e-9)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output path stem")

    sp = sub.add_parser("catalog", help="list the Lagrangian catalog")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_catalog)

    sp = sub.add_parser("construct", help="build and verify the singular construction")
    sp.add_argument("--points", help="comma list, first must be 0")
    sp.add_argument("--stages", type=int, help="cap the number of stages")
    sp.add_argument("--mode", choices=("faithful", "illustrative"), default="faithful")
    sp.add_argument("--t-schedule", dest="t_schedule")
    sp.add_argument("--r-schedule", dest="r_schedule")
    sp.add_argument("--grid", type=int, default=2048)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_construct)

    sp = sub.add_parser("energy", help="energy of a trajectory under an entry")
    common(sp)
    sp.add_argument("--traj", help="trajectory JSON (default: the reference)")
    sp.set_defaults(func=cmd_energy)

    sp = sub.add_parser("minimize", help="direct-method minimization")
    common(sp)
    sp.add_argument("--bc", help="A,B boundary values")
    sp.add_argument("--mesh", type=int, default=64)
    sp.add_argument("--method", choices=("dp", "descent"), default="dp")
    sp.add_argument("--M", type=float, default=None, help="slope bound")
    sp.add_argument("--grid-size", dest="grid_size", type=int, default=33)
    sp.set_defaults(func=cmd_minimize)

    sp = sub.add_parser("lav-scan", help="Lipschitz-bound gap table")
    common(sp)
    sp.add_argument("--bc")
    sp.add_argument("--mesh", default="64", help="comma list of mesh sizes")
    sp.add_argument("--M", required=True, help="comma list of slope bounds")
    sp.add_argument("--grid-size", dest="grid_size", type=int, default=33)
    sp.set_defaults(func=cmd_lav_scan)

    sp = sub.add_parser("vary", help="energies along v + gamma u")
    common(sp)
    sp.add_argument("--traj")
    sp.add_argument("--dir", required=True, help="direction trajectory JSON")
    sp.add_argument("--gammas", required=True)
    sp.set_defaults(func=cmd_vary)

    sp = sub.add_parser("approx", help="affine-replacement approximation")
    common(sp)
    sp.add_argument("--traj")
    sp.add_argument("--U", required=True, help="lo,hi open window")
    sp.add_argument("--epsilon", type=float, required=True)
    sp.set_defaults(func=cmd_approx)

    sp = sub.add_parser("falsify", help="chord falsifier over windows")
    common(sp)
    sp.add_argument("--traj")
    sp.add_argument("--R", type=float, required=True)
    sp.add_argument("--windows", required=True, help="a,b;c,d;...")
    sp.set_defaults(func=cmd_falsify)

    sp = sub.add_parser("dini", help="difference-quotient certificate at an anchor")
    sp.add_argument("--points")
    sp.add_argument("--n", type=int, default=0)
    sp.add_argument("--k-max", dest="k_max", type=int, default=5)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_dini)

    sp = sub.add_parser("report", help="necessary-condition report at a point")
    common(sp)
    sp.add_argument("--traj")
    sp.add_argument("--at", type=float, required=True)
    sp.set_defaults(func=cmd_report)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags already; normalize other codes
        raise SystemExit(EXIT_BAD_CONFIG if exc.code not in (0,) else 0)
    try:
        code = args.func(args)
    except SystemExit:
        raise
    except (ValueError, KeyError, FileNotFoundError) as exc:
        _fail(EXIT_BAD_CONFIG, str(exc))
    except Exception as exc:  # computation failure with a typed message
        print(f"computation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return code


if __name__ == "__main__":
    raise SystemExit(main())
