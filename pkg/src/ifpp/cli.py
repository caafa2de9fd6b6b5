"""Command-line entry point ``ifpp``.

Exit codes: 0 pass, 2 tolerance failure, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import analytic
from .boundary import Boundary, read_boundary_csv, write_boundary_csv
from .diffusion import spec_from_config
from .direct import direct_lattice, refine_direct, solve_direct_landmark
from .grid import write_field_csv
from .inverse import inverse_lattice, solve_inverse
from .montecarlo import estimate_survival
from .survival import read_survival_csv, write_survival_csv

DEFAULTS = {
    "dx": 0.005,
    "dt": 5e-4,
    "t0": 1e-4,
    "level": 10,
    "richardson_terms": 1,
    "interpolation": "linear",
    "psor_tol": 1e-10,
    "psor_omega": 1.5,
    "eps_rel": 1e-8,
    "t_min": None,
    "residual_from": 0.1,
    "window": [0.1, None],
    "mc_paths": 1_000_000,
    "mc_dt": 1e-3,
    "seed": 20240601,
    "bridge": True,
    "check_times": None,
    "tolerance": None,
}

PASS, ERROR, TOLERANCE = 0, 1, 2


def load_config(path, overrides: dict) -> dict:
    cfg = dict(DEFAULTS)
    if path:
        with open(path) as fh:
            user = json.load(fh)
        unknown = set(user) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(user)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg


def config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _load_spec(path):
    with open(path) as fh:
        raw = json.load(fh)
    spec, init = spec_from_config(raw)
    return raw, spec, init


def _write_report(path, command, spec_raw, cfg, results, passed):
    if not path:
        return
    payload = {"command": command, "spec": spec_raw, "config": cfg}
    doc = dict(payload, config_hash=config_hash(payload), results=results, passed=passed)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=_jsonable)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, float) and not np.isfinite(v):
        return str(v)
    return str(v)


def _clean(v):
    """JSON-safe scalar: infinities become strings."""
    v = float(v)
    return v if np.isfinite(v) else ("-inf" if v < 0 else ("inf" if v > 0 else "nan"))


def _survival_input(args, horizon):
    if getattr(args, "exp", None) is not None:
        return analytic.exponential_curve(args.exp, horizon)
    return read_survival_csv(args.survival, horizon=horizon)


def cmd_direct(args) -> int:
    raw, spec, init = _load_spec(args.spec)
    cfg = load_config(args.config, {"level": args.level, "dx": args.dx, "dt": args.dt,
                                    "interpolation": args.interpolation})
    b = read_boundary_csv(args.boundary, cfg["interpolation"], args.horizon)
    n = int(cfg["level"])
    lat = direct_lattice(spec, init, b, n, cfg["dx"], cfg["dt"], cfg["t0"])
    if args.extrapolate:
        ref = refine_direct(spec, init, b, n, lat, terms=cfg["richardson_terms"])
        rows = ref.extrapolated_rows
    else:
        res = solve_direct_landmark(spec, init, b, n, lat, store_fields=bool(args.dump_fields))
        rows = res.p_rows
        if args.dump_fields:
            os.makedirs(args.dump_fields, exist_ok=True)
            write_field_csv(os.path.join(args.dump_fields, "U.csv"), lat, res.U.values)
            write_field_csv(os.path.join(args.dump_fields, "w.csv"), lat, res.w.values)
    t = lat.t
    if t[0] > 0:
        t, rows = np.concatenate([[0.0], t]), np.concatenate([[1.0], rows])
    write_survival_csv(args.out, t, rows)
    _write_report(args.report, "direct", raw, cfg,
                  {"p_final": float(rows[-1]), "nx": lat.nx, "nt": lat.nt}, True)
    return PASS


def cmd_inverse(args) -> int:
    raw, spec, init = _load_spec(args.spec)
    cfg = load_config(args.config, {"dx": args.dx, "dt": args.dt})
    p = read_survival_csv(args.survival, horizon=args.horizon)
    lat = inverse_lattice(spec, init, p.horizon, cfg["dx"], cfg["dt"], cfg["t0"])
    rep = solve_inverse(spec, init, p, lat, cfg["psor_tol"], omega=cfg["psor_omega"],
                        eps_rel=cfg["eps_rel"], t_min=cfg["t_min"],
                        residual_from=cfg["residual_from"])
    t, b = rep.reported()
    write_boundary_csv(args.out, t, b)
    _write_report(args.report, "inverse", raw, cfg, rep.scalars(), True)
    return PASS


def cmd_mc(args) -> int:
    raw, spec, init = _load_spec(args.spec)
    cfg = load_config(args.config, {"mc_paths": args.paths, "mc_dt": args.dt, "seed": args.seed,
                                    "interpolation": args.interpolation})
    cfg["bridge"] = bool(args.bridge)
    b = read_boundary_csv(args.boundary, cfg["interpolation"], args.horizon)
    est = estimate_survival(spec, init, b, b.horizon, int(cfg["mc_paths"]), cfg["mc_dt"],
                            int(cfg["seed"]), bridge=cfg["bridge"])
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "p_hat", "ci99", "p_hat_strict", "ci99_strict"])
        for row in zip(est.times, est.p_hat, est.ci_half_width, est.p_hat_strict, est.ci_strict):
            w.writerow([repr(float(v)) for v in row])
    _write_report(args.report, "mc", raw, cfg,
                  {"discrepancy": est.discrepancy, "p_hat_final": float(est.p_hat[-1]),
                   "ci_final": float(est.ci_half_width[-1])}, True)
    return PASS


def _check_times(cfg, horizon):
    if cfg["check_times"]:
        return np.array(cfg["check_times"], float)
    return np.array([s for s in (0.25, 0.5, 1.0, 2.0) if s <= horizon] or [horizon])


def cmd_roundtrip_pb(args) -> int:
    raw, spec, init = _load_spec(args.spec)
    cfg = load_config(args.config, {"tolerance": args.tolerance})
    tol = 0.01 if cfg["tolerance"] is None else float(cfg["tolerance"])
    horizon = args.horizon if args.horizon is not None else 2.0 if args.exp is not None else None
    p = _survival_input(args, horizon)
    started = time.time()
    lat = inverse_lattice(spec, init, p.horizon, cfg["dx"], cfg["dt"], cfg["t0"])
    rep = solve_inverse(spec, init, p, lat, cfg["psor_tol"], omega=cfg["psor_omega"],
                        eps_rel=cfg["eps_rel"], t_min=cfg["t_min"],
                        residual_from=cfg["residual_from"])
    b_hat = rep.b_hat
    est = estimate_survival(spec, init, b_hat, p.horizon, int(cfg["mc_paths"]), cfg["mc_dt"],
                            int(cfg["seed"]), bridge=bool(cfg["bridge"]))
    dlat = direct_lattice(spec, init, b_hat, int(cfg["level"]), cfg["dx"], cfg["dt"], cfg["t0"])
    ref = refine_direct(spec, init, b_hat, int(cfg["level"]), dlat, terms=cfg["richardson_terms"])
    tc = _check_times(cfg, p.horizon)
    target = p(tc)
    mc = est.at(tc)
    ci = est.ci_at(tc)
    direct = ref.extrapolated_rows[dlat.index_of(tc, tol=1e-9)]
    gap_mc = np.abs(mc - target)
    allowed = np.maximum(tol, 3 * ci)
    passed = bool(np.all(gap_mc <= allowed))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "p", "p_mc", "ci99", "p_direct"])
            for row in zip(tc, target, mc, ci, direct):
                w.writerow([repr(float(v)) for v in row])
    results = {
        "sup_gap_mc": float(gap_mc.max()),
        "sup_gap_direct": float(np.abs(direct - target).max()),
        "ci99_max": float(ci.max()),
        "check_times": tc,
        "inverse": {k: _clean(v) for k, v in rep.scalars().items()},
        "mc_discrepancy": est.discrepancy,
        "seconds": time.time() - started,
    }
    _write_report(args.report, "roundtrip-pb", raw, cfg, results, passed)
    print(f"sup |p_mc - p| = {results['sup_gap_mc']:.4g} (allowed {allowed.max():.4g}); "
          f"sup |p_direct - p| = {results['sup_gap_direct']:.4g}")
    return PASS if passed else TOLERANCE


def boundary_gap(b_hat_rows, t, b: Boundary, window) -> float:
    """sup |b_hat - b| over rows in the window; matching -inf counts as 0."""
    m = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
    bh = np.asarray(b_hat_rows)[m]
    bt = b(t[m])
    both = (bh == -np.inf) & (bt == -np.inf)
    with np.errstate(invalid="ignore"):
        d = np.abs(bh - bt)
    d[both] = 0.0
    return float(d.max(initial=0.0))


def cmd_roundtrip_bp(args) -> int:
    raw, spec, init = _load_spec(args.spec)
    cfg = load_config(args.config, {"tolerance": args.tolerance,
                                    "interpolation": args.interpolation})
    tol = 0.05 if cfg["tolerance"] is None else float(cfg["tolerance"])
    b = read_boundary_csv(args.boundary, cfg["interpolation"], args.horizon)
    started = time.time()
    dlat = direct_lattice(spec, init, b, int(cfg["level"]), cfg["dx"], cfg["dt"], cfg["t0"])
    ref = refine_direct(spec, init, b, int(cfg["level"]), dlat, terms=cfg["richardson_terms"])
    lat = inverse_lattice(spec, init, b.horizon, cfg["dx"], cfg["dt"], cfg["t0"])
    rep = solve_inverse(spec, init, ref.extrapolated, lat, cfg["psor_tol"],
                        omega=cfg["psor_omega"], eps_rel=cfg["eps_rel"], t_min=cfg["t_min"],
                        residual_from=cfg["residual_from"])
    w0, w1 = cfg["window"]
    window = (w0 if w0 is not None else rep.t_min, w1 if w1 is not None else b.horizon)
    gap = boundary_gap(rep.b_rows, lat.t, b, window)
    passed = gap <= tol
    if args.out:
        write_boundary_csv(args.out, *rep.reported())
    results = {"sup_gap": _clean(gap), "window": list(window), "tolerance": tol,
               "inverse": {k: _clean(v) for k, v in rep.scalars().items()},
               "seconds": time.time() - started}
    _write_report(args.report, "roundtrip-bp", raw, cfg, results, passed)
    print(f"sup |b_hat - b| on [{window[0]:.4g}, {window[1]:.4g}] = {gap:.4g} (tolerance {tol})")
    return PASS if passed else TOLERANCE


def cmd_bench(args) -> int:
    t = np.linspace(0.0, args.horizon, args.samples)
    if args.case == "const":
        p = analytic.bm_constant_barrier_survival(args.x0, args.barrier, t)
    elif args.case == "linear":
        p = analytic.bm_linear_barrier_survival(args.x0, args.barrier, args.slope, t)
    else:
        p = np.exp(-args.lam * t)
    write_survival_csv(args.out, t, p)
    return PASS


def cmd_landmarks(args) -> int:
    b = read_boundary_csv(args.boundary, args.interpolation, args.horizon)
    lo, hi = (args.level, args.level) if args.max_level is None else (args.level, args.max_level)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "i", "t", "bstar"])
        for n in range(lo, hi + 1):
            lm = b.landmarks(n)
            for i, (ti, vi) in enumerate(zip(lm.times, lm.values)):
                w.writerow([n, i, repr(float(ti)), "-inf" if vi == -np.inf else repr(float(vi))])
    return PASS


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ifpp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, boundary=False):
        p.add_argument("--spec", required=True, help="diffusion spec JSON")
        p.add_argument("--config", help="discretization config JSON")
        p.add_argument("--report", help="write a JSON report here")
        p.add_argument("--horizon", type=float)
        if boundary:
            p.add_argument("--boundary", required=True, help="CSV with header t,b")
            p.add_argument("--interpolation", choices=["linear", "constant-left"])

    p = sub.add_parser("direct", help="survival curve of a boundary")
    common(p, boundary=True)
    p.add_argument("--level", type=int)
    p.add_argument("--dx", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--extrapolate", action="store_true", help="Richardson limit over levels")
    p.add_argument("--dump-fields", help="directory for U.csv and w.csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_direct)

    p = sub.add_parser("inverse", help="boundary from a survival curve")
    common(p)
    p.add_argument("--survival", required=True, help="CSV with header t,p")
    p.add_argument("--dx", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_inverse)

    p = sub.add_parser("mc", help="Monte Carlo survival estimate")
    common(p, boundary=True)
    p.add_argument("--paths", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--bridge", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("roundtrip-pb", help="curve -> boundary -> curve")
    common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--survival", help="CSV with header t,p")
    src.add_argument("--exp", type=float, help="use p(t) = exp(-lambda t)")
    p.add_argument("--tolerance", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_roundtrip_pb)

    p = sub.add_parser("roundtrip-bp", help="boundary -> curve -> boundary")
    common(p, boundary=True)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_roundtrip_bp)

    p = sub.add_parser("bench", help="closed-form reference curves")
    p.add_argument("--case", choices=["const", "linear", "exp"], required=True)
    p.add_argument("--x0", type=float, default=1.0)
    p.add_argument("--barrier", type=float, default=0.0)
    p.add_argument("--slope", type=float, default=0.5)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=1001)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("landmarks", help="dump landmark sets as n,i,t,bstar")
    p.add_argument("--boundary", required=True)
    p.add_argument("--interpolation", choices=["linear", "constant-left"], default="linear")
    p.add_argument("--horizon", type=float)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--max-level", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_landmarks)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, ArithmeticError, OSError, KeyError) as exc:
        print(f"ifpp {args.command}: error: {exc}", file=sys.stderr)
        return ERROR


if __name__ == "__main__":
    sys.exit(main())
