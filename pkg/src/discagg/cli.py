"""Command-line entry point: ``discagg <command> [options]``.

Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 runtime invariant
violation.
"""
from __future__ import annotations

import argparse
import math
import os
import re
import sys

import numpy as np

from . import __version__
from . import anti_ou, branches, cluster, polygon_flow, vertex_growth
from .artifacts import dumps, ensure_dir, write_csv, write_json, write_jsonl
from .errors import (ConfigurationError, DegeneratePolygon, DiscAggError, DomainError,
                     InsufficientData, InsufficientTail, InternalInvariantError, WindowEmpty)
from .rng import derive_seed
from .svg import render_record
from .tails import geometric_grid

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2, 3
SWEEP_THETAS = ("0.30pi", "0.335pi", "0.37pi")
S_MIN_SENSITIVITY = (3, 5, 10)
VERTEX_TOLERANCE = 0.2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


###############################################################################
# Argument types
###############################################################################


_PI = re.compile(r"^\s*([-+0-9.eE]*)\s*\*?\s*pi\s*$")


def parse_angle(text) -> float:
    """Radians, or a multiple of pi written like ``0.35pi``."""
    m = _PI.match(str(text))
    try:
        if m:
            return (float(m.group(1)) if m.group(1) else 1.0) * math.pi
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an angle: {text!r}") from None


def parse_angles(text):
    return [parse_angle(t) for t in str(text).split(",") if t.strip()]


def _count(minimum):
    def parse(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not math.isfinite(v) or v != int(v) or v < minimum:
            raise argparse.ArgumentTypeError(f"need an integer >= {minimum}, got {text!r}")
        return int(v)
    return parse


def _positive(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"need a positive number, got {text!r}")
    return v


def read_vertices(path):
    """Parse ``x y`` or ``x,y`` per line; ``#`` starts a comment."""
    pts = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            fields = [f for f in re.split(r"[,\s]+", body) if f]
            try:
                if len(fields) != 2:
                    raise ValueError
                x, y = float(fields[0]), float(fields[1])
                if not (math.isfinite(x) and math.isfinite(y)):
                    raise ValueError
            except ValueError:
                raise UsageError(f"{path}:{lineno}: expected two finite numbers, got {body!r}") from None
            pts.append((x, y))
    return pts


###############################################################################
# Commands
###############################################################################


def _config(args, **extra):
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg.update(extra)
    cfg["version"] = __version__
    return cfg


def _branch_summary(record, s_min):
    b = branches.extract_run_branches(record)
    sizes = [x.size for x in b["branches"]]
    out = {
        "backbone_size": len(b["backbone"]),
        "branch_count": len(sizes),
        "partition_ok": sum(sizes) + len(b["backbone"]) == record.n_discs,
        "fit": None,
        "s_min_sensitivity": {},
        "ls_ccdf_slope": branches.binned_ccdf_slope(sizes, s_min) if sizes else None,
    }
    for s in sorted(set(S_MIN_SENSITIVITY) | {s_min}):
        try:
            fit = branches.fit_power_law(sizes, s).to_dict()
        except InsufficientTail as e:
            fit = {"error": str(e)}
        out["s_min_sensitivity"][str(s)] = fit
        if s == s_min:
            out["fit"] = fit
    return out, b["branches"], sizes


def _write_cluster(record, out, args):
    ensure_dir(out)
    write_jsonl(os.path.join(out, "events.jsonl"), (e.to_dict() for e in record.events))
    summary = cluster.summarize(record, args.f_macro)
    bsum, blist, sizes = _branch_summary(record, args.s_min)
    summary["branches"] = bsum
    write_json(os.path.join(out, "summary.json"), summary)
    write_csv(os.path.join(out, "metrics.csv"), ["step", "diameter", "extremal_count"],
              record.metric_samples())
    write_csv(os.path.join(out, "branches.csv"), ["root", "birth", "size"],
              ((x.root, x.birth, x.size) for x in blist))
    if sizes:
        v, c = branches.ccdf(sizes)
        write_csv(os.path.join(out, "branch_ccdf.csv"), ["size", "ccdf"], zip(v, c))
    if not args.no_svg:
        with open(os.path.join(out, "cluster.svg"), "w") as fh:
            fh.write(render_record(record))
    return summary


def cmd_simulate_cluster(args):
    ensure_dir(args.out)
    seeds = [args.seed ^ r for r in range(args.replicas)]
    write_json(os.path.join(args.out, "config.json"),
               _config(args, command="simulate-cluster", replica_seeds=seeds))
    records = cluster.run_ensemble(args.n, seeds, workers=args.workers)
    if args.replicas == 1:
        _write_cluster(records[0], args.out, args)
        return EXIT_OK
    rows = []
    for r, rec in enumerate(records):
        s = _write_cluster(rec, os.path.join(args.out, f"replica_{r:03d}"), args)
        rows.append(s)
    classes = [s["shape"]["class"] for s in rows]
    growth = [s["diameter_growth"] for s in rows if s["diameter_growth"]]
    write_json(os.path.join(args.out, "ensemble.json"), {
        "replicas": len(rows),
        "shape_counts": {c: classes.count(c) for c in ("triangle", "quadrangle", "other")},
        "median_extremal_count": float(np.median([s["extremal_count"] for s in rows])),
        "fraction_r2_ge_0.99": (sum(g["r2"] >= 0.99 for g in growth) / len(rows)),
    })
    return EXIT_OK


def cmd_simulate_vertex(args):
    thetas = [parse_angle(t) for t in SWEEP_THETAS] if args.sweep else args.theta
    if not thetas:
        raise UsageError("simulate-vertex: give --theta or --sweep")
    for th in thetas:
        vertex_growth._validate_fork(th, args.a, args.z0, args.cap)
    ensure_dir(args.out)
    write_json(os.path.join(args.out, "config.json"),
               _config(args, command="simulate-vertex", theta=thetas))
    grid = geometric_grid(1.0, float(args.cap))
    life_rows, tail_rows, runs = [], [], []
    for th in thetas:
        T, cause = vertex_growth.fork_lifetimes(th, args.a, args.replicas, args.z0, args.cap, args.seed)
        mu = vertex_growth.asymptotic_params(th)["mu"]
        life_rows.extend((th, args.a, t, vertex_growth.CAUSES[c]) for t, c in zip(T, cause))
        curve = vertex_growth.lifetime_tail_curve((T, cause), grid) if len(T) >= 1000 else []
        tail_rows.extend((th, n, p) for n, p in curve)
        run = {"theta": th, "a": args.a, "mu": mu, "replicas": len(T),
               "censored_fraction": float(np.mean(cause == vertex_growth.CENSORED)),
               "arc_collapse_fraction": float(np.mean(cause == vertex_growth.ARC_COLLAPSE))}
        try:
            fit = vertex_growth.lifetime_tail_fit((T, cause), grid)
            run.update(fit.to_dict())
            run["deviation"] = fit.exponent_hat - mu
            run["flagged"] = abs(fit.exponent_hat - mu) > VERTEX_TOLERANCE
        except WindowEmpty as e:
            run["exponent_hat"] = None
            run["error"] = str(e)
        try:
            run["power_law"] = branches.fit_power_law(T[cause != vertex_growth.CENSORED],
                                                      args.s_min).to_dict()
        except InsufficientTail as e:
            run["power_law"] = {"error": str(e)}
        runs.append(run)
    write_csv(os.path.join(args.out, "lifetimes.csv"), ["theta", "a", "T", "cause"], life_rows)
    write_csv(os.path.join(args.out, "tail.csv"), ["theta", "n", "survival"], tail_rows)
    out = {"runs": runs}
    ex = [r.get("exponent_hat") for r in runs]
    if len(runs) > 1 and all(e is not None for e in ex):
        out["monotone_decreasing"] = all(a > b for a, b in zip(ex, ex[1:]))
    write_json(os.path.join(args.out, "fit.json"), out)
    return EXIT_OK


def cmd_escape_tail(args):
    if args.theta is not None:
        if args.mu is not None or args.sigma is not None:
            raise UsageError("escape-tail: give either --theta or --mu/--sigma, not both")
        cfg = anti_ou.SdeConfig.from_theta(args.theta, args.a, t_max=args.t_max, h=args.h)
    else:
        if args.mu is None or args.sigma is None:
            raise UsageError("escape-tail: need --theta, or both --mu and --sigma")
        cfg = anti_ou.SdeConfig(args.mu, args.sigma, args.a, t_max=args.t_max, h=args.h)
    methods = list(anti_ou.METHODS) if args.method == "both" else [args.method]
    ensure_dir(args.out)
    write_json(os.path.join(args.out, "config.json"),
               _config(args, command="escape-tail", resolved=cfg.to_dict()))
    grid = geometric_grid(1.0, cfg.t_max)
    result = {"mu": cfg.mu, "sigma": cfg.sigma, "a": cfg.a, "fits": {}}
    samples = {}
    surv_rows = []
    for i, m in enumerate(methods):
        T, cens = anti_ou.escape_times(cfg, args.replicas, seed=derive_seed(args.seed, i) if i else args.seed,
                                          method=m)
        samples[m] = (T, cens)
        try:
            result["fits"][m] = anti_ou.tail_fit((T, cens), grid, cfg.t_max).to_dict()
        except (InsufficientData, WindowEmpty) as e:
            result["fits"][m] = {"error": str(e)}
        surv_rows.extend((m, t, p) for t, p in anti_ou.survival_curve((T, cens), grid))
    if len(methods) == 2:
        result.update(anti_ou.ks_log_times(samples[methods[0]], samples[methods[1]], cfg.t_max))
    write_csv(os.path.join(args.out, "survival.csv"), ["method", "t", "survival"], surv_rows)
    if not args.no_samples:
        write_csv(os.path.join(args.out, "escape_times.csv"),
                  ["mu", "sigma", "a", "method", "T", "censored"],
                  ((cfg.mu, cfg.sigma, cfg.a, m, t, bool(c))
                   for m in methods for t, c in zip(*samples[m])))
    write_json(os.path.join(args.out, "fit.json"), result)
    return EXIT_OK


def cmd_polygon_flow(args):
    pts = read_vertices(args.vertices_file)
    try:
        state = polygon_flow.PolygonState.from_vertices(pts)
    except DegeneratePolygon as e:
        raise UsageError(f"{args.vertices_file}: {e}") from None
    ensure_dir(args.out)
    write_json(os.path.join(args.out, "config.json"),
               _config(args, command="polygon-flow", vertices=[list(p) for p in pts]))
    rows = []
    state_out, traj = polygon_flow.run_flow(state, args.steps, args.dn)
    for n, k, ang in traj:
        rows.append((n, k, " ".join(format(float(a), ".17g") for a in ang)))
    write_csv(os.path.join(args.out, "trajectory.csv"), ["n", "vertex_count", "angles"], rows)
    write_jsonl(os.path.join(args.out, "merges.jsonl"), state_out.merges)
    return EXIT_OK


###############################################################################
# Parser
###############################################################################


def build_parser():
    p = _Parser(prog="discagg", description="Disc aggregation on the convex hull boundary.")
    p.add_argument("--version", action="version", version=f"discagg {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("simulate-cluster", help="grow clusters and write events, summary, SVG")
    c.add_argument("--n", type=_count(1), required=True, help="attachment steps (1e6 accepted)")
    c.add_argument("--seed", type=_count(0), default=0)
    c.add_argument("--replicas", type=_count(1), default=1, help="replica r uses seed XOR r")
    c.add_argument("--out", required=True)
    c.add_argument("--f-macro", type=_positive, default=cluster.F_MACRO)
    c.add_argument("--s-min", type=_count(1), default=branches.S_MIN)
    c.add_argument("--workers", type=_count(1), default=None)
    c.add_argument("--no-svg", action="store_true")
    c.set_defaults(func=cmd_simulate_cluster)

    v = sub.add_parser("simulate-vertex", help="fork-lifetime ensemble and tail fit")
    v.add_argument("--theta", type=parse_angles, default=[],
                   help="radians or multiples of pi (0.4pi); comma-separated list sweeps")
    v.add_argument("--sweep", action="store_true", help=f"theta grid {', '.join(SWEEP_THETAS)}")
    v.add_argument("--a", type=_positive, default=vertex_growth.A_DEFAULT)
    v.add_argument("--z0", type=_positive, default=vertex_growth.Z0_DEFAULT)
    v.add_argument("--replicas", type=_count(1), default=10_000)
    v.add_argument("--cap", type=_count(1), default=100_000)
    v.add_argument("--seed", type=_count(0), default=0)
    v.add_argument("--s-min", type=_count(1), default=branches.S_MIN)
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_simulate_vertex)

    e = sub.add_parser("escape-tail", help="escape times of the anti-OU diffusion")
    e.add_argument("--theta", type=parse_angle, default=None)
    e.add_argument("--mu", type=float, default=None)
    e.add_argument("--sigma", type=float, default=None)
    e.add_argument("--a", type=_positive, required=True)
    e.add_argument("--method", choices=("euler", "exact_bridge", "both"), default="exact_bridge")
    e.add_argument("--replicas", type=_count(1), default=100_000)
    e.add_argument("--t-max", type=_positive, default=anti_ou.T_MAX)
    e.add_argument("--h", type=_positive, default=anti_ou.H_DEFAULT)
    e.add_argument("--seed", type=_count(0), default=0)
    e.add_argument("--no-samples", action="store_true", help="skip escape_times.csv")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_escape_tail)

    f = sub.add_parser("polygon-flow", help="integrate the mean polygon flow")
    f.add_argument("--vertices-file", required=True)
    f.add_argument("--dn", type=_positive, default=None, help="default: min(0.01 r_min, 0.1)")
    f.add_argument("--steps", type=_count(1), default=1000)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_polygon_flow)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigurationError, DomainError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InternalInvariantError as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        for ev in e.events:
            print(dumps(ev), file=sys.stderr)
        return EXIT_INVARIANT
    except DiscAggError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
