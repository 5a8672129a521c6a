"""Command-line front end.

Exit codes are a stable contract: 0 success (all asserted inequalities
pass), 1 verified violation, 2 usage error, 3 margin violation, 4 solver
non-convergence.  JSON on stdout is the machine interface (numbers at 12
significant digits, no timestamp, so identical runs are byte-identical);
CSV files are the plotting interface.  File reports embed a manifest
with a timestamp; reports are otherwise reproducible byte-for-byte.
"""

import argparse
import csv
import json
import math
import os
import sys
import threading
from dataclasses import asdict
from datetime import datetime, timezone

import numpy as np

from . import __version__, conditions, generators, graph, potential, walker
from .errors import ConvergenceError, GraphFormatError, MarginError

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_MARGIN = 3
EXIT_CONVERGENCE = 4


def _sig12(x):
    if isinstance(x, float):
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.12g}")
    return x


def _clean(obj):
    """Round floats, stringify non-finite values, recurse containers."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return _sig12(float(obj))
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    return _sig12(obj)


def _dump_json(obj, fh=sys.stdout):
    json.dump(_clean(obj), fh, indent=2, sort_keys=True)
    fh.write("\n")


# execution metadata that cannot change results (determinism contract)
# and output destinations stay out of the manifest params
_NON_PARAMS = {"command", "func", "threads", "out_dir", "csv", "csv_prefix",
               "out"}


def _manifest(args, graph_info, seed=None, timestamp=False):
    man = {
        "tool": "einstein-lab",
        "version": __version__,
        "command": args.command,
        "graph": graph_info,
        "params": {
            k: v for k, v in sorted(vars(args).items())
            if k not in _NON_PARAMS and v is not None
        },
    }
    if seed is not None:
        man["seed"] = seed
    if timestamp:
        man["timestamp"] = datetime.now(timezone.utc).isoformat()
    return man


def _load_graph(path):
    g = graph.load(path)
    hook = os.environ.get("EINSTEIN_LAB_CORRUPT")
    if hook:
        u, v, delta = hook.split(",")
        g = _corrupt_graph(g, int(u), int(v), float(delta))
    return g, {"path": path, "vertices": g.vertex_count,
               "edges": len(g.edges)}


def _corrupt_graph(g, u, v, delta):
    """Test hook: bump one directed weight, breaking reversibility."""
    w = g.weights.copy()
    for k in range(int(g.indptr[u]), int(g.indptr[u + 1])):
        if int(g.indices[k]) == v:
            w[k] += delta
            break
    else:
        raise ValueError(f"no edge {u}->{v} to corrupt")
    h = object.__new__(graph.WeightedGraph)
    h.vertex_count = g.vertex_count
    h.edges = g.edges
    h.indptr = g.indptr
    h.indices = g.indices
    h.weights = w
    mu = np.zeros(g.vertex_count)
    for x in range(g.vertex_count):
        mu[x] = w[g.indptr[x]:g.indptr[x + 1]].sum()
    h.mu = mu
    h._dist_cache = {}
    h._dist_lock = threading.Lock()
    h._profile = None
    h._ecc_all = None
    return h


def _parse_radii(text):
    if ".." in text:
        lo, hi = text.split("..")
        lo, hi = int(lo), int(hi)
        out = []
        R = lo
        while R <= hi:
            out.append(R)
            R *= 2
        return out
    return [int(t) for t in text.split(",") if t]


def _parse_centers(g, text, path):
    if text.startswith("auto"):
        k = int(text[4:]) if len(text) > 4 else 5
        return conditions.auto_centers(g, k)
    if text == "sidecar":
        with open(path + ".center", encoding="utf-8") as f:
            return [int(f.read().strip())]
    return [int(t) for t in text.split(",") if t]


def _threads(args):
    t = getattr(args, "threads", None)
    if t is not None:
        return t
    env = os.environ.get("EINSTEIN_LAB_THREADS")
    return int(env) if env else 1


# -- subcommands ---------------------------------------------------------------


def cmd_generate(args):
    spec = generators.FamilySpec(
        family=args.family,
        size=args.side if args.family == "lattice" else
        (args.level if args.family in ("sierpinski", "vicsek") else args.depth),
        dim=args.dim,
        weight_rule=args.weight_rule,
        radial_lambda=args.radial_lambda,
    )
    g, center = generators.build(spec)
    graph.save(g, args.out)
    with open(args.out + ".center", "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{center}\n")
    print(f"{g.vertex_count} vertices, {len(g.edges)} edges, "
          f"center {center} -> {args.out}")
    return EXIT_OK


def cmd_compute(args):
    g, info = _load_graph(args.graph)
    q = args.quantity
    if q == "exit":
        result = {"E": potential.mean_exit_time(g, args.x, args.R)}
    elif q == "resistance":
        if args.annulus:
            x, r, R = (int(t) for t in args.annulus.split(","))
            result = {"rho": potential.resistance_annulus(g, x, r, R),
                      "convention": "annulus-surface"}
        else:
            ax, ar = (int(t) for t in args.A_ball.split(","))
            bx, br = (int(t) for t in args.B_ball.split(","))
            rho = potential.resistance(g, graph.ball(g, ax, ar),
                                       graph.ball(g, bx, br))
            result = {"rho": rho, "convention": "set-poles"}
    elif q == "green":
        ax, ar = (int(t) for t in args.A_ball.split(","))
        op = potential.green(g, graph.ball(g, ax, ar))
        result = {"g": potential.green_kernel(op, args.y, args.z),
                  "G": op.visits(args.y, args.z)}
    elif q == "lambda":
        bx, br = (int(t) for t in args.ball.split(","))
        r = potential.lambda_min(g, graph.ball(g, bx, br))
        result = {"lambda": r.lam, "iterations": r.iterations,
                  "residual": r.residual}
    elif q == "harnack":
        result = {"H": potential.harnack_constant(g, args.x, args.R)}
    elif q == "hg":
        lo, hi = potential.g_condition(g, args.x, args.R)
        result = {"hg": potential.hg_constant(g, args.x, args.R),
                  "g_low": lo, "g_high": hi}
    else:
        raise ValueError(f"unknown quantity {q!r}")
    _dump_json({"manifest": _manifest(args, info), "result": result})
    return EXIT_OK


def _grid_for(args, g, path):
    centers = _parse_centers(g, args.centers, path)
    radii = _parse_radii(args.radii) if args.radii else None
    grid = conditions.default_grid(g, centers=centers, radii=radii)
    cells, _ = conditions.valid_cells(g, grid, 2)
    if not cells:
        raise MarginError("empty grid: host too small for the margins")
    return grid


def cmd_verify(args):
    g, info = _load_graph(args.graph)
    grid = _grid_for(args, g, args.graph)
    threads = _threads(args)
    cache = conditions.QuantityCache(g)
    checks = conditions.verify_inequalities(g, grid, cache=cache,
                                            threads=threads)
    reports = {}
    for tag in conditions.CONDITION_TAGS:
        try:
            reports[tag] = conditions.measure_condition(
                g, grid, tag, cache=cache, threads=threads)
        except (ValueError, MarginError, ConvergenceError) as exc:
            reports[tag] = None
            print(f"condition {tag}: skipped ({exc})", file=sys.stderr)

    failures = [c for c in checks if c.passed is False]
    payload = {
        "manifest": _manifest(args, info, timestamp=True),
        "grid": {"centers": list(grid.centers), "radii": list(grid.radii)},
        "inequalities": [
            {"check": c.check, "passed": c.passed,
             "worst_slack": c.worst_slack, "witness": c.witness,
             "constant": c.constant, "cells": c.cells}
            for c in checks
        ],
        "conditions": {
            tag: None if rep is None else
            {"constant": rep.constant, "extremizer": rep.extremizer,
             "cells": rep.cells, "note": rep.note, "details": rep.details}
            for tag, rep in reports.items()
        },
    }
    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "verify.json"), "w",
              encoding="utf-8", newline="\n") as f:
        _dump_json(payload, f)
    with open(os.path.join(args.out_dir, "verify.csv"), "w",
              encoding="utf-8", newline="") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(["check", "x", "r", "R", "detail", "lhs", "rhs",
                     "slack", "ok"])
        for c in checks:
            for row in c.rows:
                wr.writerow([_sig12(v) for v in row])
        for tag, rep in reports.items():
            if rep is None:
                continue
            for row in rep.rows:
                tag_, x, y_or_r, R, detail, val = row
                wr.writerow([tag_, x, y_or_r, R, detail, _sig12(val),
                             "", "", ""])
    for c in failures:
        print(f"VIOLATION {c.check}: worst slack {c.worst_slack:.3e} "
              f"at {c.witness}")
    print(f"verify: {len(checks)} checks, {len(failures)} violations "
          f"-> {args.out_dir}")
    return EXIT_VIOLATION if failures else EXIT_OK


def cmd_einstein(args):
    g, info = _load_graph(args.graph)
    grid = _grid_for(args, g, args.graph)
    records, summary = conditions.einstein_report(
        g, grid, threads=_threads(args))
    payload = {
        "manifest": _manifest(args, info),
        "records": [asdict(r) for r in records],
        "summary": asdict(summary),
    }
    _dump_json(payload)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as f:
            wr = csv.writer(f, lineterminator="\n")
            wr.writerow(["x", "R", "E2R", "rho", "v", "Q"])
            for r in records:
                wr.writerow([r.x, r.R, _sig12(r.E2R), _sig12(r.rho),
                             _sig12(r.v), _sig12(r.Q)])
    return EXIT_OK


def cmd_fit(args):
    g, info = _load_graph(args.graph)
    if args.x == "center":
        x = conditions.auto_centers(g, 1)[0]
    elif args.x == "sidecar":
        with open(args.graph + ".center", encoding="utf-8") as f:
            x = int(f.read().strip())
    else:
        x = int(args.x)
    radii = _parse_radii(args.radii)
    summ = conditions.fit_exponents(g, x, radii)
    payload = {
        "manifest": _manifest(args, info),
        "alpha": asdict(summ.alpha),
        "beta": asdict(summ.beta),
        "gamma": asdict(summ.gamma),
        "erdim_residual": summ.erdim_residual,
    }
    _dump_json(payload)
    if args.csv_prefix:
        cache = conditions.QuantityCache(g)
        series = {
            "volume": lambda R: cache.V(x, R),
            "exit": lambda R: cache.E(x, R),
            "conductance": lambda R: 1.0 / cache.rho(x, R, 2 * R),
        }
        used = summ.alpha.radii
        for name, fn in series.items():
            with open(f"{args.csv_prefix}_{name}.csv", "w",
                      encoding="utf-8", newline="") as f:
                wr = csv.writer(f, lineterminator="\n")
                wr.writerow(["log_R", f"log_{name}"])
                for R in used:
                    wr.writerow([_sig12(math.log(R)),
                                 _sig12(math.log(fn(R)))])
    return EXIT_OK


def cmd_mc(args):
    g, info = _load_graph(args.graph)
    cfg = walker.WalkConfig(seed=args.seed, n_walks=args.n,
                            step_cap=args.step_cap)
    est = walker.mc_exit_time(g, args.x, args.R, cfg)
    payload = {
        "manifest": _manifest(args, info, seed=args.seed),
        "estimate": asdict(est),
    }
    _dump_json(payload)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(
        prog="einstein-lab",
        description="Potential-theoretic measurements on weighted graphs",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("generate", help="emit a graph family fixture")
    sp.add_argument("--family", required=True,
                    choices=["lattice", "sierpinski", "vicsek", "binary_tree"])
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--side", type=int, default=None)
    sp.add_argument("--level", type=int, default=None)
    sp.add_argument("--depth", type=int, default=None)
    sp.add_argument("--weight-rule", dest="weight_rule", default="unit",
                    choices=["unit", "radial"])
    sp.add_argument("--lambda", dest="radial_lambda", type=float, default=1.0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("compute", help="one exact quantity as JSON")
    sp.add_argument("quantity", choices=["exit", "resistance", "green",
                                         "lambda", "harnack", "hg"])
    sp.add_argument("--graph", required=True)
    sp.add_argument("--x", type=int)
    sp.add_argument("--R", type=int)
    sp.add_argument("--y", type=int)
    sp.add_argument("--z", type=int)
    sp.add_argument("--A-ball", dest="A_ball")
    sp.add_argument("--B-ball", dest="B_ball")
    sp.add_argument("--ball", dest="ball")
    sp.add_argument("--annulus", dest="annulus")
    sp.set_defaults(func=cmd_compute)

    for name, fn in (("verify", cmd_verify), ("einstein", cmd_einstein)):
        sp = sub.add_parser(name)
        sp.add_argument("--graph", required=True)
        sp.add_argument("--centers", default="auto5")
        sp.add_argument("--radii", default=None)
        sp.add_argument("--threads", type=int, default=None,
                        help="workers (default: EINSTEIN_LAB_THREADS or 1)")
        if name == "verify":
            sp.add_argument("--out-dir", dest="out_dir", required=True)
        else:
            sp.add_argument("--csv", default=None)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("fit", help="log-log exponent fits")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--x", default="center")
    sp.add_argument("--radii", required=True)
    sp.add_argument("--csv-prefix", dest="csv_prefix", default=None)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("mc", help="Monte Carlo exit-time estimate")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--x", type=int, required=True)
    sp.add_argument("--R", type=int, required=True)
    sp.add_argument("--n", type=int, default=10_000)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--step-cap", dest="step_cap", type=int, default=None)
    sp.set_defaults(func=cmd_mc)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MarginError as exc:
        print(f"margin error: {exc}", file=sys.stderr)
        return EXIT_MARGIN
    except ConvergenceError as exc:
        print(f"convergence error: {exc} (residual={exc.residual})",
              file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ValueError, GraphFormatError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
