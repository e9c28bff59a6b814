"""Command-line front end.

Subcommands:

  hyzo run <scenario.json> [--out DIR] [--tol-feas F] [--enum-cap K] [--self-test]
  hyzo query <set.json> (--member x,y | --support dx,dy | --empty | --hull) [--step K]
  hyzo complexity (<trace.json> | --table4 CASE METHOD)
  hyzo plot-data <set.json> --dims i,j [--dirs N] [--step K] [--mode M]

Exit codes: 0 success, 2 schema problem, 3 domain-check failure,
4 enumeration cap exceeded.  `HYZO_THREADS` caps worker parallelism.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .complexity import (
    METHODS,
    TABLE_CASES,
    bilinear_counts,
    verify_trace_recurrence,
)
from .query import (
    DEFAULT_ENUM_CAP,
    DEFAULT_TOLS,
    EnumerationCapError,
    contains_point,
    interval_hull,
    is_empty,
    polygon_2d,
    support,
)
from .reach import DomainCheckError, ReachTrace
from .scenario import (
    EXIT_CAP,
    EXIT_DOMAIN,
    EXIT_OK,
    EXIT_SCHEMA,
    piece_dicts,
    run_scenario,
)
from .sets import ComplexityCount, HybridZonotope, SchemaError, linear_map

__all__ = ["main"]


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as e:
        raise SchemaError(f"expected comma-separated numbers, got '{text}'") from e


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise SchemaError(f"cannot read {path}: {e}") from e


def _load_set(path, step) -> HybridZonotope:
    """Accept either a serialized set or a trace file (pick one step)."""
    doc = _load_json(path)
    if "trace" in doc:
        doc = doc["trace"]
    if "sets" in doc:
        sets = doc["sets"]
        if not sets:
            raise SchemaError(f"{path} holds an empty trace")
        k = len(sets) - 1 if step is None else int(step)
        if not 0 <= k < len(sets):
            raise SchemaError(f"step {k} out of range 0..{len(sets) - 1}")
        return HybridZonotope.from_dict(sets[k])
    return HybridZonotope.from_dict(doc)


def _tols(args):
    if getattr(args, "tol_feas", None) is None:
        return DEFAULT_TOLS
    return replace(DEFAULT_TOLS, feasibility=float(args.tol_feas))


def _cmd_run(args) -> int:
    res = run_scenario(args.scenario, args.out, tols=_tols(args),
                       enum_cap=args.enum_cap, self_test=args.self_test)
    for m in res.messages:
        print(m)
    print(f"artifacts in {res.out_dir}")
    return res.exit_code


def _cmd_query(args) -> int:
    z = _load_set(args.set_file, args.step)
    tols = _tols(args)
    cap = args.enum_cap if args.enum_cap is not None else DEFAULT_ENUM_CAP
    if args.member is not None:
        res = contains_point(z, _floats(args.member), tols=tols, enum_cap=cap)
        out = {"query": "member", "status": res.status}
    elif args.support is not None:
        res = support(z, _floats(args.support), tols=tols, enum_cap=cap)
        out = {"query": "support", "status": res.status,
               "value": None if res.value is None else float(res.value)}
    elif args.empty:
        res = is_empty(z, tols=tols, enum_cap=cap)
        out = {"query": "empty", "status": res.status}
    else:
        box = interval_hull(z, tols=tols, enum_cap=cap, mode=args.hull_mode)
        out = {"query": "hull", "lo": box.lo.tolist(), "hi": box.hi.tolist(),
               "mode": args.hull_mode}
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


_METHOD_ALIASES = {"m1": "grid2d", "m2": "square1d", "m3": "strip1d"}


def _cmd_complexity(args) -> int:
    if args.table4:
        case_text, method_text = args.table4
        method = method_text.lower()
        method = _METHOD_ALIASES.get(method, method)
        if method not in METHODS:
            raise SchemaError(f"unknown method '{method_text}'; "
                              f"use M1/M2/M3 or {'/'.join(METHODS)}")
        try:
            parts = [int(v) for v in case_text.split(",")]
        except ValueError as e:
            raise SchemaError(f"bad case '{case_text}': {e}") from e
        if len(parts) == 1:
            match = [c for c in TABLE_CASES if c[0] == parts[0]]
            if not match:
                raise SchemaError(
                    f"no published case starts with {parts[0]}; "
                    f"known: {sorted(c[0] for c in TABLE_CASES)}")
            case = match[0]
        elif len(parts) == 3:
            case = tuple(parts)
        else:
            raise SchemaError("case must be 'p' or 'p,q,r'")
        c = bilinear_counts(case, method)
        print(json.dumps({"case": list(case), "method": method,
                          "n_g": c.ng, "n_b": c.nb, "n_c": c.nc},
                         sort_keys=True))
        return EXIT_OK

    if args.trace_file is None:
        raise SchemaError("give a trace file or --table4 CASE METHOD")
    doc = _load_json(args.trace_file)
    trace = ReachTrace.from_dict(doc["trace"] if "trace" in doc else doc)
    phi_counts = doc.get("phi_counts")
    print("k,n_g,n_b,n_c")
    for k, c in enumerate(trace.counts):
        print(f"{k},{c.ng},{c.nb},{c.nc}")
    if phi_counts is not None and len(trace.counts) > 1:
        n_x = doc.get("n_x", trace.sets[0].n)
        report = verify_trace_recurrence(trace, ComplexityCount(*phi_counts),
                                         n_x=n_x)
        print(f"recurrence: {'pass' if report.ok else 'FAIL'}")
        if not report.ok:
            return 1
    return EXIT_OK


def _cmd_plot_data(args) -> int:
    z = _load_set(args.set_file, args.step)
    dims = [int(v) for v in args.dims.split(",")]
    if len(dims) != 2:
        raise SchemaError("--dims needs exactly two indices")
    P = np.zeros((2, z.n))
    P[0, dims[0]] = 1.0
    P[1, dims[1]] = 1.0
    zp = linear_map(P, z)
    cap = args.enum_cap if args.enum_cap is not None else DEFAULT_ENUM_CAP
    mode = args.mode
    if mode == "auto":
        mode = "exact" if zp.nb <= cap else "relaxed"
    pieces = polygon_2d(zp, args.dirs, tols=_tols(args), enum_cap=cap, mode=mode)
    print(json.dumps({"dims": dims, "mode": mode,
                      "pieces": piece_dicts(pieces)}, sort_keys=True))
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hyzo", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--tol-feas", type=float, default=None,
                       help="feasibility tolerance override")
        p.add_argument("--enum-cap", type=int, default=None,
                       help="max binary factors before enumeration refuses")

    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("scenario")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--self-test", action="store_true",
                   help="run the scenario's embedded oracle checks")
    common(p)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("query", help="query a serialized set")
    p.add_argument("set_file")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--member", metavar="x,y,...")
    g.add_argument("--support", metavar="dx,dy,...")
    g.add_argument("--empty", action="store_true")
    g.add_argument("--hull", action="store_true")
    p.add_argument("--hull-mode", choices=("exact", "relaxed"), default="exact")
    p.add_argument("--step", type=int, default=None,
                   help="step index when the file is a trace")
    common(p)
    p.set_defaults(fn=_cmd_query)

    p = sub.add_parser("complexity", help="audit trace counts / count calculator")
    p.add_argument("trace_file", nargs="?", default=None)
    p.add_argument("--table4", nargs=2, metavar=("CASE", "METHOD"),
                   help="calculator: CASE is 'p' or 'p,q,r'; METHOD is "
                        "M1/M2/M3 or grid2d/square1d/strip1d")
    p.set_defaults(fn=_cmd_complexity)

    p = sub.add_parser("plot-data", help="polygon data for a 2-D projection")
    p.add_argument("set_file")
    p.add_argument("--dims", required=True, metavar="i,j")
    p.add_argument("--dirs", type=int, default=64)
    p.add_argument("--step", type=int, default=None)
    p.add_argument("--mode", choices=("auto", "exact", "relaxed"), default="auto")
    common(p)
    p.set_defaults(fn=_cmd_plot_data)
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SchemaError as e:
        print(f"schema error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except DomainCheckError as e:
        print(f"domain check failed: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except EnumerationCapError as e:
        print(f"enumeration cap exceeded: {e}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
