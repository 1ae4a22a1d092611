"""Command-line entry point: ``bsca run | bounds | trace-check | project``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import bounds as bnd
from .harness import ConfigError, load_config, run
from .projection import project_cache
from .workloads import TraceError, parse_trace

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; we reserve 2 for I/O."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bsca", description="Online caching simulator and regret harness.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run an experiment config and write CSV metrics")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("bounds", help="evaluate regret bounds")
    p.add_argument("--json", required=True, dest="params",
                   help='e.g. \'{"J": 3, "deg": 2, "C": 10, "w1": 100, "T": 1e5}\'')

    p = sub.add_parser("trace-check", help="validate a slot,file_id[,location_id] trace")
    p.add_argument("path")

    p = sub.add_parser("project", help="project a vector onto the capped simplex")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--c", type=int, required=True)
    p.add_argument("--q", required=True, help="comma-separated entries")
    return parser


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, seed=args.seed)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    metrics = run(cfg)
    out = args.out or cfg.output
    if out:
        try:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                metrics.write_csv(fh)
        except OSError as exc:
            print(f"error: cannot write {out}: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"wrote {out}", file=sys.stderr)
    else:
        metrics.write_csv(sys.stdout)
    return EXIT_OK


def _cmd_bounds(args) -> int:
    try:
        params = json.loads(args.params)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--json is not valid JSON: {exc}") from None
    if not isinstance(params, dict):
        raise ConfigError("--json must be an object")
    known = {"J", "C", "deg", "w1", "T", "N", "weights", "delta_y", "K"}
    unknown = set(params) - known
    if unknown:
        raise ConfigError(f"unknown bound parameters: {sorted(unknown)}")
    try:
        inp = bnd.BoundInputs(J=int(params.get("J", 1)), C=int(params.get("C", 1)), deg=int(params.get("deg", 1)),
                              w1=float(params.get("w1", 1.0)), T=float(params.get("T", 0)),
                              N=int(params["N"]) if "N" in params else None)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad bound parameter: {exc}") from None
    print(f"upper_bound {bnd.upper_bound_bsca(inp):.2f}")
    if "delta_y" in params and "K" in params:
        print(f"upper_bound_diminishing {bnd.upper_bound_diminishing(inp.T, float(params['delta_y']), float(params['K'])):.2f}")
    if inp.N is not None:
        try:
            print(f"lower_bound_uniform {bnd.lower_bound_uniform(inp):.2f}")
        except ValueError as exc:
            print(f"lower_bound_uniform n/a ({exc})")
    if "weights" in params:
        try:
            print(f"lower_bound_weighted {bnd.lower_bound_weighted(params['weights'], inp.C, inp.T):.2f}")
        except ValueError as exc:
            print(f"lower_bound_weighted n/a ({exc})")
    return EXIT_OK


def _cmd_trace_check(args) -> int:
    try:
        trace = parse_trace(args.path)
    except OSError as exc:
        print(f"error: cannot read {args.path}: {exc}", file=sys.stderr)
        return EXIT_IO
    except TraceError as exc:
        print(f"error: {args.path}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"ok: {len(trace)} requests, {trace.num_files} files, {trace.num_locations} locations")
    return EXIT_OK


def _cmd_project(args) -> int:
    try:
        q = np.array([float(v) for v in args.q.split(",") if v.strip()])
    except ValueError:
        raise ConfigError("--q must be comma-separated numbers") from None
    if q.size != args.n:
        raise ConfigError(f"--q has {q.size} entries but --n is {args.n}")
    y = project_cache(q, args.c)
    print(",".join(f"{v:.12g}" for v in y))
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "bounds": _cmd_bounds, "trace-check": _cmd_trace_check, "project": _cmd_project}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, TraceError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
