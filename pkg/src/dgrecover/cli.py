"""Command-line entry point: ``dgrecover run | case-list | check``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .problem import case_names

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dgrecover", description="DG solver with recovery-based error estimation.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="log progress (repeat for debug)")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a benchmark configuration")
    run.add_argument("config", help="path to a key = value config file")
    run.add_argument("--output-dir", help="override output_dir")
    run.add_argument("--vtk", action="store_true", default=None, help="also write per-level VTK files")
    run.add_argument("--levels", type=int, help="override the number of levels (uniform) or the level cap (adaptive)")
    run.add_argument("--mode", choices=("uniform", "adaptive"), help="override the refinement mode")

    sub.add_parser("case-list", help="list the benchmark cases")

    chk = sub.add_parser("check", help="validate a config file without running it")
    chk.add_argument("config")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "case-list":
        for name, desc in case_names().items():
            print(f"{name:16s} {desc}")
        return EXIT_OK

    try:
        cfg = load_config(args.config)
        if args.command == "run":
            changes = {k: v for k, v in (("mode", args.mode), ("output_dir", args.output_dir)) if v is not None}
            if args.levels is not None:
                key = "levels" if changes.get("mode", cfg.mode) == "uniform" else "max_levels"
                changes[key] = args.levels
            if args.vtk:
                changes["vtk"] = True
            cfg = cfg.replace(**changes)
    except ConfigError as exc:
        print(f"config error in {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "check":
        print(f"{args.config}: ok ({cfg.case}, {cfg.mode})")
        return EXIT_OK

    from .experiment import run_experiment, summary, write_outputs

    result = run_experiment(cfg, keep_solutions=cfg.vtk)
    if result.rows:
        try:
            paths = write_outputs(result)
        except OSError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_CONFIG
        print(summary(result))
        print(f"wrote {paths[0]}" + (f" and {len(paths) - 1} VTK files" if len(paths) > 1 else ""))
    if result.error is not None:
        print(f"solver failure: {result.error}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
