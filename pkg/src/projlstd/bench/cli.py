"""``projlstd`` command line.

    projlstd solve|estimate|sweep|bench|verify [--config PATH] [--out DIR]
             [--seed U64] [--jobs K] [--suite NAME ...]

Exit status: 0 success, 1 configuration error, 2 verification failure,
3 runtime failure.  ``PROJLSTD_JOBS`` sets the default worker count.
"""

import argparse
import json
import logging
import os
import sys
from importlib import resources

from . import experiments, io, verify
from .config import ConfigError, load

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("projlstd")


def _u64(text):
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="projlstd", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=["solve", "estimate", "sweep", "bench", "verify"])
    parser.add_argument("--config", help="JSON config (default: the bundled ring config)")
    parser.add_argument("--out", help="output directory (default: the config's 'output')")
    parser.add_argument("--seed", type=_u64, help="override the master seed")
    parser.add_argument("--jobs", type=int, help="worker processes (default: $PROJLSTD_JOBS or 1)")
    parser.add_argument("--suite", action="append", choices=verify.SUITES,
                        help="verify suite to run (repeatable; default: all)")
    parser.add_argument("-q", "--quiet", action="store_true")
    return parser


def default_config_path(name="ring5.json"):
    return str(resources.files("projlstd").joinpath("configs", name))


def _load(args):
    path = args.config or default_config_path()
    return load(path, seed_override=args.seed)


def _write_grid(cfg, out, rows, timings):
    io.write_csv(os.path.join(out, "results.csv"), experiments.RESULT_COLUMNS, rows)
    io.write_csv(os.path.join(out, "timings.csv"), experiments.TIMING_COLUMNS, timings)


def cmd_solve(cfg, out, args):
    columns, states, summary = experiments.solve_tables(cfg)
    io.write_csv(os.path.join(out, "states.csv"), columns, states)
    io.write_csv(os.path.join(out, "solve_summary.csv"), experiments.SOLVE_SUMMARY_COLUMNS, summary)
    return EXIT_OK


def cmd_estimate(cfg, out, args):
    rows, timings = experiments.run_grid(cfg, jobs=experiments.resolve_jobs(args.jobs))
    _write_grid(cfg, out, rows, timings)
    failed = sum(r["status"] != "ok" for r in rows)
    if failed:
        log.warning("%d of %d rows failed; see the status column", failed, len(rows))
    return EXIT_OK


def cmd_sweep(cfg, out, args):
    setup = experiments.build_setup(cfg)
    rows, timings = experiments.run_grid(cfg, jobs=experiments.resolve_jobs(args.jobs),
                                         setup=setup)
    _write_grid(cfg, out, rows, timings)
    table = experiments.tradeoff_table(cfg, setup, rows)
    io.write_csv(os.path.join(out, "tradeoff.csv"), experiments.TRADEOFF_COLUMNS, table)
    io.write_csv(os.path.join(out, "summary.csv"), experiments.SUMMARY_COLUMNS,
                 experiments.argmin_summary(cfg, table))
    return EXIT_OK


def cmd_bench(cfg, out, args):
    rows, summary = experiments.run_bench(cfg)
    io.write_csv(os.path.join(out, "bench.csv"), experiments.BENCH_COLUMNS, rows)
    io.write_csv(os.path.join(out, "bench_summary.csv"), experiments.BENCH_SUMMARY_COLUMNS, summary)
    for s in summary:
        log.info("%s = %s", s["metric"], s["value"])
    return EXIT_OK


def cmd_verify(cfg, out, args):
    suites = args.suite or list(verify.SUITES)
    rows = []
    for suite in suites:
        rows.extend(verify.run_suite(cfg, suite))
    io.write_csv(os.path.join(out, "verify.csv"), verify.COLUMNS, rows)
    for r in rows:
        log.info("%s %s/%s empirical=%.6g analytic=%.6g", "PASS" if r["passed"] else "FAIL",
                 r["suite"], r["check"], r["empirical"], r["analytic"])
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_VERIFY


COMMANDS = {"solve": cmd_solve, "estimate": cmd_estimate, "sweep": cmd_sweep,
            "bench": cmd_bench, "verify": cmd_verify}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _load(args)
        out = args.out or cfg.output
        io.write_sidecar(out, cfg, args.command)
        return COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "problems": exc.problems}, indent=2), file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported, mapped to an exit status
        log.error("runtime failure: %s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
