"""Command line: ``specshare run | sweep | compare``.

Exit codes: 0 success, 1 bad input (missing file, schema, matrix), 2 the
simulator tripped one of its own invariants.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .crnet import MessageLog
from .engine import TRACE_COLUMNS, SimulationError, run
from .sweep import (CSV_COLUMNS, compare_sharing, dump_json, load_sweep_spec, rows_to_csv, run_sweep,
                    summarize_sweep)

log = logging.getLogger("specshare")

REPORT_COLUMNS = ("scope", "provider", "R_BL", "eta_sys", "eta_s", "c_e", "interference_mhz",
                  "blocked_calls", "processed_calls", "offered_intensity", "processed_intensity")


def _write(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _table(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def report_csv(result) -> str:
    m = result.report
    rows = [["aggregate", ""] + [m["aggregate"][c] for c in REPORT_COLUMNS[2:]]]
    for p in m["providers"]:
        rows.append(["provider", p["provider"]] + [p[c] for c in REPORT_COLUMNS[2:]])
    return _table(rows, REPORT_COLUMNS)


def cmd_run(args) -> None:
    overrides = {} if args.seed is None else {"seed": args.seed}
    cfg = load_config(args.config, **overrides)
    result = run(cfg, record_trace=args.trace is not None, record_messages=args.messages is not None)
    _write(result.to_json() if args.format == "json" else report_csv(result), args.out)
    if args.trace:
        Path(args.trace).write_text(_table(result.trace, TRACE_COLUMNS))
    if args.messages:
        Path(args.messages).write_text(_table(result.messages, MessageLog.COLUMNS))
    log.info("run finished: %d events, R_BL=%.6g", result.total_events, result.report["aggregate"]["R_BL"])


def cmd_sweep(args) -> None:
    spec = load_sweep_spec(args.spec)
    rows = run_sweep(spec, jobs=args.jobs)
    summary = summarize_sweep(rows)
    if args.format == "json":
        _write(dump_json({"parameter": spec.parameter, "rows": rows, "summary": summary}), args.out)
        return
    _write(rows_to_csv(rows, CSV_COLUMNS), args.out)
    if args.out is not None:
        out = Path(args.out)
        summary_path = out.with_name(out.stem + "_summary.csv")
        summary_path.write_text(rows_to_csv(summary, list(summary[0].keys())))


def cmd_compare(args) -> None:
    cfg = load_config(args.config)
    res = compare_sharing(cfg, args.reps, jobs=args.jobs)
    if args.format == "json":
        _write(dump_json(res), args.out)
    else:
        rows = res["replications"]
        _write(rows_to_csv(rows, list(rows[0].keys())), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specshare",
                                     description="Multi-provider spectrum sharing via CR sensing nodes.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--trace", help="write the event trace CSV here")
    p.add_argument("--messages", help="write the CR message log CSV here")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="replicated parameter sweep")
    p.add_argument("--spec", required=True)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="paired sharing on/off replications")
    p.add_argument("--config", required=True)
    p.add_argument("--reps", type=int, default=30)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except SimulationError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
