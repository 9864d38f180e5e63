"""Command-line front end: ``vclicsim run|compare|sweep|validate``.

Exit status is 0 on success, 1 for an invalid scenario and 2 when the
simulation itself fails.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ValidationError, VclicSimError
from .harness import (
    COMPARE_FIELDS,
    compare,
    export,
    load_scenario,
    rows_to_csv,
    run_scenario,
    sweep,
)
from .sw_stack import PROFILE_DIR_ENV

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _parse_value(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text in ("true", "false"):
        return text == "true"
    return text


def _cmd_run(args) -> None:
    result = run_scenario(load_scenario(args.scenario))
    if args.trace:
        export(result.trace, "json" if args.trace.endswith(".jsonl") else "csv", args.trace)
    text = export(result, "csv", args.csv)
    if not args.csv:
        sys.stdout.write(text)


def _cmd_compare(args) -> None:
    rows = compare([load_scenario(p) for p in args.scenarios], baseline=args.baseline, workers=args.workers)
    sys.stdout.write(rows_to_csv(rows, COMPARE_FIELDS))


def _cmd_sweep(args) -> None:
    values = [_parse_value(v) for v in args.values.split(",") if v.strip()]
    rows = sweep(load_scenario(args.scenario), args.param, values, workers=args.workers)
    text = rows_to_csv(rows)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_validate(args) -> None:
    s = load_scenario(args.scenario)
    print(f"{args.scenario}: ok ({s.ic}, {s.mode}, {len(s.stimulus)} stimulus lines)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="vclicsim",
        description="Interrupt latency simulator for virtualized RISC-V CLIC systems.",
        epilog=f"Extra cost profiles are looked up as <name>.toml in ${PROFILE_DIR_ENV}.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario and print per-line latency CSV")
    r.add_argument("scenario")
    r.add_argument("--trace", help="write the event trace (CSV, or JSON lines for *.jsonl)")
    r.add_argument("--csv", help="write the stats CSV here instead of stdout")
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("compare", help="tabulate several scenarios against a baseline")
    c.add_argument("scenarios", nargs="+")
    c.add_argument("--baseline", help="scenario name to normalise against (default: first)")
    c.add_argument("--workers", type=int, default=None)
    c.set_defaults(func=_cmd_compare)

    s = sub.add_parser("sweep", help="rerun a scenario over values of one parameter")
    s.add_argument("scenario")
    s.add_argument("--param", required=True, help="dotted path, e.g. bus.traffic_rate or vms.*.delegated_irq_count")
    s.add_argument("--values", required=True, help="comma-separated list")
    s.add_argument("--csv")
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=_cmd_sweep)

    v = sub.add_parser("validate", help="check a scenario file without running it")
    v.add_argument("scenario")
    v.set_defaults(func=_cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (VclicSimError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK
