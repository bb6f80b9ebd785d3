"""Command line front end.

    telelink run    --config scenario.json [--seed N] [--report out.json]
    telelink budget --config scenario.json [--json]
    telelink status --report out.json [--json] [--no-color]
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .core import budget_table
from .netsim import ConfigError
from .runner import run
from .scenario import admit, load_registry_config, load_scenario

_COLORS = {"Ok": "\033[32m", "Warn": "\033[33m", "Stale": "\033[35m", "Fail": "\033[31m"}
_RESET = "\033[0m"


def _read_json(path: str) -> dict:
    p = Path(path)
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"no such file: {p}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(p)) from None


def cmd_budget(args: argparse.Namespace) -> int:
    data = _read_json(args.config)
    streams, caps = load_registry_config(data)
    table = budget_table(streams, caps)
    error = None
    try:
        admit(streams, caps)
    except ConfigError as exc:
        error = exc
    if args.json:
        out = table.to_dict()
        out["admitted"] = error is None
        if error is not None:
            out["error"] = str(error)
        print(json.dumps(out, indent=2, sort_keys=True))
    else:
        print(table.format_text())
    if error is not None:
        print(f"BudgetExceeded: {error}", file=sys.stderr)
        return 1
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config, seed=args.seed)
    report = run(scenario)
    text = report.to_json()
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    d = report.data
    print(
        f"{d['scenario']}: {d['verdict']} "
        f"({len(d['streams'])} streams, {d['layers']['watchdog_resets']} resets, "
        f"conservation {'ok' if d['conservation']['balanced'] else 'VIOLATED'})",
        file=sys.stderr,
    )
    return 0


def render_status(report: dict, color: bool = False) -> str:
    status = report["status"]
    uptime = {c["id"]: c["uptime"] for c in report.get("checks", [])}
    rows = status["checks"]
    width = max([len(r["id"]) for r in rows] + [5])
    lines = [f"{'check':<{width}}  {'status':<6}  {'uptime':>7}  message"]
    for r in rows:
        label = r["status"]
        cell = f"{label:<6}"
        if color:
            cell = f"{_COLORS.get(label, '')}{cell}{_RESET}"
        up = uptime.get(r["id"])
        up_text = f"{up * 100:6.1f}%" if up is not None else "      -"
        lines.append(f"{r['id']:<{width}}  {cell}  {up_text}  {r['message']}")
    agg = status["aggregate"]
    if color:
        agg = f"{_COLORS.get(agg, '')}{agg}{_RESET}"
    lines.append(f"aggregate: {agg} at t={status['at_us'] / 1e6:.1f} s")
    return "\n".join(lines)


def cmd_status(args: argparse.Namespace) -> int:
    report = _read_json(args.report)
    if "status" not in report:
        raise ConfigError("not a run report (no 'status' section)", args.report)
    if args.json:
        print(json.dumps(report["status"], indent=2, sort_keys=True))
    else:
        color = sys.stdout.isatty() if args.color is None else args.color
        print(render_status(report, color))
    return 0 if report["status"]["aggregate"] == "Ok" else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="telelink", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario and write a JSON report")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="overrides the scenario seed")
    p.add_argument("--report", help="report path (default: stdout)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("budget", help="print the static bandwidth budget table")
    p.add_argument("--config", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("status", help="show the final health table of a run report")
    p.add_argument("--report", required=True)
    p.add_argument("--json", action="store_true")
    p.add_argument("--color", dest="color", action="store_true", default=None)
    p.add_argument("--no-color", dest="color", action="store_false")
    p.set_defaults(func=cmd_status)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
