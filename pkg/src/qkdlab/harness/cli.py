"""Command-line front end.

    qkdlab cv       [--scenario CvPassive|CvHeterodyneResend|CvExcessNoiseTest]
    qkdlab bb84
    qkdlab decoy    [--scenario DecoyPns|DecoyCbs]
    qkdlab keyrate
    qkdlab optimize

Common options: ``--config PATH``, ``--seed U64``, ``--trials N``,
``--out PATH``, ``--format json|csv``, ``--workers N``,
``--set key=value`` (repeatable), ``--sweep key=lo:hi:step``.

Exit codes: 0 success, 1 config error, 2 runtime error, 3 invariant violation.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .config import SUBCOMMANDS, ConfigError, Scenario, config_from_dict, load_config
from .report import emit_report, emit_sweep
from .runner import parse_sweep, run_scenario, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_INVARIANT = 0, 1, 2, 3


def _parse_set(items: Sequence[str]) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--set {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        try:
            out[key.strip()] = json.loads(text)
        except json.JSONDecodeError:
            out[key.strip()] = text
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qkdlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, scenarios in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run {' / '.join(s.value for s in scenarios)}")
        if len(scenarios) > 1:
            p.add_argument("--scenario", choices=[s.value for s in scenarios])
        p.add_argument("--config", help="JSON scenario config")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--trials", type=int, help="number of trials")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"))
        p.add_argument("--workers", type=int, default=1, help="worker threads")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a scenario parameter")
        p.add_argument("--sweep", metavar="KEY=LO:HI:STEP", help="grid sweep over one parameter")
        p.add_argument("--timing", action="store_true", help="include wall-clock time in JSON")
    return parser


def _resolve_config(args) -> "object":
    allowed = SUBCOMMANDS[args.command]
    if args.config:
        raw = json.loads(load_config(args.config).to_json())
    else:
        raw = {"scenario": (getattr(args, "scenario", None) or allowed[0].value)}
    if getattr(args, "scenario", None) and args.config and raw["scenario"] != args.scenario:
        raise ConfigError(f"--scenario {args.scenario} conflicts with config scenario {raw['scenario']}")
    if Scenario(raw["scenario"]) not in allowed:
        raise ConfigError(
            f"scenario {raw['scenario']} cannot run under '{args.command}'; "
            f"allowed: {[s.value for s in allowed]}"
        )
    if args.seed is not None:
        raw["master_seed"] = args.seed
    if args.trials is not None:
        raw["n_trials"] = args.trials
    raw.setdefault("parameters", {})
    raw["parameters"].update(_parse_set(args.set))
    output = raw.setdefault("output", {}) or {}
    if args.format:
        output["format"] = args.format
    if args.out:
        output["path"] = args.out
    raw["output"] = output
    return config_from_dict(raw)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _resolve_config(args)
        sweep = parse_sweep(args.sweep) if args.sweep else None
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    fmt = config.output_format
    dest = config.output_path
    try:
        if sweep:
            key, values = sweep
            results = run_sweep(config, key, values, args.workers)
            reports = [r for _, r in results]
            emit_sweep(key, results, fmt, dest)
        else:
            report = run_scenario(config, args.workers)
            reports = [report]
            emit_report(report, fmt, dest, include_timing=args.timing)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    codes = [e["code"] for r in reports for e in r.errors]
    for r in reports:
        for e in r.errors:
            print(f"{e['code']}: {e['message']}", file=sys.stderr)
    if "invariant_violation" in codes:
        return EXIT_INVARIANT
    if "config_error" in codes:
        return EXIT_CONFIG
    if codes:
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
