"""Command-line frontend.

Exit codes: 0 success, 1 scenario expectation failure, 2 bad input (malformed
trace, unknown scenario or profile), 3 input stream exhausted under
``--on-exhaustion halt``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .engine import DmaEngine, dumps_report
from .input_source import Exhaustion, InputExhausted, InputProvider, StreamProvider, ZeroProvider
from .memory_map import BUILTIN_PROFILES, DEFAULT_PROFILE, ProfileError, resolve_profile
from .scenario_sim import (Label, RamRead, ScenarioError, builtin_scenarios, get_scenario,
                           run_scenario, scenario_events)
from .trace_io import TraceError, TraceWriter, iter_trace

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_EXHAUSTED = 3


def make_provider(choice: str, exhaustion: str = "zeropad") -> InputProvider:
    if choice == "zeros":
        return ZeroProvider()
    if choice.startswith("file:"):
        data = Path(choice[5:]).read_bytes()
        return StreamProvider(data, Exhaustion(exhaustion))
    raise ValueError(f"--input must be 'zeros' or 'file:PATH', got {choice!r}")


def replay(path, engine: DmaEngine) -> DmaEngine:
    """Stream a JSONL trace through ``engine`` and close the session."""
    engine.process_many(iter_trace(path))
    engine.finish()
    return engine


class _AuditLog:
    def __init__(self, path):
        self._fh = open(path, "w", encoding="utf-8")

    def __call__(self, record: dict) -> None:
        self._fh.write(json.dumps(record, sort_keys=True) + "\n")

    def close(self) -> None:
        self._fh.close()


def _write_report(report: dict, path: Optional[str]) -> None:
    text = dumps_report(report)
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _summary(report: dict, out=sys.stderr) -> None:
    t = report["totals"]
    print(f"profile {report['profile']}: {t['configs_detected']} config(s), "
          f"{t['input_channels']} input / {t['output_channels']} output / "
          f"{t['unused_channels']} unused channel(s), {t['injections']} injection(s), "
          f"{t['bytes_injected']} byte(s)", file=out)
    for ch in report["channels"]:
        print(f"  {ch['stream_key']} {ch['direction']:<12} size={ch['perceived_size']:<5} "
              f"created@{ch['created_at']} end={ch['termination']}", file=out)


def cmd_replay(args) -> int:
    try:
        profile = resolve_profile(args.profile)
        provider = make_provider(args.input, args.on_exhaustion)
    except (ProfileError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT
    audit = _AuditLog(args.audit) if args.audit else None
    engine = DmaEngine(profile, provider, audit)
    status = EXIT_OK
    try:
        replay(args.trace, engine)
    except TraceError as e:
        print(f"error: {args.trace}: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except InputExhausted as e:
        print(f"input exhausted: {e}", file=sys.stderr)
        engine.finish()
        status = EXIT_EXHAUSTED
    finally:
        if audit is not None:
            audit.close()
    report = engine.report()
    _write_report(report, args.report)
    if not args.quiet:
        _summary(report)
    return status


def cmd_simulate(args) -> int:
    try:
        scenario = get_scenario(args.scenario)
        provider = make_provider(args.input, args.on_exhaustion)
        profile = resolve_profile(scenario.profile)
    except (ScenarioError, ProfileError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT
    engine = DmaEngine(profile, provider)
    try:
        result = run_scenario(scenario, engine)
    except InputExhausted as e:
        print(f"input exhausted: {e}", file=sys.stderr)
        engine.finish()
        _write_report(engine.report(), args.report)
        return EXIT_EXHAUSTED
    _write_report(result.to_dict(), args.report)
    if not args.quiet:
        _summary(result.report)
        for v in result.verdicts:
            if not v.passed:
                at = f" @{v.at}" if v.at else ""
                print(f"  FAIL {v.name}{at}: expected {v.expected!r}, got {v.actual!r}",
                      file=sys.stderr)
        print(f"{scenario.name}: {'PASS' if result.passed else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if result.passed else EXIT_FAILED


def export_scenario(scenario, path) -> int:
    with TraceWriter(path) as tw:
        for seq, step in scenario_events(scenario):
            if isinstance(step, Label):
                tw.write(seq, "label", text=step.text)
            elif isinstance(step, RamRead):
                tw.write(seq, "r", step.addr, step.width)
            else:
                tw.write(seq, "w", step.addr, step.width, step.value)
        return tw.count


def cmd_export(args) -> int:
    try:
        scenario = get_scenario(args.scenario)
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT
    try:
        export_scenario(scenario, args.trace)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT
    return EXIT_OK


def cmd_profiles(args) -> int:
    for name, p in BUILTIN_PROFILES.items():
        ram = ", ".join(str(r) for r in p.ram)
        flash = ", ".join(str(r) for r in p.flash)
        print(f"{name:<22} mmio {p.mmio}  ram [{ram}]  flash [{flash}]")
    return EXIT_OK


def cmd_scenarios(args) -> int:
    for s in builtin_scenarios():
        print(f"{s.name:<30} {s.profile:<12} {len(s.steps):>3} steps")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dmaemu",
                                 description="Detect and feed DMA input channels in memory-access traces.")
    sub = ap.add_subparsers(dest="command", required=True)

    def input_opts(p):
        p.add_argument("--input", default="zeros", help="zeros | file:PATH (default: zeros)")
        p.add_argument("--on-exhaustion", choices=["zeropad", "halt"], default="zeropad")
        p.add_argument("--report", default=None, help="report JSON path (default: stdout)")
        p.add_argument("-q", "--quiet", action="store_true")

    p = sub.add_parser("replay", help="replay a JSONL trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--profile", default=DEFAULT_PROFILE)
    p.add_argument("--audit", default=None, help="write every engine decision as JSONL")
    input_opts(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("simulate", help="run a builtin or file scenario")
    p.add_argument("scenario", help="builtin scenario name or scenario JSON path")
    input_opts(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("export", help="write a scenario's events as a JSONL trace")
    p.add_argument("scenario")
    p.add_argument("--trace", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("profiles", help="memory-map profiles")
    p.add_argument("action", choices=["list"])
    p.set_defaults(func=cmd_profiles)

    p = sub.add_parser("scenarios", help="builtin scenarios")
    p.add_argument("action", choices=["list"])
    p.set_defaults(func=cmd_scenarios)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
