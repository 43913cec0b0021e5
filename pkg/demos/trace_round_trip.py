"""Export a builtin scenario as a JSONL trace and replay it.

This is what the ``dmaemu`` command does, driven from Python: the replayed
report matches the one produced by simulating the scenario directly.

    python demos/trace_round_trip.py [SCENARIO]
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

from dmaemu import get_scenario, run_scenario
from dmaemu.cli import main as cli
from dmaemu.engine import dumps_report


def main(name: str = "reconfigure_stream") -> None:
    scenario = get_scenario(name)
    with tempfile.TemporaryDirectory() as tmp:
        trace = Path(tmp) / f"{name}.jsonl"
        report = Path(tmp) / "report.json"
        cli(["export", name, "--trace", str(trace)])
        print(f"{trace.name}: {len(trace.read_text().splitlines())} records, first two:")
        for line in trace.read_text().splitlines()[:2]:
            print("  " + line)
        rc = cli(["replay", "--trace", str(trace), "--profile", scenario.profile,
                  "--report", str(report), "-q"])
        replayed = report.read_text()

    direct = run_scenario(scenario).report
    print(f"replay exit status {rc}; identical to direct run: {replayed == dumps_report(direct)}")
    print(json.dumps(json.loads(replayed)["totals"], indent=2))


if __name__ == "__main__":
    main(*sys.argv[1:2])
