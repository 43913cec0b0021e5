"""Scripted synthetic-firmware scenarios.

A scenario is a JSON document naming a memory-map profile, an ordered list
of steps in the same shape as trace records, and an ``expect`` block.  Each
step receives ``seq = index + 1``; labels consume a sequence number but are
not fed to the engine.

Supported expectation keys (all optional)::

    configs_detected, input_channels, output_channels, unused_channels,
    buffers_sized, injections, bytes_injected      -> ints compared to totals
    terminations     -> {"reconfigured": n, ...}
    channels         -> list of per-channel dicts, matched in creation order
    injected_data    -> {"0x20000100": "00ff"}  shadow RAM contents
    known_miss       -> true: the scenario documents a detection miss
    checkpoints      -> {"label": {...any of the above...}}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .engine import DmaEngine, build_report
from .events import VALID_WIDTHS
from .input_source import InputProvider, ZeroProvider
from .memory_map import AddressClass, ProfileError, resolve_profile


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class MmioWrite:
    addr: int
    width: int
    value: int


@dataclass(frozen=True)
class RamRead:
    addr: int
    width: int


@dataclass(frozen=True)
class RamWrite:
    addr: int
    width: int
    value: int


@dataclass(frozen=True)
class Label:
    text: str


ScenarioStep = Union[MmioWrite, RamRead, RamWrite, Label]


@dataclass(frozen=True)
class Scenario:
    name: str
    profile: str
    steps: tuple
    expect: dict = field(default_factory=dict)
    description: str = ""

    def labels(self) -> list[str]:
        return [s.text for s in self.steps if isinstance(s, Label)]

    def to_dict(self) -> dict:
        return {"name": self.name, "profile": self.profile,
                "description": self.description,
                "steps": [step_to_record(s) for s in self.steps],
                "expect": self.expect}


def step_to_record(step: ScenarioStep) -> dict:
    if isinstance(step, Label):
        return {"op": "label", "text": step.text}
    if isinstance(step, RamRead):
        return {"op": "r", "addr": f"0x{step.addr:08x}", "width": step.width}
    return {"op": "w", "addr": f"0x{step.addr:08x}", "width": step.width,
            "value": f"0x{step.value:x}"}


def _hexint(raw, what: str) -> int:
    if isinstance(raw, str) and raw.lower().startswith("0x"):
        try:
            return int(raw, 16)
        except ValueError:
            pass
    raise ScenarioError(f"{what}: expected 0x-prefixed hex, got {raw!r}")


_TOTAL_KEYS = ("configs_detected", "input_channels", "output_channels",
               "unused_channels", "buffers_sized", "injections", "bytes_injected")
_EXPECT_KEYS = set(_TOTAL_KEYS) | {"terminations", "channels", "injected_data",
                                   "known_miss", "checkpoints"}


def parse_scenario(doc: dict) -> Scenario:
    try:
        name = doc["name"]
        profile_name = doc["profile"]
        raw_steps = doc["steps"]
    except KeyError as e:
        raise ScenarioError(f"scenario missing field {e.args[0]!r}") from None
    try:
        profile = resolve_profile(profile_name)
    except ProfileError as e:
        raise ScenarioError(str(e)) from None
    steps: list[ScenarioStep] = []
    for i, rec in enumerate(raw_steps):
        where = f"{name} step {i + 1}"
        op = rec.get("op")
        if op == "label":
            steps.append(Label(str(rec.get("text", ""))))
            continue
        if op not in ("r", "w"):
            raise ScenarioError(f"{where}: unknown op {op!r}")
        addr = _hexint(rec.get("addr"), f"{where} addr")
        width = rec.get("width")
        if width not in VALID_WIDTHS:
            raise ScenarioError(f"{where}: width {width!r} not in {VALID_WIDTHS}")
        cls = profile.classify(addr)
        if op == "r":
            if cls is not AddressClass.RAM:
                raise ScenarioError(f"{where}: read of non-RAM address 0x{addr:08x}")
            steps.append(RamRead(addr, width))
            continue
        value = _hexint(rec.get("value"), f"{where} value")
        if value >= 1 << (8 * width):
            raise ScenarioError(f"{where}: value 0x{value:x} wider than {width} byte(s)")
        if cls is AddressClass.MMIO:
            steps.append(MmioWrite(addr, width, value))
        elif cls is AddressClass.RAM:
            steps.append(RamWrite(addr, width, value))
        else:
            raise ScenarioError(f"{where}: write to {cls.value} address 0x{addr:08x}")
    expect = doc.get("expect", {})
    scenario = Scenario(name, profile_name, tuple(steps), expect, doc.get("description", ""))
    _check_expectations(scenario)
    return scenario


def _check_expectations(s: Scenario) -> None:
    labels = set(s.labels())
    step_addrs = {st.addr for st in s.steps if not isinstance(st, Label)}

    def check(block: dict, where: str) -> None:
        unknown = set(block) - _EXPECT_KEYS
        if unknown:
            raise ScenarioError(f"{where}: unknown expectation(s) {sorted(unknown)}")
        for ch in block.get("channels", []):
            if "stream_key" in ch and _hexint(ch["stream_key"], where) not in step_addrs:
                raise ScenarioError(f"{where}: stream_key {ch['stream_key']} not written by any step")
        for addr in block.get("injected_data", {}):
            _hexint(addr, where)

    check(s.expect, s.name)
    for label, block in s.expect.get("checkpoints", {}).items():
        if label not in labels:
            raise ScenarioError(f"{s.name}: expectation references missing label {label!r}")
        if "checkpoints" in block:
            raise ScenarioError(f"{s.name}: nested checkpoints under {label!r}")
        check(block, f"{s.name}@{label}")


def load_scenario_file(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ScenarioError(f"{path}: {e}") from None
    return parse_scenario(doc)


def builtin_scenarios() -> list[Scenario]:
    pkg = resources.files("dmaemu") / "scenarios"
    out = []
    for entry in sorted(pkg.iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            out.append(parse_scenario(json.loads(entry.read_text(encoding="utf-8"))))
    return out


def get_scenario(name_or_path: str) -> Scenario:
    for s in builtin_scenarios():
        if s.name == name_or_path:
            return s
    if Path(name_or_path).is_file():
        return load_scenario_file(name_or_path)
    raise ScenarioError(f"unknown scenario {name_or_path!r}")


def scenario_events(s: Scenario):
    """Yield ``(seq, step)`` pairs, labels included."""
    for i, step in enumerate(s.steps):
        yield i + 1, step


@dataclass
class Verdict:
    name: str
    expected: object
    actual: object
    passed: bool
    at: Optional[str] = None

    def to_dict(self) -> dict:
        d = {"name": self.name, "expected": self.expected, "actual": self.actual,
             "pass": self.passed}
        if self.at is not None:
            d["at"] = self.at
        return d


@dataclass
class ScenarioReport:
    scenario: str
    verdicts: list[Verdict]
    report: dict

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_dict(self) -> dict:
        return {**self.report, "scenario": self.scenario, "passed": self.passed,
                "verdicts": [v.to_dict() for v in self.verdicts]}


def _evaluate(block: dict, report: dict, engine: DmaEngine, at: Optional[str]) -> list[Verdict]:
    out = []
    totals = report["totals"]
    for key in _TOTAL_KEYS:
        if key in block:
            out.append(Verdict(key, block[key], totals[key], totals[key] == block[key], at))
    if "terminations" in block:
        actual: dict[str, int] = {}
        for ch in report["channels"]:
            if ch["termination"] is not None:
                actual[ch["termination"]] = actual.get(ch["termination"], 0) + 1
        out.append(Verdict("terminations", block["terminations"], actual,
                           actual == block["terminations"], at))
    if "channels" in block:
        rows = report["channels"]
        exp_rows = block["channels"]
        out.append(Verdict("channels.count", len(exp_rows), len(rows),
                           len(rows) == len(exp_rows), at))
        for i, exp in enumerate(exp_rows):
            row = rows[i] if i < len(rows) else {}
            for k, v in exp.items():
                got = _channel_field(row, k)
                want = v.lower() if isinstance(v, str) else v
                out.append(Verdict(f"channels[{i}].{k}", v, got, got == want, at))
    if "injected_data" in block:
        for addr_s, hexdata in block["injected_data"].items():
            addr = int(addr_s, 16)
            want = bytes.fromhex(hexdata)
            got = engine.shadow.peek(addr, len(want))
            out.append(Verdict(f"injected_data[{addr_s}]", hexdata,
                               None if got is None else got.hex(), got == want, at))
    if block.get("known_miss"):
        missed = totals["configs_detected"] == 0
        out.append(Verdict("known_miss", True, missed, missed, at))
    return out


def _channel_field(row: dict, key: str):
    if not row:
        return None
    if key == "pointers":
        return len(row["pointers"])
    if key == "buffers":
        return len(row["buffers"])
    if key == "perceived_sizes":
        return [b["perceived_size"] for b in row["buffers"]]
    if key == "source_class":
        src = row["source"]
        for p in row["pointers"]:
            if p["value"] == src:
                return p["class"]
        return None
    return row.get(key)


def run_scenario(s: Scenario, engine: Optional[DmaEngine] = None,
                 provider: Optional[InputProvider] = None) -> ScenarioReport:
    if engine is None:
        try:
            profile = resolve_profile(s.profile)
        except ProfileError as e:
            raise ScenarioError(str(e)) from None
        engine = DmaEngine(profile, provider if provider is not None else ZeroProvider())
    checkpoints = s.expect.get("checkpoints", {})
    verdicts: list[Verdict] = []
    for seq, step in scenario_events(s):
        if isinstance(step, Label):
            if step.text in checkpoints:
                mid = build_report(engine.profile.name, engine.snapshot(), [])
                verdicts += _evaluate(checkpoints[step.text], mid, engine, step.text)
            continue
        if isinstance(step, RamRead):
            engine.process(seq, False, step.addr, step.width)
        else:
            engine.process(seq, True, step.addr, step.width, step.value)
    engine.finish()
    report = engine.report()
    verdicts += _evaluate(s.expect, report, engine, None)
    return ScenarioReport(s.name, verdicts, report)


def synthetic_workload(n_events: int, seed: int = 0):
    """Yield ``(seq, is_write, addr, width, value)`` for a busy stm32f103-like run.

    Four DMA streams are repeatedly reprogrammed into fresh receive buffers
    that firmware then drains; the rest is stack traffic, peripheral status
    polling and stray pointer-like MMIO writes.  Deterministic for a seed.
    """
    import random

    rng = random.Random(seed)
    streams = [0x40020060 + 0x14 * i for i in range(4)]
    periph = [0x40013804, 0x40004404, 0x40004804, 0x4001244C]
    seq = 0
    pending: list[tuple[int, int, int]] = []  # (next addr, end, width)
    while seq < n_events:
        roll = rng.random()
        if roll < 0.004:
            i = rng.randrange(4)
            buf = 0x20000200 + rng.randrange(0, 0x4000, 0x40)
            width = rng.choice((1, 2, 4))
            for addr, val in ((streams[i] - 4, rng.randrange(1, 256)), (streams[i], periph[i]),
                              (streams[i] + 4, buf)):
                seq += 1
                yield seq, True, addr, 4, val
            pending.append((buf, buf + rng.randrange(8, 64, 4), width))
        elif roll < 0.55 and pending:
            j = rng.randrange(len(pending))
            addr, end, width = pending[j]
            seq += 1
            yield seq, False, addr, width, 0
            if addr + width >= end:
                pending.pop(j)
            else:
                pending[j] = (addr + width, end, width)
        elif roll < 0.75:
            seq += 1
            yield seq, False, 0x20004800 + rng.randrange(0, 0x700, 4), 4, 0
        elif roll < 0.85:
            seq += 1
            yield seq, True, 0x20004800 + rng.randrange(0, 0x700, 4), 4, rng.getrandbits(32)
        elif roll < 0.95:
            seq += 1
            yield seq, False, 0x40013800, 4, 0
        else:
            seq += 1
            yield seq, True, 0x40010000 + rng.randrange(0, 0x100, 4), 4, rng.choice(
                (0x20000010, 0x00000001, 0x08000400, 0x0000FFFF))
