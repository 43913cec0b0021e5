from __future__ import annotations

import json
import subprocess
import sys

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from dmaemu import builtin_scenarios, get_scenario, run_scenario
from dmaemu.cli import main
from dmaemu.engine import dumps_report
from dmaemu.trace_io import TraceError, read_trace

NAMES = [s.name for s in builtin_scenarios()]
VERDICT_KEYS = {"scenario", "passed", "verdicts"}


def export(name, path):
    assert main(["export", name, "--trace", str(path)]) == 0
    return path.read_text().splitlines()


def load(path):
    return json.loads(path.read_text())


def test_replay_uart_export_with_zeros(tmp_path):
    trace, report = tmp_path / "t.jsonl", tmp_path / "r.json"
    export("uart_rx_basic", trace)
    rc = main(["replay", "--trace", str(trace), "--profile", "stm32f103", "--input", "zeros",
               "--report", str(report), "-q"])
    assert rc == 0
    rep = load(report)
    assert rep["totals"]["input_channels"] == 1
    assert rep["totals"]["injections"] == 8
    assert rep["channels"][0]["perceived_size"] == 8


def test_malformed_width_names_line(tmp_path, capsys):
    trace = tmp_path / "t.jsonl"
    lines = export("uart_rx_basic", trace)
    rec = json.loads(lines[6])
    rec["width"] = 3
    lines[6] = json.dumps(rec)
    trace.write_text("\n".join(lines) + "\n")
    rc = main(["replay", "--trace", str(trace), "--profile", "stm32f103", "-q",
               "--report", str(tmp_path / "r.json")])
    assert rc == 2
    assert "line 7" in capsys.readouterr().err


def test_halt_on_exhaustion_exits_3(tmp_path):
    trace, data, report = tmp_path / "t.jsonl", tmp_path / "two_bytes.bin", tmp_path / "r.json"
    export("uart_rx_basic", trace)
    data.write_bytes(b"\x01\x02")
    rc = main(["replay", "--trace", str(trace), "--profile", "stm32f103",
               "--input", f"file:{data}", "--on-exhaustion", "halt", "--report", str(report),
               "-q"])
    assert rc == 3
    assert load(report)["totals"]["bytes_injected"] == 2


def test_zero_pad_file_input_completes(tmp_path):
    trace, data, report = tmp_path / "t.jsonl", tmp_path / "two_bytes.bin", tmp_path / "r.json"
    export("uart_rx_basic", trace)
    data.write_bytes(b"\x01\x02")
    rc = main(["replay", "--trace", str(trace), "--profile", "stm32f103",
               "--input", f"file:{data}", "--report", str(report), "-q"])
    assert rc == 0
    assert load(report)["totals"]["bytes_injected"] == 8


def test_simulate_exit_codes(tmp_path):
    assert main(["simulate", "uart_rx_basic", "-q", "--report", str(tmp_path / "a.json")]) == 0
    assert main(["simulate", "nosuch", "-q"]) == 2
    report = tmp_path / "k.json"
    assert main(["simulate", "easydma_dest_only", "-q", "--report", str(report)]) == 0
    verdicts = {v["name"]: v for v in load(report)["verdicts"]}
    assert verdicts["known_miss"]["pass"] is True


def test_simulate_failing_expectation_exits_1_and_still_reports(tmp_path):
    doc = get_scenario("uart_rx_basic").to_dict()
    doc["expect"] = {"injections": 99}
    path, report = tmp_path / "bad.json", tmp_path / "r.json"
    path.write_text(json.dumps(doc))
    assert main(["simulate", str(path), "-q", "--report", str(report)]) == 1
    rep = load(report)
    assert rep["passed"] is False
    assert rep["verdicts"][0]["actual"] == 8


def test_unknown_profile_and_missing_trace_exit_2(tmp_path):
    trace = tmp_path / "t.jsonl"
    export("uart_rx_basic", trace)
    assert main(["replay", "--trace", str(trace), "--profile", "nosuch", "-q"]) == 2
    assert main(["replay", "--trace", str(tmp_path / "missing"), "-q"]) == 2
    assert main(["export", "nosuch", "--trace", str(trace)]) == 2


@pytest.mark.parametrize("name", NAMES)
def test_export_shape(name, tmp_path):
    lines = export(name, tmp_path / "t.jsonl")
    s = get_scenario(name)
    assert len(lines) == len(s.steps)
    assert [json.loads(x)["seq"] for x in lines] == list(range(1, len(lines) + 1))


@pytest.mark.parametrize("name", NAMES)
def test_export_replay_matches_simulate(name, tmp_path):
    s = get_scenario(name)
    trace, rep_replay, rep_sim = tmp_path / "t.jsonl", tmp_path / "a.json", tmp_path / "b.json"
    export(name, trace)
    assert main(["replay", "--trace", str(trace), "--profile", s.profile,
                 "--report", str(rep_replay), "-q"]) == 0
    assert main(["simulate", name, "--report", str(rep_sim), "-q"]) == 0
    sim = load(rep_sim)
    for k in VERDICT_KEYS:
        sim.pop(k)
    assert rep_replay.read_text() == dumps_report(sim)


@pytest.mark.parametrize("name", NAMES)
def test_report_totals_are_channel_sums(name):
    rep = run_scenario(get_scenario(name)).report
    t, rows = rep["totals"], rep["channels"]
    assert t["configs_detected"] == len(rows)
    for key, direction in (("input_channels", "input"), ("output_channels", "output"),
                           ("unused_channels", "undetermined")):
        assert t[key] == sum(r["direction"] == direction for r in rows)
    for key in ("buffers_sized", "injections", "bytes_injected"):
        assert t[key] == sum(r[key] for r in rows)


def test_report_serialization_is_stable():
    rep = run_scenario(get_scenario("adc_circular_multi_dest")).to_dict()
    text = dumps_report(rep)
    assert text == json.dumps(rep, sort_keys=True, indent=2) + "\n"
    assert '"0x' in text and "0X" not in text


def test_profiles_and_scenarios_list(capsys):
    assert main(["profiles", "list"]) == 0
    out = capsys.readouterr().out
    for name in ("stm32f103", "pic32", "generic-armv7m-512mb", "gd32vf103-riscv"):
        assert name in out
    assert main(["scenarios", "list"]) == 0
    out = capsys.readouterr().out
    assert all(n in out for n in NAMES)


def test_default_profile_is_generic(tmp_path):
    trace, report = tmp_path / "t.jsonl", tmp_path / "r.json"
    export("uart_rx_basic", trace)
    assert main(["replay", "--trace", str(trace), "--report", str(report), "-q"]) == 0
    assert load(report)["profile"] == "generic-armv7m-512mb"


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "dmaemu", "simulate", "uart_rx_basic", "-q",
                          "--report", str(tmp_path / "r.json")])
    assert out.returncode == 0


CORRUPTIONS = [
    lambda r: {**r, "width": 3},
    lambda r: {**r, "op": "x"},
    lambda r: {**r, "addr": "20000100"},
    lambda r: {**r, "addr": "0x1ffffffff"},
    lambda r: {**r, "seq": -1},
    lambda r: {k: v for k, v in r.items() if k != "seq"},
    lambda r: {**r, "op": "r", "value": "0x1"},
    lambda r: {**r, "op": "w", "width": 1, "value": "0x100"},
    lambda r: "not json",
    lambda r: [1, 2],
]


@settings(max_examples=80, deadline=None,
          suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(name=st.sampled_from(NAMES), pick=st.integers(0, 10_000),
       corrupt=st.sampled_from(range(len(CORRUPTIONS))))
def test_any_malformed_line_exits_2_naming_it(tmp_path, capsys, name, pick, corrupt):
    trace = tmp_path / "t.jsonl"
    lines = export(name, trace)
    access = [j for j, x in enumerate(lines) if json.loads(x)["op"] != "label"]
    i = access[pick % len(access)]
    bad = CORRUPTIONS[corrupt](json.loads(lines[i]))
    lines[i] = bad if isinstance(bad, str) else json.dumps(bad)
    trace.write_text("\n".join(lines) + "\n")
    with pytest.raises(TraceError) as exc:
        list(read_trace(trace))
    assert exc.value.line == i + 1
    capsys.readouterr()
    rc = main(["replay", "--trace", str(trace), "--profile", get_scenario(name).profile,
               "-q", "--report", str(tmp_path / "r.json")])
    assert rc == 2
    assert f"line {i + 1}:" in capsys.readouterr().err


def test_non_increasing_seq_rejected(tmp_path):
    trace = tmp_path / "t.jsonl"
    lines = export("uart_rx_basic", trace)
    lines[3], lines[4] = lines[4], lines[3]
    trace.write_text("\n".join(lines) + "\n")
    with pytest.raises(TraceError) as exc:
        list(read_trace(trace))
    assert exc.value.line == 5
