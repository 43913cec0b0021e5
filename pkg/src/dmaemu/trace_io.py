"""JSONL memory-access traces.

One record per line::

    {"seq": 1, "op": "w", "addr": "0x40020060", "width": 4, "value": "0x40013804"}
    {"seq": 2, "op": "r", "addr": "0x20000100", "width": 1}
    {"seq": 3, "op": "label", "text": "configured"}

``seq`` strictly increases; ``value`` is present on writes only.  Label
records carry scenario markers through export and are skipped on replay.
"""

from __future__ import annotations

import json
import re
from typing import Iterator, NamedTuple, Optional

from .events import VALID_WIDTHS

try:
    import orjson

    _loads = orjson.loads
    _JSONError: tuple = (orjson.JSONDecodeError,)
except ImportError:  # pragma: no cover
    _loads = json.loads
    _JSONError = (json.JSONDecodeError,)


class TraceError(ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class TraceRecord(NamedTuple):
    seq: int
    is_write: bool
    addr: int
    width: int
    value: int
    label: Optional[str] = None


def _hex(raw, field: str, line: int) -> int:
    if type(raw) is not str or raw[:2] not in ("0x", "0X"):
        raise TraceError(line, f"{field} must be a 0x-prefixed hex string")
    try:
        return int(raw, 16)
    except ValueError:
        raise TraceError(line, f"bad hex in {field}: {raw!r}") from None


def parse_record(line_bytes, lineno: int) -> TraceRecord:
    try:
        d = _loads(line_bytes)
    except _JSONError as e:
        raise TraceError(lineno, f"invalid JSON ({e})") from None
    if type(d) is not dict:
        raise TraceError(lineno, "record must be a JSON object")
    seq = d.get("seq")
    if type(seq) is not int or seq < 0 or seq >= 1 << 64:
        raise TraceError(lineno, "seq must be an unsigned 64-bit integer")
    op = d.get("op")
    if op == "label":
        return TraceRecord(seq, False, 0, 0, 0, str(d.get("text", "")))
    if op != "r" and op != "w":
        raise TraceError(lineno, f"op must be \"r\" or \"w\", got {op!r}")
    addr = _hex(d.get("addr"), "addr", lineno)
    if addr > 0xFFFFFFFF:
        raise TraceError(lineno, "addr exceeds 32 bits")
    width = d.get("width")
    if type(width) is not int or width not in VALID_WIDTHS:
        raise TraceError(lineno, f"width must be one of {VALID_WIDTHS}, got {width!r}")
    if op == "w":
        if "value" not in d:
            raise TraceError(lineno, "write record without value")
        value = _hex(d["value"], "value", lineno)
        if value >= 1 << (8 * width):
            raise TraceError(lineno, f"value {d['value']} wider than {width} byte(s)")
        return TraceRecord(seq, True, addr, width, value)
    if "value" in d:
        raise TraceError(lineno, "read record must not carry a value")
    return TraceRecord(seq, False, addr, width, 0)


def read_trace(path) -> Iterator[TraceRecord]:
    """Yield validated records; raises :class:`TraceError` naming the bad line."""
    for t in iter_trace(path):
        yield TraceRecord(*t)


# The exact shape written by format_record.  Matching is anchored to whole
# lines so a chunk whose match count equals its line count is fully canonical.
_CANONICAL = re.compile(
    rb'^\{"seq": (\d{1,20}), "op": "([rw])", "addr": "0x([0-9a-fA-F]{1,8})", '
    rb'"width": ([124])(?:, "value": "0x([0-9a-fA-F]{1,8})")?\}\r?$', re.M)
_CHUNK = 1 << 22


def _fast_chunk(chunk: bytes, nlines: int, last: int) -> Optional[list]:
    found = _CANONICAL.findall(chunk)
    if len(found) != nlines:
        return None
    out = []
    append = out.append
    for s, op, a, w, v in found:
        seq = int(s)
        width = int(w)
        if seq <= last or seq >= 1 << 64:
            return None
        last = seq
        if op == b"w":
            if not v:
                return None
            value = int(v, 16)
            if value >> (8 * width):
                return None
            append((seq, True, int(a, 16), width, value, None))
        elif v:
            return None
        else:
            append((seq, False, int(a, 16), width, 0, None))
    return out


def _slow_chunk(chunk: bytes, first_line: int, last: int) -> list:
    out = []
    lines = chunk.split(b"\n")
    if not lines[-1]:
        lines.pop()
    for lineno, raw in enumerate(lines, first_line):
        if not raw.strip():
            continue
        rec = parse_record(raw, lineno)
        if rec.seq <= last:
            raise TraceError(lineno, f"seq {rec.seq} does not increase past {last}")
        last = rec.seq
        out.append(tuple(rec))
    return out


def iter_trace(path) -> Iterator[tuple]:
    """Like :func:`read_trace` but yields plain tuples, for bulk replay."""
    last = -1
    lineno = 1
    with open(path, "rb") as fh:
        while True:
            chunk = fh.read(_CHUNK)
            if not chunk:
                break
            if not chunk.endswith(b"\n"):
                chunk += fh.readline()
            nlines = chunk.count(b"\n") + (not chunk.endswith(b"\n"))
            recs = _fast_chunk(chunk, nlines, last)
            if recs is None:
                recs = _slow_chunk(chunk, lineno, last)
            lineno += nlines
            if recs:
                last = recs[-1][0]
            yield from recs


def format_record(seq: int, op: str, addr: int = 0, width: int = 0,
                  value: Optional[int] = None, text: Optional[str] = None) -> str:
    if op == "label":
        return json.dumps({"seq": seq, "op": "label", "text": text})
    if op == "w":
        return (f'{{"seq": {seq}, "op": "w", "addr": "0x{addr:08x}", '
                f'"width": {width}, "value": "0x{value:x}"}}')
    return f'{{"seq": {seq}, "op": "r", "addr": "0x{addr:08x}", "width": {width}}}'


class TraceWriter:
    def __init__(self, path):
        self._fh = open(path, "w", encoding="utf-8")
        self.count = 0

    def write(self, seq: int, op: str, addr: int = 0, width: int = 0,
              value: Optional[int] = None, text: Optional[str] = None) -> None:
        self._fh.write(format_record(seq, op, addr, width, value, text) + "\n")
        self.count += 1

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "TraceWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
