"""The event-ingestion engine: classify, detect, track, inject."""

from __future__ import annotations

import json
from typing import Callable, Iterable, Optional

from .channel_tracker import PAGE_SHIFT, ChannelTracker, DmaChannel, Direction, InjectionAction
from .events import ContractError, MemoryAccessEvent
from .input_source import InputProvider, ShadowRam
from .memory_map import AddressClass, MemoryMapProfile
from .stream_detector import StreamConfiguration, StreamDetector

try:
    import orjson
except ImportError:  # pragma: no cover
    orjson = None

_MMIO = AddressClass.MMIO
_RAM = AddressClass.RAM


class DmaEngine:
    """One analysis session over a firmware's memory-access stream.

    Feed events in ``seq`` order with :meth:`feed` (or the allocation-free
    :meth:`process`), then call :meth:`finish`.  Any returned
    :class:`InjectionAction` tells the host which bytes to place in RAM before
    completing the load.
    """

    def __init__(self, profile: MemoryMapProfile, provider: Optional[InputProvider] = None,
                 audit: Optional[Callable[[dict], None]] = None):
        self.profile = profile
        self.shadow = ShadowRam()
        self.detector = StreamDetector(profile)
        self.tracker = ChannelTracker(profile, provider, self.shadow, audit)
        self.audit = audit
        self.configs: list[StreamConfiguration] = []
        self.last_seq = 0
        self.finished = False
        self._classify = profile.classify
        self._page_cls: Optional[dict[int, AddressClass]] = {} if profile.page_aligned else None

    @property
    def provider(self) -> InputProvider:
        return self.tracker.provider

    def process(self, seq: int, is_write: bool, addr: int, width: int,
                value: int = 0) -> Optional[InjectionAction]:
        if seq <= self.last_seq:
            raise ContractError(f"seq {seq} does not increase past {self.last_seq}")
        if self.finished:
            raise ContractError("session already finished")
        self.last_seq = seq
        cache = self._page_cls
        if cache is not None:
            cls = cache.get(addr >> 12)
            if cls is None:
                cls = cache[addr >> 12] = self._classify(addr)
        else:
            cls = self._classify(addr)
        if cls is _RAM:
            if is_write:
                self.tracker.on_ram_write(seq, addr, width, value)
                return None
            return self.tracker.on_ram_read(seq, addr, width)
        if cls is _MMIO and is_write:
            cfg = self.detector._observe(seq, addr, width, value)
            if cfg is not None:
                self.configs.append(cfg)
                if self.audit is not None:
                    self.audit({"kind": "config", **cfg.to_dict()})
                self.tracker.on_stream_config(cfg)
        return None

    def process_many(self, records: Iterable[tuple]) -> int:
        """Bulk form of :meth:`process` for trace replay.

        ``records`` yields ``(seq, is_write, addr, width, value, label)``;
        label records are skipped.  Injection actions are applied to the
        shadow RAM but not returned.  Returns the number of events processed.
        """
        if self.finished:
            raise ContractError("session already finished")
        tracker = self.tracker
        hooked_pages = tracker.pages
        on_read = tracker.on_ram_read
        on_write = tracker.on_ram_write
        shadow_write = self.shadow.write
        observe = self.detector._observe
        classify = self._classify
        cache = self._page_cls if self._page_cls is not None else {}
        page_ok = self._page_cls is not None
        last = self.last_seq
        n = 0
        try:
            for seq, is_write, addr, width, value, label in records:
                if label is not None:
                    continue
                if seq <= last:
                    raise ContractError(f"seq {seq} does not increase past {last}")
                last = seq
                n += 1
                if page_ok:
                    cls = cache.get(addr >> 12)
                    if cls is None:
                        cls = cache[addr >> 12] = classify(addr)
                else:
                    cls = classify(addr)
                if cls is _RAM:
                    if is_write:
                        if ((addr >> PAGE_SHIFT) in hooked_pages
                                or ((addr + width - 1) >> PAGE_SHIFT) in hooked_pages):
                            on_write(seq, addr, width, value)
                        else:
                            shadow_write(addr, width, value)
                    elif (addr >> PAGE_SHIFT) in hooked_pages:
                        on_read(seq, addr, width)
                elif cls is _MMIO and is_write:
                    cfg = observe(seq, addr, width, value)
                    if cfg is not None:
                        self.configs.append(cfg)
                        if self.audit is not None:
                            self.audit({"kind": "config", **cfg.to_dict()})
                        tracker.on_stream_config(cfg)
        finally:
            self.last_seq = last
        return n

    def feed(self, event: MemoryAccessEvent) -> Optional[InjectionAction]:
        return self.process(event.seq, event.is_write, event.addr, event.width, event.value)

    def run(self, events: Iterable[MemoryAccessEvent]) -> list[InjectionAction]:
        out = []
        for ev in events:
            act = self.feed(ev)
            if act is not None:
                out.append(act)
        return out

    def finish(self) -> None:
        if not self.finished:
            self.tracker.end_session(self.last_seq)
            self.finished = True

    def snapshot(self) -> list[DmaChannel]:
        return self.tracker.snapshot()

    @property
    def branches(self) -> dict[str, int]:
        merged = {f"detector.{k}": v for k, v in self.detector.branches.items()}
        merged.update({f"tracker.{k}": v for k, v in self.tracker.branches.items()})
        return merged

    def report(self) -> dict:
        return build_report(self.profile.name, self.snapshot(),
                            [e.to_dict() for e in self.tracker.log])


def _hex(v: Optional[int]) -> Optional[str]:
    return None if v is None else f"0x{v:08x}"


def channel_to_dict(ch: DmaChannel) -> dict:
    return {
        "stream_key": _hex(ch.stream_key),
        "pointers": [
            {"register": _hex(p.register), "value": _hex(p.value), "class": p.cls.value}
            for p in ch.pointers
        ],
        "source": None if ch.source_ptr is None else _hex(ch.source_ptr.value),
        "dests": [_hex(d) for d in ch.dest_ptrs],
        "dest_count": len(ch.dest_ptrs),
        "direction": ch.direction.value,
        "state": ch.state.value,
        "unused": ch.unused,
        "created_at": ch.created_at,
        "activated_at": ch.activated_at,
        "terminated_at": ch.terminated_at,
        "termination": None if ch.termination is None else ch.termination.value,
        "buffers": [{"base": _hex(b.base), "perceived_size": b.perceived_size}
                    for b in ch.buffers],
        "perceived_size": ch.perceived_size,
        "buffers_sized": sum(1 for b in ch.buffers if b.perceived_size > 0),
        "injections": ch.injections,
        "bytes_injected": ch.bytes_injected,
    }


def build_report(profile_name: str, channels: list[DmaChannel], lifecycle: list[dict]) -> dict:
    rows = [channel_to_dict(c) for c in channels]
    totals = {
        "configs_detected": len(rows),
        "input_channels": sum(1 for c in channels if c.direction is Direction.INPUT),
        "output_channels": sum(1 for c in channels if c.direction is Direction.OUTPUT),
        "unused_channels": sum(1 for c in channels if c.direction is Direction.UNDETERMINED),
        "buffers_sized": sum(r["buffers_sized"] for r in rows),
        "injections": sum(r["injections"] for r in rows),
        "bytes_injected": sum(r["bytes_injected"] for r in rows),
    }
    return {"profile": profile_name, "channels": rows, "totals": totals,
            "lifecycle": lifecycle}


def dumps_report(report: dict) -> str:
    """Deterministic JSON text: sorted keys, two-space indent."""
    if orjson is not None:
        return orjson.dumps(report, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS).decode() + "\n"
    return json.dumps(report, sort_keys=True, indent=2) + "\n"
