"""Detection of DMA stream configurations from MMIO writes.

Firmware configures a DMA stream by storing a source and a destination
pointer into two consecutive controller registers.  The detector keeps a
shadow of every MMIO word written so far and reports a configuration when a
run of adjacent, word-aligned, 32-bit, pointer-like writes is completed.
Circular-mode streams show up as runs of three or more pointers.

A run is *completed* once every word in it has been written since the last
configuration that covered it; a run that grows past a previously reported
run is reported immediately as an extension.  Rewriting only the source
register of an existing stream therefore waits for the destination write
instead of reporting a half-updated pair.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .events import ContractError, MemoryAccessEvent
from .memory_map import AddressClass, MemoryMapProfile

_MMIO = AddressClass.MMIO
_RAM = AddressClass.RAM
_OTHER = AddressClass.OTHER


class Pointer(NamedTuple):
    register: int
    value: int
    cls: AddressClass


@dataclass(frozen=True)
class StreamConfiguration:
    stream_key: int
    pointers: tuple[Pointer, ...]
    detected_at: int

    @property
    def registers(self) -> tuple[int, ...]:
        return tuple(p.register for p in self.pointers)

    @property
    def is_circular(self) -> bool:
        return len(self.pointers) >= 3

    def to_dict(self) -> dict:
        return {
            "stream_key": f"0x{self.stream_key:08x}",
            "pointers": [
                {"register": f"0x{p.register:08x}", "value": f"0x{p.value:08x}",
                 "class": p.cls.value}
                for p in self.pointers
            ],
            "detected_at": self.detected_at,
        }


class ShadowEntry:
    __slots__ = ("value", "seq", "width", "cls", "armed", "emitted")

    def __init__(self, value: int, seq: int, width: int, cls: Optional[AddressClass]):
        self.value = value
        self.seq = seq
        self.width = width
        # None unless the write was an aligned 32-bit pointer-like value.
        self.cls = cls
        self.armed = True
        self.emitted: Optional[tuple[int, int]] = None

    @property
    def is_pointer(self) -> bool:
        return self.cls is not None


class StreamDetector:
    def __init__(self, profile: MemoryMapProfile):
        self.profile = profile
        self.shadow: dict[int, ShadowEntry] = {}
        self.branches: Counter[str] = Counter()

    def reset(self) -> None:
        self.shadow.clear()

    def _run_bounds(self, addr: int) -> tuple[int, int]:
        shadow = self.shadow
        lo = addr
        while True:
            e = shadow.get(lo - 4)
            if e is None or e.cls is None:
                break
            lo -= 4
        hi = addr
        while True:
            e = shadow.get(hi + 4)
            if e is None or e.cls is None:
                break
            hi += 4
        return lo, hi

    def _break_run(self, word: int) -> None:
        # Survivors of a broken group may be completed again by a later write.
        for step in (-4, 4):
            a = word + step
            while True:
                e = self.shadow.get(a)
                if e is None or e.cls is None:
                    break
                e.armed = True
                a += step

    def observe_mmio_write(self, event: MemoryAccessEvent) -> Optional[StreamConfiguration]:
        if not event.is_write:
            raise ContractError("observe_mmio_write needs a write event")
        if self.profile.classify(event.addr) is not _MMIO:
            raise ContractError(f"address 0x{event.addr:08x} is not MMIO")
        return self._observe(event.seq, event.addr, event.width, event.value)

    def _observe(self, seq: int, addr: int, width: int, value: int) -> Optional[StreamConfiguration]:
        shadow = self.shadow
        branches = self.branches
        cls = None
        if width != 4:
            branches["reject_narrow"] += 1
        elif addr & 3:
            branches["reject_unaligned"] += 1
        else:
            c = self.profile.classify(value)
            if c is _OTHER:
                branches["reject_not_pointer"] += 1
            else:
                cls = c

        if cls is None:
            first = addr & ~3
            last = (addr + width - 1) & ~3
            for word in range(first, last + 4, 4):
                old = shadow.get(word)
                if old is not None and old.cls is not None:
                    branches["overwrite_breaks_run"] += 1
                    shadow[word] = ShadowEntry(value, seq, width, None)
                    self._break_run(word)
                else:
                    shadow[word] = ShadowEntry(value, seq, width, None)
            return None

        entry = ShadowEntry(value, seq, width, cls)
        shadow[addr] = entry
        lo, hi = self._run_bounds(addr)
        if lo == hi:
            branches["no_neighbor"] += 1
            return None

        words = [shadow[a] for a in range(lo, hi + 4, 4)]
        if not any(w.cls is _RAM for w in words):
            branches["suppressed_no_ram"] += 1
            return None

        complete = True
        extension = False
        for w in words:
            if w is entry:
                continue
            if not w.armed:
                complete = False
            em = w.emitted
            if em is not None and lo <= em[0] and em[1] <= hi and em != (lo, hi):
                extension = True
        if not (complete or extension):
            branches["held_partial_rewrite"] += 1
            return None

        for w in words:
            w.armed = False
            w.emitted = (lo, hi)
        if extension and not complete:
            branches["emit_extension"] += 1
        elif hi - lo >= 8:
            branches["emit_circular"] += 1
        else:
            branches["emit_pair"] += 1
        pointers = tuple(
            Pointer(lo + 4 * i, w.value, w.cls) for i, w in enumerate(words)
        )
        return StreamConfiguration(lo, pointers, seq)

