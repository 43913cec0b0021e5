"""Lifecycle tracking for DMA channels.

Each detected stream configuration opens a *candidate* channel.  The first
firmware access near one of its RAM pointers decides the direction: a read
makes it an input channel whose buffer is sized incrementally and fed from
the input provider; a write makes it an output channel that is recorded but
never fed.  A channel ends when its stream is reconfigured, when firmware
writes into its buffer, or when the session ends.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Optional

from .events import ContractError, MemoryAccessEvent
from .input_source import InputProvider, ShadowRam, ZeroProvider, read_through
from .memory_map import AddressClass, MemoryMapProfile
from .stream_detector import Pointer, StreamConfiguration

_RAM = AddressClass.RAM
_MMIO = AddressClass.MMIO

PAGE_SHIFT = 4


class Direction(enum.Enum):
    UNDETERMINED = "undetermined"
    INPUT = "input"
    OUTPUT = "output"


class ChannelState(enum.Enum):
    CANDIDATE = "candidate"
    ACTIVE = "active"
    TERMINATED = "terminated"


class TerminationReason(enum.Enum):
    RECONFIGURED = "reconfigured"
    FIRMWARE_WRITE = "firmware_write"
    SESSION_END = "session_end"


class BufferTracker:
    """Incremental lower bound on one DMA buffer's length.

    Every read that starts inside the window of ``2 * width`` bytes just past
    the known end extends the buffer to cover that read.
    """

    __slots__ = ("base", "perceived_size", "limit")

    def __init__(self, base: int, perceived_size: int = 0, limit: Optional[int] = None):
        self.base = base
        self.perceived_size = perceived_size
        # Start of a sibling buffer above this one; growth never crosses it.
        self.limit = limit

    def span(self, width: int) -> tuple[int, int]:
        """Half-open ``(start, end)`` of the growth window for a read of ``width``."""
        start = self.base + self.perceived_size
        return start, start + 2 * width

    def observe_read(self, addr: int, width: int) -> bool:
        start = self.base + self.perceived_size
        if start <= addr < start + 2 * width and (self.limit is None or addr < self.limit):
            self.perceived_size = addr - self.base + width
            return True
        return False

    def covers(self, addr: int) -> bool:
        return self.base <= addr < self.base + self.perceived_size

    def __repr__(self) -> str:
        return f"BufferTracker(base=0x{self.base:08x}, perceived_size={self.perceived_size})"


@dataclass(frozen=True)
class InjectionAction:
    addr: int
    data: bytes
    channel: int
    offset: int

    @property
    def width(self) -> int:
        return len(self.data)


@dataclass(frozen=True)
class LifecycleEvent:
    kind: str  # "created" | "activated" | "terminated"
    stream_key: int
    seq: int
    detail: Optional[str] = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "stream_key": f"0x{self.stream_key:08x}", "seq": self.seq}
        if self.detail is not None:
            d["detail"] = self.detail
        return d


@dataclass(frozen=True)
class BufferView:
    base: int
    perceived_size: int


@dataclass(frozen=True)
class DmaChannel:
    """Immutable view of one channel, as returned by :meth:`ChannelTracker.snapshot`."""

    stream_key: int
    pointers: tuple[Pointer, ...]
    source_ptr: Optional[Pointer]
    dest_ptrs: tuple[int, ...]
    direction: Direction
    state: ChannelState
    created_at: int
    terminated_at: Optional[int]
    termination: Optional[TerminationReason]
    activated_at: Optional[int]
    buffers: tuple[BufferView, ...]
    injections: int
    bytes_injected: int

    @property
    def perceived_size(self) -> int:
        return sum(b.perceived_size for b in self.buffers)

    @property
    def unused(self) -> bool:
        return self.direction is Direction.UNDETERMINED


class _Channel:
    __slots__ = ("serial", "stream_key", "pointers", "candidates", "written",
                 "has_mmio", "source", "dests", "direction", "state",
                 "created_at", "terminated_at", "termination", "activated_at",
                 "buffers", "injections", "bytes_injected", "pages", "hooked_to")

    def __init__(self, serial: int, cfg: StreamConfiguration):
        self.serial = serial
        self.stream_key = cfg.stream_key
        self.pointers = cfg.pointers
        # RAM pointers still eligible as destinations.
        self.candidates = [p for p in cfg.pointers if p.cls is _RAM]
        self.written: list[Pointer] = []
        self.has_mmio = any(p.cls is _MMIO for p in cfg.pointers)
        self.source: Optional[Pointer] = None
        self.dests: list[Pointer] = []
        self.direction = Direction.UNDETERMINED
        self.state = ChannelState.CANDIDATE
        self.created_at = cfg.detected_at
        self.terminated_at: Optional[int] = None
        self.termination: Optional[TerminationReason] = None
        self.activated_at: Optional[int] = None
        self.buffers: list[BufferTracker] = []
        self.injections = 0
        self.bytes_injected = 0
        self.pages: set[int] = set()
        # Per buffer: end address up to which pages are hooked.
        self.hooked_to: list[int] = []

    def view(self) -> DmaChannel:
        return DmaChannel(
            stream_key=self.stream_key,
            pointers=self.pointers,
            source_ptr=self.source,
            dest_ptrs=tuple(p.value for p in self.dests),
            direction=self.direction,
            state=self.state,
            created_at=self.created_at,
            terminated_at=self.terminated_at,
            termination=self.termination,
            activated_at=self.activated_at,
            buffers=tuple(BufferView(b.base, b.perceived_size) for b in self.buffers),
            injections=self.injections,
            bytes_injected=self.bytes_injected,
        )


class ChannelTracker:
    def __init__(self, profile: MemoryMapProfile, provider: Optional[InputProvider] = None,
                 shadow: Optional[ShadowRam] = None,
                 audit: Optional[Callable[[dict], None]] = None):
        self.profile = profile
        self.provider = provider if provider is not None else ZeroProvider()
        self.shadow = shadow if shadow is not None else ShadowRam()
        self.audit = audit
        self.channels: list[_Channel] = []
        self.live: list[_Channel] = []
        self.by_key: dict[int, _Channel] = {}
        # Access hooks: page number -> live channels that may react there.
        self.pages: dict[int, list[_Channel]] = {}
        self.log: list[LifecycleEvent] = []
        self.branches: Counter[str] = Counter()

    def _emit(self, ev: LifecycleEvent) -> LifecycleEvent:
        self.log.append(ev)
        if self.audit is not None:
            self.audit(ev.to_dict())
        return ev

    def _terminate(self, ch: _Channel, reason: TerminationReason, seq: int) -> LifecycleEvent:
        ch.state = ChannelState.TERMINATED
        ch.termination = reason
        ch.terminated_at = seq
        self.live.remove(ch)
        self._unhook(ch)
        if self.by_key.get(ch.stream_key) is ch:
            del self.by_key[ch.stream_key]
        self.branches["terminate_" + reason.value] += 1
        return self._emit(LifecycleEvent("terminated", ch.stream_key, seq, reason.value))

    def _hook(self, ch: _Channel, lo: int, hi: int) -> None:
        """Route accesses starting in ``[lo, hi)`` to ``ch``."""
        pages = self.pages
        for page in range(lo >> PAGE_SHIFT, ((hi - 1) >> PAGE_SHIFT) + 1):
            if page not in ch.pages:
                ch.pages.add(page)
                pages.setdefault(page, []).append(ch)

    def _unhook(self, ch: _Channel) -> None:
        pages = self.pages
        for page in ch.pages:
            lst = pages[page]
            lst.remove(ch)
            if not lst:
                del pages[page]
        ch.pages.clear()

    def _hook_buffer(self, ch: _Channel, i: int) -> None:
        buf = ch.buffers[i]
        # Largest growth window is 2 * 4 bytes past the known end.
        end = buf.base + buf.perceived_size + 8
        if end > ch.hooked_to[i]:
            self._hook(ch, ch.hooked_to[i], end)
            ch.hooked_to[i] = end

    def _channels_at(self, *addrs: int) -> list[_Channel]:
        found: list[_Channel] = []
        for a in addrs:
            for ch in self.pages.get(a >> PAGE_SHIFT, ()):
                if ch not in found:
                    found.append(ch)
        if len(found) > 1:
            found.sort(key=lambda c: c.serial)
        return found

    def on_stream_config(self, cfg: StreamConfiguration) -> list[LifecycleEvent]:
        out = []
        old = self.by_key.get(cfg.stream_key)
        if old is not None:
            out.append(self._terminate(old, TerminationReason.RECONFIGURED, cfg.detected_at))
        ch = _Channel(len(self.channels), cfg)
        self.channels.append(ch)
        self.live.append(ch)
        self.by_key[cfg.stream_key] = ch
        for p in ch.candidates:
            self._hook(ch, p.value, p.value + 8)
        self.branches["created"] += 1
        out.append(self._emit(LifecycleEvent("created", cfg.stream_key, cfg.detected_at)))
        return out

    def _activate_input(self, ch: _Channel, hit: Pointer, seq: int) -> None:
        non_ram = [p for p in ch.pointers if p.cls is not _RAM]
        if non_ram:
            ch.source = non_ram[0]
            ch.dests = list(ch.candidates)
        elif ch.written:
            ch.source = ch.written[0]
            ch.dests = list(ch.candidates)
        else:
            # All pointers in RAM: the one read first is a destination and the
            # lowest-register other pointer is taken as the source.
            ch.source = next(p for p in ch.pointers if p is not hit)
            ch.dests = [p for p in ch.pointers if p is not ch.source]
        bases = sorted({p.value for p in ch.dests})
        ch.buffers = []
        for p in ch.dests:
            above = [b for b in bases if b > p.value]
            ch.buffers.append(BufferTracker(p.value, limit=above[0] if above else None))
        ch.hooked_to = [b.base for b in ch.buffers]
        for i in range(len(ch.buffers)):
            self._hook_buffer(ch, i)
        ch.direction = Direction.INPUT
        ch.state = ChannelState.ACTIVE
        ch.activated_at = seq
        self.branches["activate_input"] += 1
        self._emit(LifecycleEvent("activated", ch.stream_key, seq, "input"))

    def _activate_output(self, ch: _Channel, seq: int) -> None:
        ch.direction = Direction.OUTPUT
        ch.state = ChannelState.ACTIVE
        ch.activated_at = seq
        ch.dests = [p for p in ch.pointers if p.cls is _MMIO] or list(ch.written)
        src = [p for p in ch.written if p not in ch.dests]
        ch.source = src[0] if src else None
        self.branches["activate_output"] += 1
        self._emit(LifecycleEvent("activated", ch.stream_key, seq, "output"))

    def on_ram_access(self, event: MemoryAccessEvent) -> Optional[InjectionAction]:
        if self.profile.classify(event.addr) is not _RAM:
            raise ContractError(f"address 0x{event.addr:08x} is not RAM")
        if event.is_write:
            self.on_ram_write(event.seq, event.addr, event.width, event.value)
            return None
        return self.on_ram_read(event.seq, event.addr, event.width)

    def on_ram_read(self, seq: int, addr: int, width: int) -> Optional[InjectionAction]:
        hooked = self.pages.get(addr >> PAGE_SHIFT)
        if not hooked:
            return None
        action = None
        for ch in self._channels_at(addr):
            if ch.state is ChannelState.CANDIDATE:
                for p in ch.candidates:
                    if p.value <= addr < p.value + 2 * width:
                        self._activate_input(ch, p, seq)
                        break
                else:
                    continue
            if ch.direction is not Direction.INPUT:
                continue
            for i, buf in enumerate(ch.buffers):
                if buf.observe_read(addr, width):
                    self._hook_buffer(ch, i)
                    self.branches["span_grow"] += 1
                    if self.audit is not None:
                        self.audit({"kind": "grow", "stream_key": f"0x{ch.stream_key:08x}",
                                    "seq": seq, "base": f"0x{buf.base:08x}",
                                    "perceived_size": buf.perceived_size})
                if buf.covers(addr):
                    if action is None:
                        data = read_through(self.shadow, self.provider, addr, width,
                                            ch.stream_key, base=buf.base, owner=ch.serial)
                        ch.injections += 1
                        ch.bytes_injected += width
                        self.branches["inject"] += 1
                        action = InjectionAction(addr, data, ch.stream_key, addr - buf.base)
                        if self.audit is not None:
                            self.audit({"kind": "inject", "stream_key": f"0x{ch.stream_key:08x}",
                                        "seq": seq, "addr": f"0x{addr:08x}",
                                        "offset": addr - buf.base, "data": data.hex()})
                    break
            else:
                self.branches["span_miss"] += 1
        return action

    def on_ram_write(self, seq: int, addr: int, width: int, value: int) -> None:
        self.shadow.write(addr, width, value)
        end = addr + width
        pages = self.pages
        if (addr >> PAGE_SHIFT) not in pages and ((end - 1) >> PAGE_SHIFT) not in pages:
            return
        for ch in self._channels_at(addr, end - 1):
            if ch.state is ChannelState.TERMINATED:
                continue
            if ch.state is ChannelState.CANDIDATE:
                hit = None
                for p in ch.candidates:
                    if p.value <= addr < p.value + 2 * width:
                        hit = p
                        break
                if hit is None:
                    continue
                ch.candidates.remove(hit)
                ch.written.append(hit)
                self.branches["candidate_written"] += 1
                if ch.has_mmio or not ch.candidates:
                    self._activate_output(ch, seq)
            elif ch.direction is Direction.INPUT:
                for buf in ch.buffers:
                    hi = buf.base + max(buf.perceived_size, 1)
                    if addr < hi and end > buf.base:
                        self._terminate(ch, TerminationReason.FIRMWARE_WRITE, seq)
                        break

    def end_session(self, seq: int) -> list[LifecycleEvent]:
        return [self._terminate(ch, TerminationReason.SESSION_END, seq)
                for ch in list(self.live)]

    def snapshot(self) -> list[DmaChannel]:
        return [ch.view() for ch in sorted(self.channels, key=lambda c: (c.created_at, c.serial))]
