"""Providers of DMA input bytes and the shadow RAM that pins them.

A provider is any object with ``next_byte(channel_key, offset) -> int``.
Bytes are pulled lazily, one address at a time, the first time firmware
reads them through a live channel.  The :class:`ShadowRam` remembers every
injected byte so repeated or overlapping reads see the same data.
"""

from __future__ import annotations

import enum
from typing import Hashable, Optional, Protocol


class InputExhausted(Exception):
    """The input stream ran dry and the provider was told to halt."""


class Exhaustion(enum.Enum):
    ZERO_PAD = "zeropad"
    HALT = "halt"


class InputProvider(Protocol):
    def next_byte(self, channel_key: int, offset: int) -> int: ...


class ZeroProvider:
    def next_byte(self, channel_key: int, offset: int) -> int:
        return 0

    def __repr__(self) -> str:
        return "ZeroProvider()"


class StreamProvider:
    """Serves a finite byte sequence in request order, across all channels."""

    def __init__(self, data: bytes, exhaustion: Exhaustion = Exhaustion.ZERO_PAD):
        self.data = bytes(data)
        self.exhaustion = Exhaustion(exhaustion)
        self.position = 0

    def next_byte(self, channel_key: int, offset: int) -> int:
        if self.position < len(self.data):
            b = self.data[self.position]
            self.position += 1
            return b
        if self.exhaustion is Exhaustion.HALT:
            raise InputExhausted(
                f"input stream exhausted after {len(self.data)} byte(s)"
            )
        self.position += 1
        return 0

    @property
    def consumed(self) -> int:
        return min(self.position, len(self.data))


def zero_provider() -> ZeroProvider:
    return ZeroProvider()


def stream_provider(data: bytes, exhaustion: Exhaustion | str = Exhaustion.ZERO_PAD) -> StreamProvider:
    return StreamProvider(data, Exhaustion(exhaustion))


class ShadowRam:
    """Sparse byte store keyed by address.

    Each byte remembers the channel lifetime (``owner``) that injected it.
    A new lifetime reading the same address pulls fresh input; firmware
    writes overwrite the byte and clear its owner.
    """

    __slots__ = ("data", "owner", "pulls")

    def __init__(self) -> None:
        self.data: dict[int, int] = {}
        self.owner: dict[int, Hashable] = {}
        self.pulls = 0

    def __len__(self) -> int:
        return len(self.data)

    def __contains__(self, addr: int) -> bool:
        return addr in self.data

    def peek(self, addr: int, width: int = 1) -> Optional[bytes]:
        """Bytes currently held at ``addr``, or None if any byte is unset."""
        data = self.data
        try:
            return bytes(data[a] for a in range(addr, addr + width))
        except KeyError:
            return None

    def write(self, addr: int, width: int, value: int) -> None:
        """Apply a firmware store to bytes the shadow already tracks.

        Values are little-endian, matching the Cortex-M and PIC32 targets.
        Untracked bytes are left to the host's own RAM.
        """
        data = self.data
        owner = self.owner
        for i in range(width):
            a = addr + i
            if a in data:
                data[a] = (value >> (8 * i)) & 0xFF
                owner.pop(a, None)

    def write_bytes(self, addr: int, payload: bytes) -> None:
        for i, b in enumerate(payload):
            self.data[addr + i] = b
            self.owner.pop(addr + i, None)


def read_through(shadow: ShadowRam, provider: InputProvider, addr: int, width: int,
                 channel_key: int, *, base: Optional[int] = None,
                 owner: Hashable = None) -> bytes:
    """Return ``width`` bytes at ``addr``, pulling unset bytes from ``provider``.

    ``base`` is the buffer start used to compute provider offsets (defaults to
    ``addr``); ``owner`` identifies the channel lifetime and defaults to
    ``channel_key``.
    """
    if width not in (1, 2, 4):
        raise ValueError(f"width {width} not in (1, 2, 4)")
    if base is None:
        base = addr
    if owner is None:
        owner = channel_key
    data = shadow.data
    owners = shadow.owner
    out = bytearray(width)
    for i in range(width):
        a = addr + i
        if owners.get(a, _UNSET) == owner:
            out[i] = data[a]
            continue
        b = provider.next_byte(channel_key, a - base) & 0xFF
        shadow.pulls += 1
        data[a] = b
        owners[a] = owner
        out[i] = b
    return bytes(out)


_UNSET = object()
