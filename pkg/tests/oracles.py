"""Brute-force reference models used as test oracles.

These are written for obviousness rather than speed and share no code with
the package beyond the memory-map classification of single values.
"""

from __future__ import annotations

from dmaemu import AddressClass, MemoryMapProfile


def perceived_size_oracle(base: int, reads: list[tuple[int, int]]) -> int:
    """Re-run the size-inference rule from scratch over ``reads``.

    The span is materialized as an explicit set of byte addresses.
    """
    perceived = 0
    for addr, width in reads:
        span = set(range(base + perceived, base + perceived + 2 * width))
        if addr in span:
            perceived = (addr - base) + width
    return perceived


def perceived_size_trace(base: int, reads: list[tuple[int, int]]) -> list[int]:
    """perceived size after every prefix, each one recomputed from nothing."""
    return [perceived_size_oracle(base, reads[:i + 1]) for i in range(len(reads))]


class ShadowScanner:
    """Naive MMIO shadow: every write is kept verbatim and rescanned in full."""

    def __init__(self, profile: MemoryMapProfile):
        self.profile = profile
        # word address -> (value, width, aligned)
        self.words: dict[int, tuple[int, int, bool]] = {}

    def write(self, addr: int, width: int, value: int) -> None:
        for b in range(addr, addr + width):
            self.words[b & ~3] = (value, width, addr % 4 == 0)

    def eligible(self, word: int) -> bool:
        if word not in self.words:
            return False
        value, width, aligned = self.words[word]
        return (width == 4 and aligned
                and self.profile.classify(value) is not AddressClass.OTHER)

    def runs(self) -> list[tuple[int, ...]]:
        """Every maximal run of two or more adjacent eligible words."""
        found = []
        for w in sorted(self.words):
            if not self.eligible(w) or self.eligible(w - 4):
                continue
            run = [w]
            while self.eligible(run[-1] + 4):
                run.append(run[-1] + 4)
            if len(run) >= 2:
                found.append(tuple(run))
        return found

    def local_run(self, word: int):
        """The run of two or more eligible words through ``word``, or None."""
        if not self.eligible(word):
            return None
        lo = hi = word
        while self.eligible(lo - 4):
            lo -= 4
        while self.eligible(hi + 4):
            hi += 4
        return tuple(range(lo, hi + 4, 4)) if hi > lo else None

    def valid_groups(self) -> list[tuple[tuple[int, int, AddressClass], ...]]:
        """Runs that contain at least one RAM pointer, as (register, value, class)."""
        out = []
        for run in self.runs():
            group = tuple((w, self.words[w][0], self.profile.classify(self.words[w][0]))
                          for w in run)
            if any(c is AddressClass.RAM for _, _, c in group):
                out.append(group)
        return out

    def group_containing(self, word: int):
        """The RAM-containing maximal run through ``word``, or None."""
        run = self.local_run(word)
        if run is None:
            return None
        group = tuple((w, self.words[w][0], self.profile.classify(self.words[w][0]))
                      for w in run)
        if not any(c is AddressClass.RAM for _, _, c in group):
            return None
        return group


class InjectionModel:
    """Byte map fed only by observed injections and firmware stores."""

    def __init__(self):
        self.bytes: dict[int, int] = {}

    def inject(self, addr: int, data: bytes) -> None:
        for i, b in enumerate(data):
            self.bytes[addr + i] = b

    def store(self, addr: int, width: int, value: int) -> None:
        for i in range(width):
            if addr + i in self.bytes:
                self.bytes[addr + i] = (value >> (8 * i)) & 0xFF
