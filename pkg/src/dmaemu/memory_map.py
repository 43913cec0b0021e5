"""MCU memory-map profiles and address classification.

A profile names one MMIO window plus any number of RAM and Flash windows.
Every 32-bit value falls into exactly one :class:`AddressClass`; anything
outside the declared windows is ``OTHER``.
"""

from __future__ import annotations

import bisect
import enum
import os
import re
import sys
from dataclasses import dataclass, field
from typing import Iterable

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised only on 3.10
    import tomli as tomllib

ADDR_MAX = 0xFFFFFFFF

_RANGE_RE = re.compile(r"^\s*(0x[0-9a-fA-F]+)\s*-\s*(0x[0-9a-fA-F]+)\s*$")


class AddressClass(enum.Enum):
    MMIO = "mmio"
    RAM = "ram"
    FLASH = "flash"
    OTHER = "other"


class ProfileError(ValueError):
    """Raised for malformed or inconsistent memory-map profiles."""


class ProfileOverlapError(ProfileError):
    def __init__(self, first: "AddressRange", second: "AddressRange",
                 first_kind: str, second_kind: str):
        self.first = first
        self.second = second
        super().__init__(
            f"{first_kind} range {first} overlaps {second_kind} range {second}"
        )


@dataclass(frozen=True, order=True)
class AddressRange:
    """Inclusive byte range ``[start, end]`` in the 32-bit address space."""

    start: int
    end: int

    def __post_init__(self) -> None:
        for v in (self.start, self.end):
            if not isinstance(v, int) or v < 0:
                raise ProfileError(f"invalid address {v!r}")
            if v > ADDR_MAX:
                raise ProfileError(
                    f"address 0x{v:x} exceeds 32 bits; only 32-bit targets are supported"
                )
        if self.start > self.end:
            raise ProfileError(f"range start 0x{self.start:x} > end 0x{self.end:x}")

    def __contains__(self, value: int) -> bool:
        return self.start <= value <= self.end

    def overlaps(self, other: "AddressRange") -> bool:
        return self.start <= other.end and other.start <= self.end

    def __str__(self) -> str:
        return f"0x{self.start:08x}-0x{self.end:08x}"

    @classmethod
    def parse(cls, text: str) -> "AddressRange":
        m = _RANGE_RE.match(text)
        if not m:
            raise ProfileError(f"bad range {text!r}; expected \"0x...-0x...\"")
        return cls(int(m.group(1), 16), int(m.group(2), 16))


@dataclass(frozen=True)
class MemoryMapProfile:
    name: str
    mmio: AddressRange
    ram: tuple[AddressRange, ...] = ()
    flash: tuple[AddressRange, ...] = ()
    _starts: tuple[int, ...] = field(init=False, repr=False, compare=False)
    _table: tuple[tuple[int, AddressClass], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "ram", tuple(self.ram))
        object.__setattr__(self, "flash", tuple(self.flash))
        labelled = [("mmio", self.mmio)]
        labelled += [("ram", r) for r in self.ram]
        labelled += [("flash", r) for r in self.flash]
        for i, (ka, a) in enumerate(labelled):
            for kb, b in labelled[i + 1:]:
                if a.overlaps(b):
                    raise ProfileOverlapError(a, b, ka, kb)
        kinds = {"mmio": AddressClass.MMIO, "ram": AddressClass.RAM,
                 "flash": AddressClass.FLASH}
        ordered = sorted(labelled, key=lambda kr: kr[1].start)
        object.__setattr__(self, "_starts", tuple(r.start for _, r in ordered))
        object.__setattr__(self, "_table",
                           tuple((r.end, kinds[k]) for k, r in ordered))

    def classify(self, value: int) -> AddressClass:
        i = bisect.bisect_right(self._starts, value) - 1
        if i >= 0:
            end, cls = self._table[i]
            if value <= end:
                return cls
        return AddressClass.OTHER

    def is_pointer_like(self, value: int) -> bool:
        return self.classify(value) is not AddressClass.OTHER

    @property
    def page_aligned(self) -> bool:
        """True if every range starts and ends on a 4KB page boundary."""
        return all(r.start & 0xFFF == 0 and r.end & 0xFFF == 0xFFF
                   for _, r in self.ranges())

    def ranges(self) -> list[tuple[AddressClass, AddressRange]]:
        out = [(AddressClass.MMIO, self.mmio)]
        out += [(AddressClass.RAM, r) for r in self.ram]
        out += [(AddressClass.FLASH, r) for r in self.flash]
        return out

    def to_toml(self) -> str:
        def arr(rs: Iterable[AddressRange]) -> str:
            return "[" + ", ".join(f'"{r}"' for r in rs) + "]"

        return (
            f'name = "{self.name}"\n'
            f'mmio = "{self.mmio}"\n'
            f"ram = {arr(self.ram)}\n"
            f"flash = {arr(self.flash)}\n"
        )


def classify(profile: MemoryMapProfile, value: int) -> AddressClass:
    return profile.classify(value)


def is_pointer_like(profile: MemoryMapProfile, value: int) -> bool:
    return profile.classify(value) is not AddressClass.OTHER


def _r(start: int, end: int) -> AddressRange:
    return AddressRange(start, end)


# PIC32MZ: RAM reachable through its physical address and the KSEG0/KSEG1
# aliases; SFRs are accessed through KSEG1.
BUILTIN_PROFILES: dict[str, MemoryMapProfile] = {
    "stm32f103": MemoryMapProfile(
        "stm32f103",
        mmio=_r(0x40000000, 0x5FFFFFFF),
        ram=(_r(0x20000000, 0x20004FFF),),
        flash=(_r(0x08000000, 0x0801FFFF),),
    ),
    "pic32": MemoryMapProfile(
        "pic32",
        mmio=_r(0xBF800000, 0xBF8FFFFF),
        ram=(_r(0x00000000, 0x0007FFFF), _r(0x80000000, 0x8007FFFF),
             _r(0xA0000000, 0xA007FFFF)),
        flash=(_r(0x1D000000, 0x1D1FFFFF), _r(0x9D000000, 0x9D1FFFFF),
               _r(0xBD000000, 0xBD1FFFFF)),
    ),
    # Architectural ARMv7-M regions, each 512MB. The SRAM bit-band alias
    # (0x22000000-0x23FFFFFF) is carved out and classifies as OTHER.
    "generic-armv7m-512mb": MemoryMapProfile(
        "generic-armv7m-512mb",
        mmio=_r(0x40000000, 0x5FFFFFFF),
        ram=(_r(0x20000000, 0x21FFFFFF), _r(0x24000000, 0x3FFFFFFF)),
        flash=(_r(0x00000000, 0x1FFFFFFF),),
    ),
    "gd32vf103-riscv": MemoryMapProfile(
        "gd32vf103-riscv",
        mmio=_r(0x40000000, 0x5003FFFF),
        ram=(_r(0x20000000, 0x20017FFF),),
        flash=(_r(0x08000000, 0x0801FFFF),),
    ),
}

DEFAULT_PROFILE = "generic-armv7m-512mb"


def _parse_ranges(doc: dict, key: str) -> tuple[AddressRange, ...]:
    raw = doc.get(key, [])
    if isinstance(raw, str):
        raw = [raw]
    if not isinstance(raw, list):
        raise ProfileError(f"field {key!r}: expected a list of range strings")
    out = []
    for i, item in enumerate(raw):
        if not isinstance(item, str):
            raise ProfileError(f"field {key!r}[{i}]: expected a string")
        try:
            out.append(AddressRange.parse(item))
        except ProfileError as e:
            raise ProfileError(f"field {key!r}[{i}]: {e}") from None
    return tuple(out)


def parse_profile(text: str) -> MemoryMapProfile:
    """Parse a profile document (TOML key/value text)."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        line = getattr(e, "lineno", None) or text.count("\n") + 1
        raise ProfileError(f"parse error at line {line}: {e}") from None
    unknown = set(doc) - {"name", "mmio", "ram", "flash"}
    if unknown:
        raise ProfileError(f"unknown field(s): {', '.join(sorted(unknown))}")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ProfileError("field 'name': required non-empty string")
    mmio_raw = doc.get("mmio")
    if not isinstance(mmio_raw, str):
        raise ProfileError("field 'mmio': required range string")
    try:
        mmio = AddressRange.parse(mmio_raw)
    except ProfileError as e:
        raise ProfileError(f"field 'mmio': {e}") from None
    return MemoryMapProfile(name, mmio, _parse_ranges(doc, "ram"),
                            _parse_ranges(doc, "flash"))


def load_profile(source: str) -> MemoryMapProfile:
    """Resolve ``source`` as a builtin profile name, else as profile text.

    File paths are handled by :func:`load_profile_file`.
    """
    if source in BUILTIN_PROFILES:
        return BUILTIN_PROFILES[source]
    if "=" not in source:
        raise ProfileError(f"unknown profile {source!r}")
    return parse_profile(source)


def load_profile_file(path) -> MemoryMapProfile:
    with open(path, encoding="utf-8") as fh:
        return parse_profile(fh.read())


def resolve_profile(name_or_path: str) -> MemoryMapProfile:
    if name_or_path in BUILTIN_PROFILES:
        return BUILTIN_PROFILES[name_or_path]
    if os.path.exists(name_or_path):
        return load_profile_file(name_or_path)
    raise ProfileError(f"unknown profile {name_or_path!r}")
