"""Memory-access events: the engine's only input."""

from __future__ import annotations

import enum
from dataclasses import dataclass

VALID_WIDTHS = (1, 2, 4)


class AccessKind(enum.Enum):
    READ = "r"
    WRITE = "w"


class ContractError(ValueError):
    """A caller violated an operation's precondition."""


@dataclass(frozen=True, slots=True)
class MemoryAccessEvent:
    seq: int
    kind: AccessKind
    addr: int
    width: int
    value: int = 0

    def __post_init__(self) -> None:
        if self.width not in VALID_WIDTHS:
            raise ContractError(f"width {self.width} not in {VALID_WIDTHS}")
        if not 0 <= self.addr <= 0xFFFFFFFF:
            raise ContractError(f"address {self.addr:#x} outside 32-bit space")
        if self.kind is AccessKind.WRITE and not 0 <= self.value < (1 << (8 * self.width)):
            raise ContractError(
                f"value {self.value:#x} does not fit in {self.width} byte(s)"
            )

    @property
    def is_write(self) -> bool:
        return self.kind is AccessKind.WRITE

    @classmethod
    def read(cls, seq: int, addr: int, width: int) -> "MemoryAccessEvent":
        return cls(seq, AccessKind.READ, addr, width)

    @classmethod
    def write(cls, seq: int, addr: int, width: int, value: int) -> "MemoryAccessEvent":
        return cls(seq, AccessKind.WRITE, addr, width, value)
