"""Circular double-buffered ADC sampling and a later reconfiguration.

The ADC stream carries one peripheral pointer and two memory pointers.
Each memory pointer gets its own buffer whose growth stops at the other's
base.  Reprogramming the stream closes the old channel and opens a new one;
firmware storing into a live buffer ends that channel but keeps the data.

    python demos/circular_adc.py
"""

from __future__ import annotations

from dmaemu import BUILTIN_PROFILES, DmaEngine, StreamProvider

ADC1_DR = 0x4001244C
STREAM = 0x40020070
BUF_A, BUF_B = 0x20000200, 0x20000208


def show(engine, title):
    print(title)
    for ch in engine.snapshot():
        sizes = ", ".join(f"0x{b.base:08x}+{b.perceived_size}" for b in ch.buffers) or "-"
        end = ch.termination.value if ch.termination else "live"
        print(f"  key 0x{ch.stream_key:08x} {ch.direction.value:<12} buffers [{sizes}] {end}")


def main() -> None:
    engine = DmaEngine(BUILTIN_PROFILES["stm32f103"], StreamProvider(bytes(range(1, 64))))
    seq = iter(range(1, 1000))
    # Second memory pointer first, so the three-pointer group completes at once.
    for addr, value in ((STREAM + 8, BUF_B), (STREAM, ADC1_DR), (STREAM + 4, BUF_A)):
        engine.process(next(seq), True, addr, 4, value)
    for buf in (BUF_A, BUF_B):
        for off in (0, 2, 4, 6):
            engine.process(next(seq), False, buf + off, 2)
    show(engine, "after one full cycle:")

    # Reprogram into a fresh buffer pair: the old channel is replaced.
    for addr, value in ((STREAM + 8, 0x20000308), (STREAM, ADC1_DR), (STREAM + 4, 0x20000300)):
        engine.process(next(seq), True, addr, 4, value)
    engine.process(next(seq), False, 0x20000300, 4)
    engine.process(next(seq), True, 0x20000302, 2, 0xBEEF)  # firmware store ends it
    print("injected bytes survive the store:",
          engine.shadow.peek(0x20000300, 4).hex(" "))
    engine.finish()
    show(engine, "final:")


if __name__ == "__main__":
    main()
