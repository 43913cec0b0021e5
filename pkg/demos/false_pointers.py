"""Writes that look like pointers but never form a configuration.

On PIC32 the value 255 is a valid RAM address, so a timer period of 255
classifies as a RAM pointer.  Without a pointer neighbour it is ignored.
Unaligned and narrow stores are ignored too, and so is a group whose only
memory pointer is in Flash.  The detector's branch counters show which
filter dropped each write.

    python demos/false_pointers.py
"""

from __future__ import annotations

from dmaemu import BUILTIN_PROFILES, DmaEngine, classify

PIC = BUILTIN_PROFILES["pic32"]
STM = BUILTIN_PROFILES["stm32f103"]


def run(profile, writes, reads=()):
    engine = DmaEngine(profile)
    seq = 0
    for addr, width, value in writes:
        seq += 1
        engine.process(seq, True, addr, width, value)
    for addr, width in reads:
        seq += 1
        engine.process(seq, False, addr, width)
    engine.finish()
    return engine


def main() -> None:
    print(f"pic32: 0x000000ff classifies as {classify(PIC, 0xFF).value}")
    tmr1 = run(PIC, [(0xBF800620, 4, 0xFF)], reads=[(0xFF, 1)])
    print(f"TMR1 period write: {len(tmr1.configs)} configurations")

    cases = {
        "unaligned": [(0x40020008, 4, 0x40013804), (0x4002000A, 4, 0x20000100)],
        "narrow": [(0x40020008, 4, 0x40013804), (0x4002000C, 2, 0x0100),
                   (0x4002000E, 2, 0x2000)],
        "flash only": [(0x40020008, 4, 0x40013804), (0x4002000C, 4, 0x08000400)],
        "valid pair": [(0x40020008, 4, 0x40013804), (0x4002000C, 4, 0x20000100)],
    }
    for name, writes in cases.items():
        eng = run(STM, writes)
        hits = {k.split(".", 1)[1]: v for k, v in eng.branches.items()
                if k.startswith("detector.")}
        print(f"{name:<11} {len(eng.configs)} configuration(s)  {hits}")


if __name__ == "__main__":
    main()
