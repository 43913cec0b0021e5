"""Walk through one UART receive channel, event by event.

Firmware programs a DMA stream with the UART data register as source and a
RAM buffer as destination, then drains the buffer one byte at a time.  The
engine spots the pointer pair, binds the channel on the first read, grows
the buffer a byte at a time and feeds each read from the input stream.

    python demos/uart_receive.py
"""

from __future__ import annotations

from dmaemu import BUILTIN_PROFILES, DmaEngine, MemoryAccessEvent, StreamProvider

STREAM = 0x40020060   # DMA1 channel 5 peripheral-address register
USART1_DR = 0x40013804
RX_BUF = 0x20000100


def main() -> None:
    engine = DmaEngine(BUILTIN_PROFILES["stm32f103"], StreamProvider(b"AT+GMR\r\n"))
    seq = 0

    def mmio(addr, value):
        nonlocal seq
        seq += 1
        engine.feed(MemoryAccessEvent.write(seq, addr, 4, value))

    mmio(STREAM - 4, 8)            # transfer count: not a pointer
    mmio(STREAM, USART1_DR)        # source
    mmio(STREAM + 4, RX_BUF)       # destination completes the pair
    (ch,) = engine.snapshot()
    print(f"configured stream 0x{ch.stream_key:08x}: {ch.state.value}, {ch.direction.value}")

    received = bytearray()
    for i in range(8):
        seq += 1
        act = engine.feed(MemoryAccessEvent.read(seq, RX_BUF + i, 1))
        size = engine.snapshot()[0].perceived_size
        received += act.data
        print(f"  read 0x{RX_BUF + i:08x} -> {act.data!r:8} perceived size {size}")

    # A read past the window just beyond the known end is plain memory.
    seq += 1
    stray = engine.feed(MemoryAccessEvent.read(seq, RX_BUF + 0x20, 1))
    print(f"read far past the buffer injected: {stray is not None}")

    engine.finish()
    ch = engine.snapshot()[0]
    print(f"firmware received {bytes(received)!r}; channel ended by {ch.termination.value}")


if __name__ == "__main__":
    main()
