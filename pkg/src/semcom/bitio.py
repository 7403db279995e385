"""Bit-level packing helpers and the CRC used by the prompt wire format.

Bits are numpy uint8 arrays with values in {0, 1}, most significant bit
first within every multi-bit field and within every packed byte.
"""

from __future__ import annotations

import numpy as np

__all__ = ["BitWriter", "BitReader", "bits_to_bytes", "bytes_to_bits", "crc16_ccitt"]


def bits_to_bytes(bits: np.ndarray) -> bytes:
    """Pack a bit array MSB-first, zero-padding the final partial byte."""
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def _crc16_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if crc & 0x8000 else (crc << 1)
            crc &= 0xFFFF
        table.append(crc)
    return table


_CRC16_TABLE = _crc16_table()


def crc16_ccitt(data: bytes, init: int = 0xFFFF) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout."""
    crc = init
    for byte in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC16_TABLE[(crc >> 8) ^ byte]
    return crc


class BitWriter:
    """Accumulates fixed-width big-endian fields into a bit array."""

    def __init__(self) -> None:
        self._bits: list[int] = []

    def write(self, value: int, width: int) -> None:
        if value < 0 or value >= (1 << width):
            raise ValueError(f"value {value} does not fit in {width} bits")
        for shift in range(width - 1, -1, -1):
            self._bits.append((value >> shift) & 1)

    def write_bytes(self, data: bytes) -> None:
        for byte in data:
            self.write(byte, 8)

    def __len__(self) -> int:
        return len(self._bits)

    def to_array(self) -> np.ndarray:
        return np.array(self._bits, dtype=np.uint8)


class BitReader:
    """Reads fixed-width big-endian fields from a bit array."""

    def __init__(self, bits: np.ndarray) -> None:
        self._bits = np.asarray(bits, dtype=np.uint8)
        self.pos = 0

    def remaining(self) -> int:
        return len(self._bits) - self.pos

    def read(self, width: int) -> int:
        if width > self.remaining():
            raise EOFError("bit stream exhausted")
        value = 0
        for bit in self._bits[self.pos : self.pos + width]:
            value = (value << 1) | int(bit)
        self.pos += width
        return value

    def read_bytes(self, count: int) -> bytes:
        return bytes(self.read(8) for _ in range(count))
