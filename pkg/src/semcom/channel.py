"""AWGN channel, fixed pilot sequence, noise estimation, LMMSE reference denoiser.

SNR is Es/N0 per complex symbol with Es = 1. Noiseless operation is the
explicit sentinel snr_db = math.inf; estimates are clamped to
[-20, +60] dB so downstream conditioning never sees infinities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TooFewPilots

__all__ = ["PILOT_COUNT", "SNR_CLAMP_DB", "ChannelConfig", "SymbolFrame",
           "lfsr_bits", "pilot_sequence", "make_frame", "awgn_apply",
           "estimate_snr", "lmmse_denoise", "lmmse_gain", "noise_variance_from_snr"]

PILOT_COUNT = 256
SNR_CLAMP_DB = (-20.0, 60.0)

_LFSR_POLY_TAPS = (0, 2, 3, 5)  # x^16 + x^14 + x^13 + x^11 + 1, Fibonacci form
_LFSR_SEED = 0xACE1


@dataclass(frozen=True)
class ChannelConfig:
    snr_db: float
    seed: int = 0


@dataclass
class SymbolFrame:
    """Pilots followed by data symbols; pilots are the fixed published sequence."""

    pilots: np.ndarray
    data: np.ndarray

    @property
    def symbol_count(self) -> int:
        return len(self.pilots) + len(self.data)


def lfsr_bits(count: int, seed: int = _LFSR_SEED) -> np.ndarray:
    """Bits from the 16-bit Fibonacci LFSR (taps 16, 14, 13, 11)."""
    state = seed
    out = np.empty(count, dtype=np.uint8)
    for i in range(count):
        bit = 0
        for tap in _LFSR_POLY_TAPS:
            bit ^= state >> tap
        bit &= 1
        out[i] = state & 1
        state = (state >> 1) | (bit << 15)
    return out


def _build_pilots() -> np.ndarray:
    signs = 1.0 - 2.0 * lfsr_bits(2 * PILOT_COUNT).astype(np.float64)
    return (signs[0::2] + 1j * signs[1::2]) / math.sqrt(2.0)


_PILOTS = _build_pilots()


def pilot_sequence() -> np.ndarray:
    """The fixed 256-symbol QPSK pilot sequence (copy; unit energy per symbol)."""
    return _PILOTS.copy()


def make_frame(data_symbols: np.ndarray) -> SymbolFrame:
    return SymbolFrame(pilots=pilot_sequence(), data=np.asarray(data_symbols, dtype=np.complex128))


def noise_variance_from_snr(snr_db: float) -> float:
    """N0 for Es = 1; zero in noiseless mode."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return 10.0 ** (-snr_db / 10.0)


def awgn_apply(frame: SymbolFrame, cfg: ChannelConfig) -> SymbolFrame:
    """Add circularly-symmetric complex Gaussian noise, N0 = 10^(-snr_db/10).

    Deterministic for a fixed cfg.seed; pilots consume the stream first.
    """
    if frame.symbol_count == 0:
        raise ValueError("frame is empty")
    n0 = noise_variance_from_snr(cfg.snr_db)
    if n0 == 0.0:
        return SymbolFrame(pilots=frame.pilots.copy(), data=frame.data.copy())
    rng = np.random.default_rng(cfg.seed)
    total = frame.symbol_count
    scale = math.sqrt(n0 / 2.0)
    noise = scale * (rng.standard_normal(total) + 1j * rng.standard_normal(total))
    np_pilots = frame.pilots + noise[: len(frame.pilots)]
    np_data = frame.data + noise[len(frame.pilots) :]
    return SymbolFrame(pilots=np_pilots, data=np_data)


def estimate_snr(received_pilots: np.ndarray, known_pilots: np.ndarray) -> float:
    """Pilot-residual SNR estimate in dB: 10*log10(1 / mean |y - p|^2), clamped."""
    received = np.asarray(received_pilots, dtype=np.complex128)
    known = np.asarray(known_pilots, dtype=np.complex128)
    if received.shape != known.shape:
        raise TooFewPilots("received and known pilot lengths differ")
    if received.size < 16:
        raise TooFewPilots(f"need >= 16 pilots, got {received.size}")
    n0_hat = float(np.mean(np.abs(received - known) ** 2))
    if n0_hat <= 0.0:
        return SNR_CLAMP_DB[1]
    est = 10.0 * math.log10(1.0 / n0_hat)
    return min(max(est, SNR_CLAMP_DB[0]), SNR_CLAMP_DB[1])


def lmmse_gain(snr_db: float) -> float:
    """Wiener gain Es / (Es + N0) for unit-energy symbols."""
    return 1.0 / (1.0 + noise_variance_from_snr(snr_db))


def lmmse_denoise(symbols: np.ndarray, snr_db: float) -> np.ndarray:
    """Reference symbol denoiser: scale every symbol by the LMMSE gain."""
    return np.asarray(symbols, dtype=np.complex128) * lmmse_gain(snr_db)
