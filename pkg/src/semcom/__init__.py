"""Desk-scale simulator for prompt-based semantic communication.

Transmits compact semantic prompts over a rate-1/2 LDPC + 16QAM + AWGN
channel, reconstructs scenes at receivers with differing knowledge bases,
and scores semantic fidelity with feature-space alignment metrics.
"""

__version__ = "0.1.0"
