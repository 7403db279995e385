"""Typed errors raised by the simulator.

Contract-level failures get their own classes so callers can distinguish
"your input violates a precondition" (ValueError family) from "a remote
provider misbehaved" (ProviderError family).
"""


class SemcomError(Exception):
    """Base class for all simulator errors."""


# --- physical layer ---------------------------------------------------------

class InvalidLength(SemcomError, ValueError):
    """Code length constraints cannot be satisfied."""


class LengthMismatch(SemcomError, ValueError):
    """Bit/LLR block length does not match the code in use."""


class LengthNotMultipleOf4(SemcomError, ValueError):
    """16QAM input bit count must be divisible by 4."""


class NonPositiveVariance(SemcomError, ValueError):
    """Soft demapping requires a strictly positive noise variance."""


class TooFewPilots(SemcomError, ValueError):
    """Noise estimation needs at least 16 pilot symbols."""


# --- prompt codec ------------------------------------------------------------

class PromptError(SemcomError, ValueError):
    """Prompt violates a codec invariant."""


class PromptTooLarge(PromptError):
    """Serialized prompt exceeds the configured frame budget."""


class PromptDecodeError(SemcomError, ValueError):
    """Received bits do not parse as a prompt."""


class MalformedHeader(PromptDecodeError):
    """Header fields are inconsistent or the bit count is wrong."""


class MalformedPayload(PromptDecodeError):
    """Payload fields violate prompt invariants despite a passing CRC."""


class CrcMismatch(PromptDecodeError):
    """Checksum failure: residual channel errors survived decoding."""


# --- providers / gateway -----------------------------------------------------

class ProviderError(SemcomError):
    """Base class for provider-side failures."""


class ProviderUnavailable(ProviderError):
    """Provider not bound, unreachable, or timed out."""


class ProtocolError(ProviderError):
    """Provider sent a frame that does not conform to gateway protocol v1."""


class UnsupportedModality(ProviderError, ValueError):
    """Provider cannot handle the requested input modality."""


class PromptSchemeMismatch(SemcomError, ValueError):
    """Prompt variant does not carry what the scheme needs."""


class GrammarError(SemcomError, ValueError):
    """Caption does not parse under the stub grammar."""


class EmptyInput(SemcomError, ValueError):
    """Operation requires nonempty input."""


# --- evaluation ---------------------------------------------------------------

class ZeroVector(SemcomError, ValueError):
    """Cosine similarity is undefined for a zero vector."""


class DimensionMismatch(SemcomError, ValueError):
    """Vectors must share a dimension."""


class NoObjects(SemcomError, ValueError):
    """Object-level metric needs at least one box."""


# --- baseline codec ------------------------------------------------------------

class BadDims(SemcomError, ValueError):
    """Baseline codec requires dimensions that are multiples of 8."""


class ConfigError(SemcomError, ValueError):
    """Experiment configuration is invalid."""
