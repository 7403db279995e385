"""Prompt data model and its bit-exact wire format (v1).

Layout, MSB-first, no padding bits emitted:

    variant      2 bits   0 = Caption, 1 = LabeledBoxes, 2 = Hybrid
    box_count    6 bits
    id_count     6 bits
    caption_len 10 bits   UTF-8 byte count
    boxes       47 bits each: class_id(7) x(10) y(10) w(10) h(10)
    caption      8 bits per byte
    identifiers 32 bits each
    crc         16 bits   CRC-16/CCITT-FALSE over all preceding bits,
                          packed into bytes (last byte zero-padded)

Coordinates are quantized as round(v * 1024) clamped to [0, 1023] and
dequantized as q / 1024, so grid-aligned inputs roundtrip exactly.
The serialized bit count is what prompt_bit_cost predicts arithmetically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .bitio import BitReader, BitWriter, bits_to_bytes, crc16_ccitt
from .errors import (CrcMismatch, MalformedHeader, MalformedPayload,
                     PromptError, PromptTooLarge)

__all__ = ["PromptVariant", "LabeledBox", "Prompt", "COORD_STEPS",
           "MAX_CAPTION_BYTES", "MAX_BOXES", "MAX_IDENTIFIERS",
           "DEFAULT_MAX_PROMPT_BITS", "quantize_coord", "dequantize_coord",
           "encode_prompt", "decode_prompt", "prompt_bit_cost",
           "prompt_to_json", "prompt_from_json"]

COORD_STEPS = 1024
MAX_CAPTION_BYTES = 1023   # 10-bit length prefix
MAX_BOXES = 63             # 6-bit count
MAX_IDENTIFIERS = 63       # 6-bit count
HEADER_BITS = 24
BOX_BITS = 47
ID_BITS = 32
CRC_BITS = 16
# default frame budget: k=512 info bits x 8 frames
DEFAULT_MAX_PROMPT_BITS = 4096

_QUANT_SLACK = 1.0 / COORD_STEPS


class PromptVariant(Enum):
    CAPTION = 0
    LABELED_BOXES = 1
    HYBRID = 2


def quantize_coord(v: float) -> int:
    return min(int(round(v * COORD_STEPS)), COORD_STEPS - 1)


def dequantize_coord(q: int) -> float:
    return q / COORD_STEPS


@dataclass(frozen=True)
class LabeledBox:
    """One detected object: 80-category class id plus a normalized box."""

    class_id: int
    x: float
    y: float
    w: float
    h: float

    def validate(self) -> None:
        if not 0 <= self.class_id <= 79:
            raise PromptError(f"class_id {self.class_id} outside [0, 79]")
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise PromptError(f"{name}={v} outside [0, 1]")
        if self.w <= 0 or self.h <= 0:
            raise PromptError("box width/height must be positive")
        if quantize_coord(self.w) < 1 or quantize_coord(self.h) < 1:
            raise PromptError("box too small to survive 10-bit quantization")
        if self.x + self.w > 1.0 + _QUANT_SLACK or self.y + self.h > 1.0 + _QUANT_SLACK:
            raise PromptError("box exceeds the unit square beyond quantization slack")

    def quantized(self) -> "LabeledBox":
        return LabeledBox(
            class_id=self.class_id,
            x=dequantize_coord(quantize_coord(self.x)),
            y=dequantize_coord(quantize_coord(self.y)),
            w=dequantize_coord(quantize_coord(self.w)),
            h=dequantize_coord(quantize_coord(self.h)),
        )


@dataclass(frozen=True)
class Prompt:
    """The transmitted semantic payload."""

    variant: PromptVariant
    caption: str = ""
    boxes: tuple[LabeledBox, ...] = ()
    identifiers: tuple[int, ...] = ()

    def validate(self) -> None:
        caption_bytes = self.caption.encode("utf-8")
        if len(caption_bytes) > MAX_CAPTION_BYTES:
            raise PromptError(f"caption is {len(caption_bytes)} bytes, max {MAX_CAPTION_BYTES}")
        if len(self.boxes) > MAX_BOXES:
            raise PromptError(f"{len(self.boxes)} boxes, max {MAX_BOXES}")
        if len(self.identifiers) > MAX_IDENTIFIERS:
            raise PromptError(f"{len(self.identifiers)} identifiers, max {MAX_IDENTIFIERS}")
        if self.variant is PromptVariant.CAPTION:
            if not caption_bytes:
                raise PromptError("Caption prompt needs a nonempty caption")
            if self.boxes:
                raise PromptError("Caption prompt must not carry boxes")
        elif self.variant is PromptVariant.LABELED_BOXES:
            if caption_bytes:
                raise PromptError("LabeledBoxes prompt must not carry a caption")
        else:
            if not caption_bytes or not self.boxes:
                raise PromptError("Hybrid prompt needs both caption and boxes")
        for box in self.boxes:
            box.validate()
        seen: set[int] = set()
        for ident in self.identifiers:
            if not 0 < ident < 2**32:
                raise PromptError(f"identifier {ident} outside (0, 2^32)")
            if ident in seen:
                raise PromptError(f"identifier {ident} repeated")
            seen.add(ident)

    def quantized(self) -> "Prompt":
        return Prompt(
            variant=self.variant,
            caption=self.caption,
            boxes=tuple(b.quantized() for b in self.boxes),
            identifiers=self.identifiers,
        )


def prompt_bit_cost(p: Prompt, max_bits: int = DEFAULT_MAX_PROMPT_BITS) -> int:
    """Serialized length in bits, computed without serializing."""
    p.validate()
    cost = (HEADER_BITS + BOX_BITS * len(p.boxes)
            + 8 * len(p.caption.encode("utf-8"))
            + ID_BITS * len(p.identifiers) + CRC_BITS)
    if cost > max_bits:
        raise PromptTooLarge(f"prompt needs {cost} bits, budget {max_bits}")
    return cost


def encode_prompt(p: Prompt, max_bits: int = DEFAULT_MAX_PROMPT_BITS) -> np.ndarray:
    expected = prompt_bit_cost(p, max_bits)
    caption_bytes = p.caption.encode("utf-8")
    w = BitWriter()
    w.write(p.variant.value, 2)
    w.write(len(p.boxes), 6)
    w.write(len(p.identifiers), 6)
    w.write(len(caption_bytes), 10)
    for box in p.boxes:
        w.write(box.class_id, 7)
        w.write(quantize_coord(box.x), 10)
        w.write(quantize_coord(box.y), 10)
        w.write(quantize_coord(box.w), 10)
        w.write(quantize_coord(box.h), 10)
    w.write_bytes(caption_bytes)
    for ident in p.identifiers:
        w.write(ident, 32)
    body = w.to_array()
    crc = crc16_ccitt(bits_to_bytes(body))
    w.write(crc, 16)
    bits = w.to_array()
    assert len(bits) == expected
    return bits


def decode_prompt(bits: np.ndarray) -> Prompt:
    """Parse wire bits; total function over arbitrary input (typed errors only)."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 1 or bits.size < HEADER_BITS + CRC_BITS:
        raise MalformedHeader(f"{bits.size} bits cannot hold header and CRC")
    r = BitReader(bits)
    variant_tag = r.read(2)
    n_boxes = r.read(6)
    n_ids = r.read(6)
    caption_len = r.read(10)
    if variant_tag > 2:
        raise MalformedHeader(f"unknown variant tag {variant_tag}")
    expected = HEADER_BITS + BOX_BITS * n_boxes + 8 * caption_len + ID_BITS * n_ids + CRC_BITS
    if bits.size != expected:
        raise MalformedHeader(f"got {bits.size} bits, header implies {expected}")

    body = bits[: expected - CRC_BITS]
    r_crc = BitReader(bits[expected - CRC_BITS :])
    if crc16_ccitt(bits_to_bytes(body)) != r_crc.read(16):
        raise CrcMismatch("prompt checksum failure")

    boxes = []
    for _ in range(n_boxes):
        class_id = r.read(7)
        coords = [r.read(10) for _ in range(4)]
        boxes.append(LabeledBox(class_id, *(dequantize_coord(q) for q in coords)))
    caption_raw = r.read_bytes(caption_len)
    try:
        caption = caption_raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedPayload(f"caption is not valid UTF-8: {exc}") from exc
    identifiers = tuple(r.read(32) for _ in range(n_ids))

    prompt = Prompt(variant=PromptVariant(variant_tag), caption=caption,
                    boxes=tuple(boxes), identifiers=identifiers)
    try:
        prompt.validate()
    except PromptError as exc:
        raise MalformedPayload(str(exc)) from exc
    return prompt


def prompt_to_json(p: Prompt) -> dict:
    return {
        "variant": p.variant.name,
        "caption": p.caption,
        "boxes": [
            {"class_id": b.class_id, "x": b.x, "y": b.y, "w": b.w, "h": b.h}
            for b in p.boxes
        ],
        "identifiers": list(p.identifiers),
    }


def prompt_from_json(doc: dict) -> Prompt:
    try:
        variant = PromptVariant[doc["variant"]]
        boxes = tuple(
            LabeledBox(int(b["class_id"]), float(b["x"]), float(b["y"]),
                       float(b["w"]), float(b["h"]))
            for b in doc.get("boxes", [])
        )
        prompt = Prompt(variant=variant, caption=doc.get("caption", ""),
                        boxes=boxes, identifiers=tuple(int(i) for i in doc.get("identifiers", [])))
    except (KeyError, TypeError, ValueError) as exc:
        raise PromptError(f"bad prompt document: {exc}") from exc
    prompt.validate()
    return prompt
