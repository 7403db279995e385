"""Provider layer: deterministic stub extract/reconstruct/embed/caption plus
external bindings over gateway protocol v1.

The stubs close the loop without any ML model:

* Caption grammar: "a {color} {class-name}" phrases joined by " and ",
  suffixed " on {background} background". With the scheme-level
  `omit_color` flag the color word is dropped. The grammar is invertible,
  and like a real captioner it discards object positions and sizes.
* Reconstruction paints each object as a filled rectangle. Color
  resolution: history color for its identifier (history schemes only),
  else the caption color, else the class-default palette entry.
  Caption-driven reconstructions place objects on a fixed grid in prompt
  order; box-driven ones place them exactly.
* The joint embedding maps a raster to 16 colors x 16 cells: for every
  object-palette color present, the fractional coverage of a 4x4 grid
  anchored on that color's own bounding box. Anchoring on the color's
  bbox (not the frame) makes the vector position-invariant, and fractions
  (not areas) make solid rectangles size-invariant — whole-image
  similarity ignores layout while cropped comparisons stay content-true.
  Text embeds as the rendering of the scene its caption describes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Any

import numpy as np

from . import channel as _channel
from .errors import (EmptyInput, GrammarError, PromptSchemeMismatch,
                     ProviderError, ProviderUnavailable, UnsupportedModality)
from .knowledge import KnowledgeBase
from .prompts import LabeledBox, Prompt, PromptVariant
from .protocol import (GatewayClient, image_from_payload, image_payload,
                       symbols_from_payload, symbols_payload)
from .scene import (BACKGROUND_COLORS, CLASS_NAMES, OBJECT_COLORS, RasterImage,
                    SceneDescription, background_field, box_to_pixels,
                    classify_pixels, default_color_for_class, render_scene)
from .prompts import prompt_from_json, prompt_to_json

__all__ = ["Scheme", "SelectionPolicy", "NoiseAdaptivePolicy", "EMBED_DIM",
           "caption_for", "parse_caption", "grid_layout", "stub_extract",
           "stub_reconstruct", "reconstruction_items", "prompt_placements",
           "stub_embed_image", "stub_embed_text", "stub_caption_image",
           "ProviderBinding", "ProviderSet", "denoise_external", "detect_objects",
           "DENOISE_CONDITIONING", "conditioning_iterations"]

EMBED_DIM = 256
_GRID = 4

_COLOR_BY_NAME = {name: idx for idx, (name, _) in enumerate(OBJECT_COLORS)}
_CLASS_BY_NAME = {name: idx for idx, name in enumerate(CLASS_NAMES)}
_BACKGROUND_BY_NAME = {name: idx for idx, (name, _, _) in enumerate(BACKGROUND_COLORS)}


class Scheme(Enum):
    """History (H) / no-history (N) x position-aligned (A) / independent (I)."""

    NI = "NI"
    NA = "NA"
    HI = "HI"
    HA = "HA"
    SHANNON_BASELINE = "ShannonBaseline"

    @property
    def uses_history(self) -> bool:
        return self in (Scheme.HI, Scheme.HA)

    @property
    def uses_boxes(self) -> bool:
        return self in (Scheme.NA, Scheme.HA)

    @property
    def uses_caption(self) -> bool:
        return self in (Scheme.NI, Scheme.HI)


@dataclass(frozen=True)
class SelectionPolicy:
    """Which extracted features make it into the prompt: keep the most
    confident first, drop the rest (max-boxes-first), optionally gated by a
    confidence threshold. `adjust` is the semantic-noise hook: the pipeline
    passes the fraction of source identifiers missing from the target
    knowledge base before extraction, and a policy may widen its budget in
    response; the default policy ignores the signal."""

    max_items: int = 63
    min_confidence: float = 0.0

    def apply(self, count: int, confidences: list[float]) -> int:
        kept = [i for i in range(count) if confidences[i] >= self.min_confidence]
        return min(len(kept), self.max_items)

    def adjust(self, semantic_noise: float) -> "SelectionPolicy":
        return self


@dataclass(frozen=True)
class NoiseAdaptivePolicy(SelectionPolicy):
    """Reference prompt-count hook: above the noise threshold, keep every
    feature regardless of the configured cap (more prompt material when the
    receiver is missing knowledge)."""

    noise_threshold: float = 0.5

    def adjust(self, semantic_noise: float) -> SelectionPolicy:
        if semantic_noise >= self.noise_threshold:
            return SelectionPolicy(max_items=63, min_confidence=0.0)
        return SelectionPolicy(max_items=self.max_items,
                               min_confidence=self.min_confidence)


# --- caption grammar -------------------------------------------------------------

def caption_for(items: list[tuple[int | None, int]], background: int) -> str:
    """items = (color index or None, class id), in prompt order."""
    bg_name = BACKGROUND_COLORS[background][0]
    if not items:
        return f"nothing on {bg_name} background"
    phrases = []
    for color, class_id in items:
        if color is None:
            phrases.append(f"a {CLASS_NAMES[class_id]}")
        else:
            phrases.append(f"a {OBJECT_COLORS[color][0]} {CLASS_NAMES[class_id]}")
    return " and ".join(phrases) + f" on {bg_name} background"


def parse_caption(text: str) -> tuple[list[tuple[int | None, int]], int]:
    """Invert caption_for; raises GrammarError on anything else."""
    if not text.endswith(" background"):
        raise GrammarError(f"caption lacks the background suffix: {text!r}")
    head = text[: -len(" background")]
    body, sep, bg_name = head.rpartition(" on ")
    if not sep or bg_name not in _BACKGROUND_BY_NAME:
        raise GrammarError(f"unknown background in caption: {text!r}")
    background = _BACKGROUND_BY_NAME[bg_name]
    if body == "nothing":
        return [], background
    items: list[tuple[int | None, int]] = []
    for phrase in body.split(" and "):
        words = phrase.split(" ")
        if len(words) < 2 or words[0] != "a":
            raise GrammarError(f"bad phrase {phrase!r}")
        rest = words[1:]
        color: int | None = None
        if rest[0] in _COLOR_BY_NAME and len(rest) > 1:
            color = _COLOR_BY_NAME[rest[0]]
            rest = rest[1:]
        class_name = " ".join(rest)
        if class_name not in _CLASS_BY_NAME:
            raise GrammarError(f"unknown class {class_name!r}")
        items.append((color, _CLASS_BY_NAME[class_name]))
    return items, background


def grid_layout(count: int) -> list[tuple[float, float, float, float]]:
    """Fixed layout for caption-driven reconstruction: objects evenly spaced
    on a grid in prompt order, box = 60% of its cell, on the 1/1024 grid."""
    if count < 1:
        return []
    cols = math.ceil(math.sqrt(count))
    rows = math.ceil(count / cols)
    boxes = []
    for i in range(count):
        r, c = divmod(i, cols)
        cell_w, cell_h = 1.0 / cols, 1.0 / rows
        x = (c + 0.2) * cell_w
        y = (r + 0.2) * cell_h
        w, h = 0.6 * cell_w, 0.6 * cell_h
        q = lambda v: round(v * 1024) / 1024
        boxes.append((q(x), q(y), q(w), q(h)))
    return boxes


# --- stub providers ---------------------------------------------------------------

def detect_objects(img: RasterImage) -> list[tuple[int, tuple[float, float, float, float]]]:
    """Palette-color detection: (color index, normalized bbox) for each
    object color present, in palette order."""
    arr = img.to_array()
    labels = classify_pixels(arr)
    found = []
    for color in range(len(OBJECT_COLORS)):
        mask = labels == color
        if not mask.any():
            continue
        ys, xs = np.nonzero(mask)
        x0, x1 = int(xs.min()), int(xs.max()) + 1
        y0, y1 = int(ys.min()), int(ys.max()) + 1
        found.append((color, (x0 / img.width, y0 / img.height,
                              (x1 - x0) / img.width, (y1 - y0) / img.height)))
    return found


def stub_extract(source: SceneDescription | RasterImage, scheme: Scheme, *,
                 omit_color: bool = False,
                 policy: SelectionPolicy | None = None) -> Prompt:
    """Deterministic extraction. Scene objects carry confidence 1 - i/64 in
    listed order, so prompt order equals scene order after selection."""
    policy = policy or SelectionPolicy()
    if scheme is Scheme.SHANNON_BASELINE:
        raise PromptSchemeMismatch("the baseline scheme transmits no prompt")

    if isinstance(source, SceneDescription):
        confidences = [1.0 - i / 64 for i in range(len(source.objects))]
        kept = policy.apply(len(source.objects), confidences)
        objects = source.objects[:kept]
        identifiers = tuple(o.identifier for o in objects)
        if scheme.uses_boxes:
            boxes = tuple(LabeledBox(o.class_id, o.x, o.y, o.w, o.h) for o in objects)
            return Prompt(variant=PromptVariant.LABELED_BOXES, boxes=boxes,
                          identifiers=identifiers)
        items = [(None if omit_color else o.color, o.class_id) for o in objects]
        caption = caption_for(items, source.background)
        return Prompt(variant=PromptVariant.CAPTION, caption=caption,
                      identifiers=identifiers)

    if isinstance(source, RasterImage):
        detections = detect_objects(source)
        confidences = [1.0 - i / 64 for i in range(len(detections))]
        kept = policy.apply(len(detections), confidences)
        detections = detections[:kept]
        if scheme.uses_boxes:
            boxes = tuple(LabeledBox(color, *bbox) for color, bbox in detections)
            return Prompt(variant=PromptVariant.LABELED_BOXES, boxes=boxes)
        labels = classify_pixels(source.to_array())
        bg_labels = labels[labels >= len(OBJECT_COLORS)]
        background = (int(np.bincount(bg_labels.ravel()).argmax()) - len(OBJECT_COLORS)
                      if bg_labels.size else 0)
        items = [(None if omit_color else color, color) for color, _ in detections]
        caption = caption_for(items, background)
        return Prompt(variant=PromptVariant.CAPTION, caption=caption)

    raise UnsupportedModality(f"cannot extract from {type(source).__name__}")


@dataclass(frozen=True)
class PlacedObject:
    class_id: int
    color: int
    box: tuple[float, float, float, float]
    identifier: int | None


def prompt_placements(prompt: Prompt, scheme: Scheme) -> tuple[list[tuple[int, int | None, tuple[float, float, float, float], int | None]], int]:
    """KB-free placement resolution: (class_id, caption color, box, identifier)
    per object plus the background. Box schemes place exactly; caption
    schemes use the fixed grid layout in prompt order."""
    if scheme is Scheme.SHANNON_BASELINE:
        raise PromptSchemeMismatch("the baseline scheme reconstructs from bits, not prompts")

    if scheme.uses_boxes:
        if prompt.variant not in (PromptVariant.LABELED_BOXES, PromptVariant.HYBRID):
            raise PromptSchemeMismatch(f"{scheme.value} needs labeled boxes")
        entries = [(box.class_id, None, (box.x, box.y, box.w, box.h)) for box in prompt.boxes]
        background = 0  # box prompts carry no background; palette entry 0
    else:
        if prompt.variant not in (PromptVariant.CAPTION, PromptVariant.HYBRID):
            raise PromptSchemeMismatch(f"{scheme.value} needs a caption")
        parsed, background = parse_caption(prompt.caption)
        layout = grid_layout(len(parsed))
        entries = [(class_id, color, box) for (color, class_id), box in zip(parsed, layout)]

    resolved = []
    for index, (class_id, caption_color, box) in enumerate(entries):
        identifier = prompt.identifiers[index] if index < len(prompt.identifiers) else None
        resolved.append((class_id, caption_color, box, identifier))
    return resolved, background


def reconstruction_items(prompt: Prompt, scheme: Scheme, kb: KnowledgeBase) -> tuple[list[PlacedObject], int]:
    """Resolve placements and colors for a prompt; returns (objects, background).

    Color precedence: per-identifier history (history schemes only), then
    the caption color, then the class-default palette entry."""
    entries, background = prompt_placements(prompt, scheme)
    placed = []
    for class_id, caption_color, box, identifier in entries:
        color: int | None = None
        if scheme.uses_history and identifier is not None:
            record = kb.get(identifier)
            if record is not None:
                color = record.color
        if color is None:
            color = caption_color if caption_color is not None else default_color_for_class(class_id)
        placed.append(PlacedObject(class_id=class_id, color=color, box=box,
                                   identifier=identifier))
    return placed, background


def stub_reconstruct(prompt: Prompt, scheme: Scheme, kb: KnowledgeBase, *,
                     width: int = 256, height: int = 256) -> RasterImage:
    placed, background = reconstruction_items(prompt, scheme, kb)
    img = background_field(width, height, background)
    for obj in placed:
        x0, y0, x1, y1 = box_to_pixels(*obj.box, width, height)
        img[y0:y1, x0:x1] = OBJECT_COLORS[obj.color][1]
    return RasterImage.from_array(img)


def stub_embed_image(img: RasterImage) -> np.ndarray:
    if img.width == 0 or img.height == 0:
        raise EmptyInput("cannot embed an empty image")
    return _embed_image_cached(img).copy()


@lru_cache(maxsize=512)
def _embed_image_cached(img: RasterImage) -> np.ndarray:
    arr = img.to_array()
    labels = classify_pixels(arr)
    vec = np.zeros(EMBED_DIM)
    for color in range(len(OBJECT_COLORS)):
        mask = labels == color
        if not mask.any():
            continue
        ys, xs = np.nonzero(mask)
        y0, y1 = int(ys.min()), int(ys.max()) + 1
        x0, x1 = int(xs.min()), int(xs.max()) + 1
        sub = mask[y0:y1, x0:x1]
        row_edges = np.round(np.linspace(0, sub.shape[0], _GRID + 1)).astype(int)
        col_edges = np.round(np.linspace(0, sub.shape[1], _GRID + 1)).astype(int)
        for r in range(_GRID):
            for c in range(_GRID):
                cell = sub[row_edges[r]:row_edges[r + 1], col_edges[c]:col_edges[c + 1]]
                frac = float(cell.mean()) if cell.size else 0.0
                vec[color * _GRID * _GRID + r * _GRID + c] = frac
    if not vec.any():
        vec[:] = 1.0  # object-free input: fixed nonzero direction
    return vec / np.linalg.norm(vec)


def stub_embed_text(text: str) -> np.ndarray:
    """Embed the scene the caption describes, via the shared grid layout."""
    if not text:
        raise EmptyInput("cannot embed empty text")
    return _embed_text_cached(text).copy()


@lru_cache(maxsize=512)
def _embed_text_cached(text: str) -> np.ndarray:
    items, background = parse_caption(text)
    layout = grid_layout(len(items))
    img = background_field(256, 256, background)
    for (color, class_id), box in zip(items, layout):
        resolved = color if color is not None else default_color_for_class(class_id)
        x0, y0, x1, y1 = box_to_pixels(*box, 256, 256)
        img[y0:y1, x0:x1] = OBJECT_COLORS[resolved][1]
    return stub_embed_image(RasterImage.from_array(img))


@lru_cache(maxsize=512)
def stub_caption_image(img: RasterImage) -> str:
    """Inverse-render captioning. Classes are canonical (palette index):
    pixel colors cannot reveal the true category, only its palette bin."""
    arr = img.to_array()
    labels = classify_pixels(arr)
    detections = detect_objects(img)
    items = [(color, color) for color, _ in detections]
    bg_labels = labels[labels >= len(OBJECT_COLORS)]
    background = (int(np.bincount(bg_labels.ravel()).argmax()) - len(OBJECT_COLORS)
                  if bg_labels.size else 0)
    return caption_for(items, background)


# --- provider bindings --------------------------------------------------------------

_KINDS = ("extractor", "reconstructor", "denoiser", "embedder")


@dataclass(frozen=True)
class ProviderBinding:
    kind: str
    mode: str = "builtin-stub"
    endpoint: str | None = None
    fallback: bool = False

    def validate(self) -> None:
        if self.kind not in _KINDS:
            raise ProviderUnavailable(f"unknown provider kind {self.kind!r}")
        if self.mode not in ("builtin-stub", "external"):
            raise ProviderUnavailable(f"unknown provider mode {self.mode!r}")
        if self.mode == "external" and not self.endpoint:
            raise ProviderUnavailable(f"external {self.kind} binding has no endpoint")


DENOISE_CONDITIONING = ((0.0, 16), (5.0, 8), (10.0, 4), (20.0, 2))


def conditioning_iterations(snr_db: float,
                            table=DENOISE_CONDITIONING) -> int:
    """SNR-conditioned iteration suggestion for external denoisers: the entry
    with the highest threshold not exceeding the estimate (providers may
    ignore it; the built-in scaler does)."""
    iterations = table[0][1]
    for threshold, count in table:
        if snr_db >= threshold:
            iterations = count
    return iterations


def denoise_external(symbols: np.ndarray, snr_db: float, binding: ProviderBinding,
                     client: GatewayClient | None = None,
                     conditioning=DENOISE_CONDITIONING) -> np.ndarray:
    """Forward symbols plus the SNR condition to the bound denoiser; fall back
    to the built-in LMMSE scaler on provider failure when enabled."""
    binding.validate()
    if binding.mode == "builtin-stub":
        return _channel.lmmse_denoise(symbols, snr_db)
    try:
        gateway = client or GatewayClient(binding.endpoint or "")
        payload = {"symbols": symbols_payload(symbols), "snr_db": float(snr_db),
                   "iterations": conditioning_iterations(snr_db, conditioning)}
        result = gateway.request("denoise", payload)
        out = symbols_from_payload(result.get("symbols") if isinstance(result, dict) else None)
        if out.shape != np.asarray(symbols).shape:
            raise ProviderUnavailable("denoiser returned a different symbol count")
        return out
    except ProviderError:
        if binding.fallback:
            return _channel.lmmse_denoise(symbols, snr_db)
        raise


class ProviderSet:
    """Resolved bindings with call counters (used by the pipeline's audit
    invariants: one extract per transmission, no history reads for N-schemes)."""

    def __init__(self, bindings: dict[str, ProviderBinding] | None = None,
                 timeout: float = 10.0,
                 denoise_conditioning=DENOISE_CONDITIONING) -> None:
        self.bindings = {kind: ProviderBinding(kind=kind) for kind in _KINDS}
        for kind, binding in (bindings or {}).items():
            binding.validate()
            self.bindings[kind] = binding
        self.calls = {kind: 0 for kind in _KINDS}
        self._clients: dict[str, GatewayClient] = {}
        self._timeout = timeout
        self._denoise_conditioning = tuple(denoise_conditioning)

    def _client(self, kind: str) -> GatewayClient:
        binding = self.bindings[kind]
        if kind not in self._clients:
            self._clients[kind] = GatewayClient(binding.endpoint or "", timeout=self._timeout)
        return self._clients[kind]

    def close(self) -> None:
        for client in self._clients.values():
            client.close()
        self._clients.clear()

    def extract(self, source: SceneDescription | RasterImage, scheme: Scheme, *,
                omit_color: bool = False, policy: SelectionPolicy | None = None) -> Prompt:
        self.calls["extractor"] += 1
        binding = self.bindings["extractor"]
        if binding.mode == "builtin-stub":
            return stub_extract(source, scheme, omit_color=omit_color, policy=policy)
        if isinstance(source, RasterImage):
            payload: dict[str, Any] = {"source": {"image": image_payload(source)}}
        else:
            from .scene import scene_to_json
            payload = {"source": {"scene": scene_to_json(source)}}
        payload["options"] = {"omit_color": omit_color}
        result = self._client("extractor").request("extract", payload, scheme=scheme.value)
        if not isinstance(result, dict) or "prompt" not in result:
            raise ProviderUnavailable("extractor returned no prompt")
        return prompt_from_json(result["prompt"])

    def reconstruct(self, prompt: Prompt, scheme: Scheme, kb: KnowledgeBase, *,
                    width: int = 256, height: int = 256) -> RasterImage:
        self.calls["reconstructor"] += 1
        binding = self.bindings["reconstructor"]
        if binding.mode == "builtin-stub":
            return stub_reconstruct(prompt, scheme, kb, width=width, height=height)
        history = {
            str(ident): {"color": rec.color, "class_id": rec.class_id}
            for ident, rec in kb.history_snapshot().items()
        } if scheme.uses_history else {}
        if scheme.uses_history:
            kb.history_reads += len(history)
        payload = {
            "prompt": prompt_to_json(prompt),
            "kb": {"general": kb.general, "history": history},
            "canvas": {"width": width, "height": height},
        }
        result = self._client("reconstructor").request("reconstruct", payload, scheme=scheme.value)
        if not isinstance(result, dict) or "image" not in result:
            raise ProviderUnavailable("reconstructor returned no image")
        return image_from_payload(result["image"])

    def embed_image(self, img: RasterImage) -> np.ndarray:
        self.calls["embedder"] += 1
        binding = self.bindings["embedder"]
        if binding.mode == "builtin-stub":
            return stub_embed_image(img)
        result = self._client("embedder").request("embed", {"image": image_payload(img),
                                                            "modality": "image"})
        return self._vector_from(result)

    def embed_text(self, text: str) -> np.ndarray:
        self.calls["embedder"] += 1
        binding = self.bindings["embedder"]
        if binding.mode == "builtin-stub":
            return stub_embed_text(text)
        result = self._client("embedder").request("embed", {"text": text, "modality": "text"})
        return self._vector_from(result)

    def caption(self, img: RasterImage) -> str:
        # captioning is extraction of a caption prompt from a raster
        binding = self.bindings["extractor"]
        if binding.mode == "builtin-stub":
            return stub_caption_image(img)
        prompt = self.extract(img, Scheme.NI)
        return prompt.caption

    def denoise(self, symbols: np.ndarray, snr_db: float) -> np.ndarray:
        self.calls["denoiser"] += 1
        binding = self.bindings["denoiser"]
        if binding.mode == "builtin-stub":
            return _channel.lmmse_denoise(symbols, snr_db)
        return denoise_external(symbols, snr_db, binding, client=self._client("denoiser"),
                                conditioning=self._denoise_conditioning)

    @staticmethod
    def _vector_from(result: Any) -> np.ndarray:
        if not isinstance(result, dict) or "vector" not in result:
            raise ProviderUnavailable("embedder returned no vector")
        vec = np.asarray(result["vector"], dtype=np.float64)
        if vec.ndim != 1 or not np.all(np.isfinite(vec)) or not vec.any():
            raise ProviderUnavailable("embedder vector is malformed")
        return vec
