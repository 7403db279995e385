"""Echo-mode semantics, reimplemented from the published provider docs:
palette tables, caption grammar, grid layout, rectangle rendering, and the
256-dimensional color-occupancy embedding. Pixel- and string-compatible
with the simulator's builtin stubs by construction, pinned by the shared
golden transcripts and cross-run tests.
"""

from __future__ import annotations

import base64
import math
from typing import Any

import numpy as np

CLASS_NAMES = (
    "person", "bicycle", "car", "motorcycle", "airplane", "bus", "train",
    "truck", "boat", "traffic light", "fire hydrant", "stop sign",
    "parking meter", "bench", "bird", "cat", "dog", "horse", "sheep", "cow",
    "elephant", "bear", "zebra", "giraffe", "backpack", "umbrella", "handbag",
    "tie", "suitcase", "frisbee", "skis", "snowboard", "sports ball", "kite",
    "baseball bat", "baseball glove", "skateboard", "surfboard",
    "tennis racket", "bottle", "wine glass", "cup", "fork", "knife", "spoon",
    "bowl", "banana", "apple", "sandwich", "orange", "broccoli", "carrot",
    "hot dog", "pizza", "donut", "cake", "chair", "couch", "potted plant",
    "bed", "dining table", "toilet", "tv", "laptop", "mouse", "remote",
    "keyboard", "cell phone", "microwave", "oven", "toaster", "sink",
    "refrigerator", "book", "clock", "vase", "scissors", "teddy bear",
    "hair drier", "toothbrush",
)

OBJECT_COLORS = (
    ("red", (230, 25, 25)), ("green", (25, 200, 25)), ("blue", (35, 35, 230)),
    ("yellow", (240, 240, 30)), ("orange", (245, 140, 20)),
    ("purple", (140, 30, 220)), ("cyan", (30, 220, 220)),
    ("magenta", (230, 30, 200)), ("brown", (140, 85, 25)),
    ("pink", (250, 150, 190)), ("olive", (128, 128, 30)),
    ("teal", (20, 130, 130)), ("navy", (25, 25, 112)),
    ("maroon", (128, 20, 40)), ("gold", (212, 175, 55)),
    ("lime", (150, 250, 60)),
)

BACKGROUND_COLORS = (
    ("plain", (208, 208, 208), False), ("white", (245, 245, 245), False),
    ("black", (18, 18, 18), False), ("slate", (105, 105, 125), True),
    ("sky", (150, 190, 235), True), ("grass", (70, 150, 70), True),
    ("sand", (205, 180, 130), True), ("water", (60, 110, 170), True),
)

_COLOR_BY_NAME = {name: idx for idx, (name, _) in enumerate(OBJECT_COLORS)}
_CLASS_BY_NAME = {name: idx for idx, name in enumerate(CLASS_NAMES)}
_BACKGROUND_BY_NAME = {name: idx for idx, (name, _, _) in enumerate(BACKGROUND_COLORS)}

_PALETTE = np.array([rgb for _, rgb in OBJECT_COLORS]
                    + [rgb for _, rgb, _ in BACKGROUND_COLORS], dtype=np.float32)
_PALETTE_SQNORM = (_PALETTE**2).sum(axis=1)


class StubError(ValueError):
    """Input does not satisfy the documented stub contracts."""


# --- images ----------------------------------------------------------------------

def image_from_payload(doc: Any) -> np.ndarray:
    try:
        width, height = int(doc["width"]), int(doc["height"])
        pixels = base64.b64decode(doc["rgb8_base64"], validate=True)
    except (KeyError, TypeError, ValueError) as exc:
        raise StubError(f"bad image payload: {exc}") from exc
    if len(pixels) != width * height * 3:
        raise StubError("pixel buffer length != width*height*3")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width, 3)


def image_to_payload(arr: np.ndarray) -> dict:
    h, w, _ = arr.shape
    return {"width": w, "height": h,
            "rgb8_base64": base64.b64encode(arr.astype(np.uint8).tobytes()).decode("ascii")}


def classify(arr: np.ndarray) -> np.ndarray:
    flat = arr.reshape(-1, 3).astype(np.float32)
    scores = _PALETTE_SQNORM[None, :] - 2.0 * (flat @ _PALETTE.T)
    return scores.argmin(axis=1).reshape(arr.shape[:2])


def background_field(width: int, height: int, background: int) -> np.ndarray:
    _, base, textured = BACKGROUND_COLORS[background]
    img = np.empty((height, width, 3), dtype=np.float64)
    img[:] = np.array(base, dtype=np.float64)
    if textured:
        rows = np.arange(height, dtype=np.float64)
        cols = np.arange(width, dtype=np.float64)
        ramp = np.round(14.0 * (2.0 * rows / max(height - 1, 1) - 1.0))
        ripple_v = np.round(5.0 * np.sin(2.0 * math.pi * rows / 16.0))
        ripple_h = np.round(7.0 * np.sin(2.0 * math.pi * cols / 16.0))
        img += (ramp[:, None] + ripple_v[:, None] + ripple_h[None, :])[:, :, None]
    return np.clip(img, 0, 255).astype(np.uint8)


def box_to_pixels(x, y, w, h, width, height):
    return (max(int(round(x * width)), 0), max(int(round(y * height)), 0),
            min(int(round((x + w) * width)), width),
            min(int(round((y + h) * height)), height))


# --- grammar ----------------------------------------------------------------------

def caption_for(items: list[tuple[int | None, int]], background: int) -> str:
    bg = BACKGROUND_COLORS[background][0]
    if not items:
        return f"nothing on {bg} background"
    phrases = []
    for color, class_id in items:
        if color is None:
            phrases.append(f"a {CLASS_NAMES[class_id]}")
        else:
            phrases.append(f"a {OBJECT_COLORS[color][0]} {CLASS_NAMES[class_id]}")
    return " and ".join(phrases) + f" on {bg} background"


def parse_caption(text: str) -> tuple[list[tuple[int | None, int]], int]:
    if not text.endswith(" background"):
        raise StubError(f"caption lacks the background suffix: {text!r}")
    head = text[: -len(" background")]
    body, sep, bg_name = head.rpartition(" on ")
    if not sep or bg_name not in _BACKGROUND_BY_NAME:
        raise StubError(f"unknown background in caption: {text!r}")
    background = _BACKGROUND_BY_NAME[bg_name]
    if body == "nothing":
        return [], background
    items: list[tuple[int | None, int]] = []
    for phrase in body.split(" and "):
        words = phrase.split(" ")
        if len(words) < 2 or words[0] != "a":
            raise StubError(f"bad phrase {phrase!r}")
        rest = words[1:]
        color: int | None = None
        if rest[0] in _COLOR_BY_NAME and len(rest) > 1:
            color = _COLOR_BY_NAME[rest[0]]
            rest = rest[1:]
        name = " ".join(rest)
        if name not in _CLASS_BY_NAME:
            raise StubError(f"unknown class {name!r}")
        items.append((color, _CLASS_BY_NAME[name]))
    return items, background


def grid_layout(count: int) -> list[tuple[float, float, float, float]]:
    if count < 1:
        return []
    cols = math.ceil(math.sqrt(count))
    rows = math.ceil(count / cols)
    out = []
    for i in range(count):
        r, c = divmod(i, cols)
        cw, ch = 1.0 / cols, 1.0 / rows
        q = lambda v: round(v * 1024) / 1024
        out.append((q((c + 0.2) * cw), q((r + 0.2) * ch), q(0.6 * cw), q(0.6 * ch)))
    return out


# --- op semantics ------------------------------------------------------------------

def detect_objects(arr: np.ndarray) -> list[tuple[int, tuple[float, float, float, float]]]:
    labels = classify(arr)
    h, w = labels.shape
    found = []
    for color in range(len(OBJECT_COLORS)):
        mask = labels == color
        if not mask.any():
            continue
        ys, xs = np.nonzero(mask)
        x0, x1 = int(xs.min()), int(xs.max()) + 1
        y0, y1 = int(ys.min()), int(ys.max()) + 1
        found.append((color, (x0 / w, y0 / h, (x1 - x0) / w, (y1 - y0) / h)))
    return found


def dominant_background(arr: np.ndarray) -> int:
    labels = classify(arr)
    bg = labels[labels >= len(OBJECT_COLORS)]
    if bg.size == 0:
        return 0
    return int(np.bincount(bg.ravel()).argmax()) - len(OBJECT_COLORS)


def extract(source: dict, scheme: str, omit_color: bool) -> dict:
    """Prompt JSON for a scene document or a raster image payload."""
    if "scene" in source:
        scene = source["scene"]
        try:
            objects = scene["objects"]
            background = int(scene["background"])
        except (KeyError, TypeError) as exc:
            raise StubError(f"bad scene document: {exc}") from exc
        identifiers = [int(o["identifier"]) for o in objects]
        if scheme in ("NA", "HA"):
            boxes = [{"class_id": int(o["class_id"]), "x": float(o["x"]),
                      "y": float(o["y"]), "w": float(o["w"]), "h": float(o["h"])}
                     for o in objects]
            return {"variant": "LABELED_BOXES", "caption": "", "boxes": boxes,
                    "identifiers": identifiers}
        items = [(None if omit_color else int(o["color"]), int(o["class_id"]))
                 for o in objects]
        return {"variant": "CAPTION", "caption": caption_for(items, background),
                "boxes": [], "identifiers": identifiers}

    if "image" in source:
        arr = image_from_payload(source["image"])
        detections = detect_objects(arr)
        if scheme in ("NA", "HA"):
            boxes = [{"class_id": color, "x": b[0], "y": b[1], "w": b[2], "h": b[3]}
                     for color, b in detections]
            return {"variant": "LABELED_BOXES", "caption": "", "boxes": boxes,
                    "identifiers": []}
        items = [(None if omit_color else color, color) for color, _ in detections]
        return {"variant": "CAPTION",
                "caption": caption_for(items, dominant_background(arr)),
                "boxes": [], "identifiers": []}

    raise StubError("source must carry a scene or an image")


def reconstruct(prompt: dict, scheme: str, kb: dict, canvas: dict) -> np.ndarray:
    width = int(canvas.get("width", 256))
    height = int(canvas.get("height", 256))
    history = kb.get("history", {}) if isinstance(kb, dict) else {}
    uses_history = scheme in ("HI", "HA")

    if scheme in ("NA", "HA"):
        if prompt.get("variant") not in ("LABELED_BOXES", "HYBRID"):
            raise StubError(f"{scheme} needs labeled boxes")
        entries = [(int(b["class_id"]), None,
                    (float(b["x"]), float(b["y"]), float(b["w"]), float(b["h"])))
                   for b in prompt.get("boxes", [])]
        background = 0
    elif scheme in ("NI", "HI"):
        if prompt.get("variant") not in ("CAPTION", "HYBRID"):
            raise StubError(f"{scheme} needs a caption")
        items, background = parse_caption(prompt.get("caption", ""))
        entries = [(class_id, color, box)
                   for (color, class_id), box in zip(items, grid_layout(len(items)))]
    else:
        raise StubError(f"unknown scheme {scheme!r}")

    identifiers = prompt.get("identifiers", [])
    img = background_field(width, height, background)
    for index, (class_id, caption_color, box) in enumerate(entries):
        color = None
        if uses_history and index < len(identifiers):
            record = history.get(str(identifiers[index]))
            if record is not None:
                color = int(record["color"])
        if color is None:
            color = caption_color if caption_color is not None else class_id % 16
        x0, y0, x1, y1 = box_to_pixels(*box, width, height)
        img[y0:y1, x0:x1] = OBJECT_COLORS[color][1]
    return img


def embed_image(arr: np.ndarray) -> np.ndarray:
    labels = classify(arr)
    vec = np.zeros(256)
    for color in range(len(OBJECT_COLORS)):
        mask = labels == color
        if not mask.any():
            continue
        ys, xs = np.nonzero(mask)
        sub = mask[ys.min():ys.max() + 1, xs.min():xs.max() + 1]
        row_edges = np.round(np.linspace(0, sub.shape[0], 5)).astype(int)
        col_edges = np.round(np.linspace(0, sub.shape[1], 5)).astype(int)
        for r in range(4):
            for c in range(4):
                cell = sub[row_edges[r]:row_edges[r + 1], col_edges[c]:col_edges[c + 1]]
                vec[color * 16 + r * 4 + c] = float(cell.mean()) if cell.size else 0.0
    if not vec.any():
        vec[:] = 1.0
    return vec / np.linalg.norm(vec)


def embed_text(text: str) -> np.ndarray:
    items, background = parse_caption(text)
    img = background_field(256, 256, background)
    for (color, class_id), box in zip(items, grid_layout(len(items))):
        resolved = color if color is not None else class_id % 16
        x0, y0, x1, y1 = box_to_pixels(*box, 256, 256)
        img[y0:y1, x0:x1] = OBJECT_COLORS[resolved][1]
    return embed_image(img)
