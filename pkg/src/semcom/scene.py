"""Synthetic ground-truth scenes: palettes, rendering, and a seeded generator.

Scenes are typed object lists (class, box, color, identifier) over a tagged
background. Renders are flat rectangles so every downstream claim about the
pipeline is checkable pixel-for-pixel.

Palette geometry matters: the 16 object colors and 8 background colors are
spaced so that nearest-neighbor classification of any rendered pixel —
including textured-background pixels and mildly codec-distorted ones — maps
back to the palette entry that produced it. Textured backgrounds (vertical
ramp plus a horizontal ripple, same offset on all channels, bounded by
TEXTURE_MAX_OFFSET) exist to give the baseline image codec natural-image
bit costs; flat backgrounds stay flat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = ["CLASS_NAMES", "OBJECT_COLORS", "BACKGROUND_COLORS", "TEXTURE_MAX_OFFSET",
           "SceneObject", "SceneDescription", "RasterImage",
           "default_color_for_class", "render_scene", "background_field",
           "classify_pixels", "box_to_pixels", "generate_scene", "generate_corpus",
           "scene_to_json", "scene_from_json"]

# 80-category detection vocabulary (index 16 is "dog")
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

# (name, RGB) — names are the caption grammar's color vocabulary
OBJECT_COLORS = (
    ("red", (230, 25, 25)),
    ("green", (25, 200, 25)),
    ("blue", (35, 35, 230)),
    ("yellow", (240, 240, 30)),
    ("orange", (245, 140, 20)),
    ("purple", (140, 30, 220)),
    ("cyan", (30, 220, 220)),
    ("magenta", (230, 30, 200)),
    ("brown", (140, 85, 25)),
    ("pink", (250, 150, 190)),
    ("olive", (128, 128, 30)),
    ("teal", (20, 130, 130)),
    ("navy", (25, 25, 112)),
    ("maroon", (128, 20, 40)),
    ("gold", (212, 175, 55)),
    ("lime", (150, 250, 60)),
)

# (name, base RGB, textured flag)
BACKGROUND_COLORS = (
    ("plain", (208, 208, 208), False),
    ("white", (245, 245, 245), False),
    ("black", (18, 18, 18), False),
    ("slate", (105, 105, 125), True),
    ("sky", (150, 190, 235), True),
    ("grass", (70, 150, 70), True),
    ("sand", (205, 180, 130), True),
    ("water", (60, 110, 170), True),
)

_RAMP_AMPLITUDE = 14
_RIPPLE_H_AMPLITUDE = 7
_RIPPLE_V_AMPLITUDE = 5
_RIPPLE_PERIOD = 16
TEXTURE_MAX_OFFSET = _RAMP_AMPLITUDE + _RIPPLE_H_AMPLITUDE + _RIPPLE_V_AMPLITUDE

COORD_STEPS = 1024
MAX_OBJECTS = 16


def default_color_for_class(class_id: int) -> int:
    """Deterministic fallback color: palette entry class_id mod 16."""
    return class_id % len(OBJECT_COLORS)


@dataclass(frozen=True)
class SceneObject:
    class_id: int
    x: float
    y: float
    w: float
    h: float
    color: int
    identifier: int


@dataclass(frozen=True)
class SceneDescription:
    width: int
    height: int
    background: int
    objects: tuple[SceneObject, ...]

    def validate(self) -> None:
        if not 64 <= self.width <= 1024 or not 64 <= self.height <= 1024:
            raise ConfigError("scene dimensions must lie in [64, 1024]")
        if not 1 <= len(self.objects) <= MAX_OBJECTS:
            raise ConfigError(f"scene needs 1..{MAX_OBJECTS} objects")
        if not 0 <= self.background < len(BACKGROUND_COLORS):
            raise ConfigError(f"unknown background {self.background}")
        seen: set[int] = set()
        for obj in self.objects:
            if not 0 <= obj.class_id <= 79:
                raise ConfigError(f"class_id {obj.class_id} outside [0, 79]")
            if not 0 <= obj.color < len(OBJECT_COLORS):
                raise ConfigError(f"unknown color {obj.color}")
            if obj.w <= 0 or obj.h <= 0 or obj.x < 0 or obj.y < 0:
                raise ConfigError("degenerate box")
            if obj.x + obj.w > 1.0 + 1e-9 or obj.y + obj.h > 1.0 + 1e-9:
                raise ConfigError("box leaves the unit square")
            if obj.identifier in seen or obj.identifier == 0:
                raise ConfigError("identifiers must be unique and nonzero")
            seen.add(obj.identifier)


@dataclass(frozen=True)
class RasterImage:
    """Row-major RGB8 image."""

    width: int
    height: int
    pixels: bytes

    def __post_init__(self) -> None:
        if len(self.pixels) != self.width * self.height * 3:
            raise ValueError("pixel buffer length != width*height*3")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RasterImage":
        arr = np.asarray(arr, dtype=np.uint8)
        h, w, _ = arr.shape
        return cls(width=w, height=h, pixels=arr.tobytes())

    def to_array(self) -> np.ndarray:
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(self.height, self.width, 3)


def background_field(width: int, height: int, background: int) -> np.ndarray:
    """Background raster: base color, plus the deterministic texture if tagged."""
    _, base, textured = BACKGROUND_COLORS[background]
    img = np.empty((height, width, 3), dtype=np.float64)
    img[:] = np.array(base, dtype=np.float64)
    if textured:
        rows = np.arange(height, dtype=np.float64)
        cols = np.arange(width, dtype=np.float64)
        ramp = np.round(_RAMP_AMPLITUDE * (2.0 * rows / max(height - 1, 1) - 1.0))
        ripple_h = np.round(_RIPPLE_H_AMPLITUDE * np.sin(2.0 * math.pi * cols / _RIPPLE_PERIOD))
        ripple_v = np.round(_RIPPLE_V_AMPLITUDE * np.sin(2.0 * math.pi * rows / _RIPPLE_PERIOD))
        img += (ramp[:, None] + ripple_v[:, None] + ripple_h[None, :])[:, :, None]
    return np.clip(img, 0, 255).astype(np.uint8)


def box_to_pixels(x: float, y: float, w: float, h: float,
                  width: int, height: int) -> tuple[int, int, int, int]:
    """Half-open pixel rect (x0, y0, x1, y1) for a normalized box."""
    x0 = int(round(x * width))
    y0 = int(round(y * height))
    x1 = int(round((x + w) * width))
    y1 = int(round((y + h) * height))
    return max(x0, 0), max(y0, 0), min(x1, width), min(y1, height)


def render_scene(scene: SceneDescription) -> RasterImage:
    """Rasterize: background, then each object as a filled rectangle, in order."""
    img = background_field(scene.width, scene.height, scene.background)
    for obj in scene.objects:
        x0, y0, x1, y1 = box_to_pixels(obj.x, obj.y, obj.w, obj.h, scene.width, scene.height)
        img[y0:y1, x0:x1] = OBJECT_COLORS[obj.color][1]
    return RasterImage.from_array(img)


_PALETTE_RGB = np.array(
    [rgb for _, rgb in OBJECT_COLORS] + [rgb for _, rgb, _ in BACKGROUND_COLORS],
    dtype=np.float64,
)


_PALETTE_SQNORM = (_PALETTE_RGB**2).sum(axis=1)


def classify_pixels(arr: np.ndarray) -> np.ndarray:
    """Nearest palette entry per pixel: 0..15 object colors, 16..23 backgrounds."""
    flat = arr.reshape(-1, 3).astype(np.float32)
    # argmin over ||x-c||^2 = ||c||^2 - 2 x.c (the ||x||^2 term is common)
    scores = _PALETTE_SQNORM[None, :] - 2.0 * (flat @ _PALETTE_RGB.T.astype(np.float32))
    return scores.argmin(axis=1).reshape(arr.shape[:2])


# --- seeded generation --------------------------------------------------------

def _grid(v: int) -> float:
    return v / COORD_STEPS


def _sample_box(rng: np.random.Generator) -> tuple[float, float, float, float]:
    qw = int(rng.integers(82, 359))   # 0.08 .. 0.35 of the frame
    qh = int(rng.integers(82, 359))
    qx = int(rng.integers(0, COORD_STEPS - qw + 1))
    qy = int(rng.integers(0, COORD_STEPS - qh + 1))
    return _grid(qx), _grid(qy), _grid(qw), _grid(qh)


def _overlaps(a: tuple[float, float, float, float],
              b: tuple[float, float, float, float]) -> bool:
    return not (a[0] + a[2] <= b[0] or b[0] + b[2] <= a[0]
                or a[1] + a[3] <= b[1] or b[1] + b[3] <= a[1])


def generate_scene(
    rng: np.random.Generator,
    n_objects: int,
    width: int = 256,
    height: int = 256,
    *,
    backgrounds: tuple[int, ...] | None = None,
    allow_overlap: bool = True,
    avoid_default_colors: bool = False,
    default_colors_only: bool = False,
) -> SceneDescription:
    """Draw one scene. Coordinates land on the 1/1024 grid so prompt
    quantization is lossless. Colors are distinct within a scene;
    `avoid_default_colors` additionally keeps every chosen color out of the
    class-default set (exercises knowledge-base effects), while
    `default_colors_only` pins each color to its class default (exercises
    position-only mismatches)."""
    if n_objects < 1 or n_objects > MAX_OBJECTS:
        raise ConfigError(f"n_objects must lie in [1, {MAX_OBJECTS}]")
    if backgrounds is None:
        backgrounds = tuple(range(len(BACKGROUND_COLORS)))
    background = int(rng.choice(backgrounds))

    if default_colors_only:
        # distinct defaults require classes distinct mod 16
        residues = rng.permutation(16)[:n_objects]
        classes = [int(r) + 16 * int(rng.integers(0, 80 // 16)) for r in residues]
        colors = [default_color_for_class(c) for c in classes]
    elif avoid_default_colors:
        if n_objects > 8:
            raise ConfigError("avoid_default_colors supports at most 8 objects")
        classes = [int(c) for c in rng.integers(0, 80, size=n_objects)]
        forbidden = {default_color_for_class(c) for c in classes}
        allowed = [c for c in range(len(OBJECT_COLORS)) if c not in forbidden]
        colors = [int(c) for c in rng.permutation(allowed)[:n_objects]]
    else:
        classes = [int(c) for c in rng.integers(0, 80, size=n_objects)]
        colors = [int(c) for c in rng.permutation(len(OBJECT_COLORS))[:n_objects]]

    boxes: list[tuple[float, float, float, float]] = []
    for _ in range(n_objects):
        for _attempt in range(200):
            box = _sample_box(rng)
            if allow_overlap or not any(_overlaps(box, other) for other in boxes):
                boxes.append(box)
                break
        else:
            raise ConfigError("could not place non-overlapping boxes")

    used_ids: set[int] = set()
    objects = []
    for cls, color, box in zip(classes, colors, boxes):
        ident = 0
        while ident == 0 or ident in used_ids:
            ident = int(rng.integers(1, 2**32))
        used_ids.add(ident)
        objects.append(SceneObject(class_id=cls, x=box[0], y=box[1],
                                   w=box[2], h=box[3], color=color, identifier=ident))
    scene = SceneDescription(width=width, height=height, background=background,
                             objects=tuple(objects))
    scene.validate()
    return scene


def generate_corpus(seed: int, count: int, *, min_objects: int = 1,
                    max_objects: int = MAX_OBJECTS, **kwargs) -> list[SceneDescription]:
    """Deterministic corpus; object counts are stratified over
    [min_objects, max_objects] by index so coverage never depends on luck."""
    if count < 1:
        raise ConfigError("count must be >= 1")
    if not 1 <= min_objects <= max_objects <= MAX_OBJECTS:
        raise ConfigError("bad object count range")
    scenes = []
    span = max_objects - min_objects + 1
    for i in range(count):
        rng = np.random.default_rng([0x5CE2E, seed, i])
        scenes.append(generate_scene(rng, min_objects + i % span, **kwargs))
    return scenes


def scene_to_json(scene: SceneDescription) -> dict:
    return {
        "width": scene.width,
        "height": scene.height,
        "background": scene.background,
        "objects": [
            {"class_id": o.class_id, "x": o.x, "y": o.y, "w": o.w, "h": o.h,
             "color": o.color, "identifier": o.identifier}
            for o in scene.objects
        ],
    }


def scene_from_json(doc: dict) -> SceneDescription:
    try:
        objects = tuple(
            SceneObject(class_id=int(o["class_id"]), x=float(o["x"]), y=float(o["y"]),
                        w=float(o["w"]), h=float(o["h"]), color=int(o["color"]),
                        identifier=int(o["identifier"]))
            for o in doc["objects"]
        )
        scene = SceneDescription(width=int(doc["width"]), height=int(doc["height"]),
                                 background=int(doc["background"]), objects=objects)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scene document: {exc}") from exc
    scene.validate()
    return scene
