"""Feature-alignment metrics and per-scheme report aggregation.

Three semantic scores per trial, all cosine-based and bounded to [-1, 1]:

* image alignment — cosine of whole-image embeddings;
* object alignment — matched object pairs (identifier first, then class
  plus greedy IoU), each scored cosine(crop embeddings) * (1 + IoU) / 2
  and averaged, unmatched objects contributing 0. The positional factor
  is what makes the score placement-aware: the embedding itself is
  position-invariant, so crop cosine alone measures appearance only;
  the factor is 1 exactly when the boxes coincide and never zeroes out
  an appearance match;
* text alignment — cosine of caption embeddings of the two images.

BER/FER stay available as physical-layer diagnostics. PSNR is exposed as
a debug helper only and never aggregated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyInput, LengthMismatch, NoObjects, ZeroVector
from .scene import RasterImage, box_to_pixels

__all__ = ["MatchedBox", "MetricsReport", "SchemeMetrics", "cosine_similarity",
           "box_iou", "crop", "image_feature_alignment", "object_feature_alignment",
           "text_feature_alignment", "bit_error_rate", "psnr_debug", "aggregate"]

Box = tuple[float, float, float, float]


@dataclass(frozen=True)
class MatchedBox:
    """An object reference on one side of the comparison."""

    box: Box
    class_id: int
    identifier: int | None = None


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise DimensionMismatch(f"shapes {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine similarity of a zero vector is undefined")
    return float(np.clip(float(u @ v) / (nu * nv), -1.0, 1.0))


def box_iou(a: Box, b: Box) -> float:
    ax0, ay0, aw, ah = a
    bx0, by0, bw, bh = b
    ix0, iy0 = max(ax0, bx0), max(ay0, by0)
    ix1, iy1 = min(ax0 + aw, bx0 + bw), min(ay0 + ah, by0 + bh)
    inter = max(ix1 - ix0, 0.0) * max(iy1 - iy0, 0.0)
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def crop(img: RasterImage, box: Box) -> RasterImage | None:
    x0, y0, x1, y1 = box_to_pixels(*box, img.width, img.height)
    if x1 <= x0 or y1 <= y0:
        return None
    return RasterImage.from_array(img.to_array()[y0:y1, x0:x1])


def image_feature_alignment(src: RasterImage, dst: RasterImage, embedder) -> float:
    return cosine_similarity(embedder.embed_image(src), embedder.embed_image(dst))


def _match_pairs(src_boxes: list[MatchedBox], dst_boxes: list[MatchedBox]) -> list[tuple[int, int]]:
    """Identifier matches first; leftovers pair by class with greedy IoU,
    ties broken toward the lower identifier (then list order)."""
    pairs: list[tuple[int, int]] = []
    used_dst: set[int] = set()
    dst_by_id = {b.identifier: j for j, b in enumerate(dst_boxes) if b.identifier}
    unmatched_src = []
    for i, sbox in enumerate(src_boxes):
        j = dst_by_id.get(sbox.identifier)
        if sbox.identifier and j is not None and j not in used_dst:
            pairs.append((i, j))
            used_dst.add(j)
        else:
            unmatched_src.append(i)

    candidates = []
    for i in unmatched_src:
        for j, dbox in enumerate(dst_boxes):
            if j in used_dst or dbox.class_id != src_boxes[i].class_id:
                continue
            iou = box_iou(src_boxes[i].box, dbox.box)
            tie = src_boxes[i].identifier or (i + 1)
            candidates.append((-iou, tie, i, j))
    used_src: set[int] = set()
    for _neg_iou, _tie, i, j in sorted(candidates):
        if i in used_src or j in used_dst:
            continue
        pairs.append((i, j))
        used_src.add(i)
        used_dst.add(j)
    return pairs


def object_feature_alignment(src: RasterImage, dst: RasterImage,
                             src_boxes: list[MatchedBox], dst_boxes: list[MatchedBox],
                             embedder) -> float:
    if not src_boxes or not dst_boxes:
        raise NoObjects("object alignment needs boxes on both sides")
    pairs = _match_pairs(src_boxes, dst_boxes)
    total = max(len(src_boxes), len(dst_boxes))
    if total == 0:
        raise NoObjects("no objects to compare")
    score = 0.0
    for i, j in pairs:
        c_src = crop(src, src_boxes[i].box)
        c_dst = crop(dst, dst_boxes[j].box)
        if c_src is None or c_dst is None:
            continue
        cos = cosine_similarity(embedder.embed_image(c_src), embedder.embed_image(c_dst))
        positional = (1.0 + box_iou(src_boxes[i].box, dst_boxes[j].box)) / 2.0
        score += cos * positional
    return score / total


def text_feature_alignment(src: RasterImage, dst: RasterImage, captioner, embedder) -> float:
    src_caption = captioner.caption(src) if hasattr(captioner, "caption") else captioner(src)
    dst_caption = captioner.caption(dst) if hasattr(captioner, "caption") else captioner(dst)
    return cosine_similarity(embedder.embed_text(src_caption), embedder.embed_text(dst_caption))


def bit_error_rate(sent: np.ndarray, received: np.ndarray) -> float:
    sent = np.asarray(sent, dtype=np.uint8)
    received = np.asarray(received, dtype=np.uint8)
    if sent.shape != received.shape:
        raise LengthMismatch(f"lengths {sent.shape} vs {received.shape}")
    if sent.size == 0:
        raise LengthMismatch("empty blocks")
    return float(np.count_nonzero(sent != received)) / sent.size


def psnr_debug(a: RasterImage, b: RasterImage) -> float:
    """Pixel PSNR in dB; a debug diagnostic, never a headline metric."""
    x = a.to_array().astype(np.float64)
    y = b.to_array().astype(np.float64)
    mse = float(np.mean((x - y) ** 2))
    return math.inf if mse == 0 else 10.0 * math.log10(255.0**2 / mse)


# --- aggregation -----------------------------------------------------------------

@dataclass
class SchemeMetrics:
    scheme: str
    trials: int
    image_alignment: float
    object_alignment: float
    text_alignment: float
    kn_ratio: float
    ber: float
    fer: float
    outages: int

    def to_json(self) -> dict:
        return {
            "scheme": self.scheme,
            "trials": self.trials,
            "image_alignment": self.image_alignment,
            "object_alignment": self.object_alignment,
            "text_alignment": self.text_alignment,
            "kn_ratio": self.kn_ratio,
            "ber": self.ber,
            "fer": self.fer,
            "outages": self.outages,
        }


@dataclass
class MetricsReport:
    per_scheme: dict[str, SchemeMetrics] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"per_scheme": {k: v.to_json() for k, v in sorted(self.per_scheme.items())}}

    def csv_rows(self) -> list[list[str]]:
        header = ["scheme", "trials", "image_alignment", "object_alignment",
                  "text_alignment", "kn_ratio", "ber", "fer", "outages"]
        rows = [header]
        for name in sorted(self.per_scheme):
            m = self.per_scheme[name]
            rows.append([m.scheme, str(m.trials), f"{m.image_alignment:.9f}",
                         f"{m.object_alignment:.9f}", f"{m.text_alignment:.9f}",
                         f"{m.kn_ratio:.9e}", f"{m.ber:.9e}", f"{m.fer:.9e}",
                         str(m.outages)])
        return rows

    def plot_tables(self) -> dict[str, str]:
        """Tab-separated scheme/value tables, one per metric."""
        tables = {}
        for metric in ("image_alignment", "object_alignment", "text_alignment",
                       "kn_ratio", "ber", "fer"):
            lines = ["scheme\t" + metric]
            for name in sorted(self.per_scheme):
                lines.append(f"{name}\t{getattr(self.per_scheme[name], metric):.9g}")
            tables[metric] = "\n".join(lines) + "\n"
        return tables


def aggregate(trial_rows: list[dict]) -> MetricsReport:
    """Mean per-scheme metrics. Each row needs: scheme, kn_ratio, ber,
    frame_errors, frames, outage, image_alignment, object_alignment,
    text_alignment (alignment fields may be None for outage rows — they
    count as 0 and are flagged in the outage tally)."""
    if not trial_rows:
        raise EmptyInput("no records to aggregate")
    by_scheme: dict[str, list[dict]] = {}
    for row in trial_rows:
        by_scheme.setdefault(row["scheme"], []).append(row)

    report = MetricsReport()
    for scheme, rows in by_scheme.items():
        n = len(rows)
        outages = sum(1 for r in rows if r.get("outage"))
        def mean_of(key: str) -> float:
            return sum(float(r[key] or 0.0) for r in rows) / n
        frames = sum(int(r.get("frames", 0)) for r in rows)
        frame_errors = sum(int(r.get("frame_errors", 0)) for r in rows)
        report.per_scheme[scheme] = SchemeMetrics(
            scheme=scheme,
            trials=n,
            image_alignment=mean_of("image_alignment"),
            object_alignment=mean_of("object_alignment"),
            text_alignment=mean_of("text_alignment"),
            kn_ratio=mean_of("kn_ratio"),
            ber=mean_of("ber"),
            fer=frame_errors / frames if frames else 0.0,
            outages=outages,
        )
    return report
