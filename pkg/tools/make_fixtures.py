#!/usr/bin/env python3
"""Generate the gateway protocol v1 golden transcripts (run once, check in)."""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from semcom.gateway import stub_embed_image
from semcom.protocol import encode_frame, image_payload, symbols_payload
from semcom.scene import OBJECT_COLORS, RasterImage


def denoise_echo_fixture() -> dict:
    symbols = np.array([0.5 + 0.125j, -0.25 + 0.75j, 1.0 - 1.0j, 0.0 + 0.5j])
    request = {
        "id": 1,
        "op": "denoise",
        "payload": {"symbols": symbols_payload(symbols), "snr_db": 10.0,
                    "iterations": 4},
    }
    response = {
        "id": 1,
        "ok": True,
        "result": {"symbols": symbols_payload(symbols)},
    }
    return {
        "name": "denoise_echo_4sym",
        "request_hex": encode_frame(request).hex(),
        "response_hex": encode_frame(response).hex(),
    }


def embed_solid_fixture() -> dict:
    arr = np.empty((8, 8, 3), dtype=np.uint8)
    arr[:] = OBJECT_COLORS[0][1]
    img = RasterImage.from_array(arr)
    request = {
        "id": 2,
        "op": "embed",
        "payload": {"image": image_payload(img), "modality": "image"},
    }
    vector = [float(v) for v in stub_embed_image(img)]
    response = {
        "id": 2,
        "ok": True,
        "result": {"modality": "image", "vector": vector},
    }
    return {
        "name": "embed_solid_red_8x8",
        "request_hex": encode_frame(request).hex(),
        "response_hex": encode_frame(response).hex(),
    }


def main() -> None:
    outdir = Path(__file__).resolve().parent.parent / "fixtures" / "gateway_v1"
    outdir.mkdir(parents=True, exist_ok=True)
    for fixture in (denoise_echo_fixture(), embed_solid_fixture()):
        path = outdir / f"{fixture['name']}.json"
        path.write_text(json.dumps(fixture, sort_keys=True, indent=2) + "\n",
                        encoding="utf-8")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
