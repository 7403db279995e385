"""Echo-mode handler semantics against the documented stub definitions."""

import numpy as np
import pytest

from semcom_adapter import stubs
from semcom_adapter.config import AdapterConfig
from semcom_adapter.server import AdapterService


@pytest.fixture
def service():
    return AdapterService(AdapterConfig.from_json({"listen": "127.0.0.1:0"}))


def scene_doc():
    return {
        "width": 256, "height": 256, "background": 0,
        "objects": [
            {"class_id": 16, "x": 0.3, "y": 0.4, "w": 0.3, "h": 0.3,
             "color": 0, "identifier": 42},
        ],
    }


def run(service, op, payload, scheme=None, request_id=1):
    request = {"id": request_id, "op": op, "payload": payload}
    if scheme:
        request["scheme"] = scheme
    import json
    response = json.loads(service.handle(request)[4:])
    assert response["ok"], response
    return response["result"]


class TestExtract:
    def test_caption_from_scene(self, service):
        result = run(service, "extract", {"source": {"scene": scene_doc()}},
                     scheme="NI")
        assert result["prompt"]["caption"] == "a red dog on plain background"
        assert result["prompt"]["identifiers"] == [42]

    def test_boxes_from_scene(self, service):
        result = run(service, "extract", {"source": {"scene": scene_doc()}},
                     scheme="NA")
        box = result["prompt"]["boxes"][0]
        assert (box["class_id"], box["x"], box["w"]) == (16, 0.3, 0.3)

    def test_omit_color(self, service):
        result = run(service, "extract",
                     {"source": {"scene": scene_doc()},
                      "options": {"omit_color": True}}, scheme="NI")
        assert result["prompt"]["caption"] == "a dog on plain background"

    def test_extract_from_rendered_image(self, service):
        img = stubs.background_field(64, 64, 0)
        img[16:48, 16:48] = stubs.OBJECT_COLORS[3][1]
        result = run(service, "extract",
                     {"source": {"image": stubs.image_to_payload(img)}},
                     scheme="NI")
        assert result["prompt"]["caption"] == "a yellow motorcycle on plain background"


class TestReconstruct:
    def test_box_prompt_renders_exactly(self, service):
        prompt = {"variant": "LABELED_BOXES", "caption": "",
                  "boxes": [{"class_id": 16, "x": 0.25, "y": 0.25,
                             "w": 0.5, "h": 0.5}],
                  "identifiers": [42]}
        result = run(service, "reconstruct",
                     {"prompt": prompt, "kb": {"general": True, "history": {}},
                      "canvas": {"width": 64, "height": 64}}, scheme="NA")
        arr = stubs.image_from_payload(result["image"])
        assert tuple(arr[32, 32]) == stubs.OBJECT_COLORS[0][1]  # class default
        assert tuple(arr[4, 4]) == stubs.BACKGROUND_COLORS[0][1]

    def test_history_color_for_history_scheme(self, service):
        prompt = {"variant": "LABELED_BOXES", "caption": "",
                  "boxes": [{"class_id": 16, "x": 0.25, "y": 0.25,
                             "w": 0.5, "h": 0.5}],
                  "identifiers": [42]}
        kb = {"general": True, "history": {"42": {"color": 5, "class_id": 16}}}
        result = run(service, "reconstruct",
                     {"prompt": prompt, "kb": kb,
                      "canvas": {"width": 64, "height": 64}}, scheme="HA")
        arr = stubs.image_from_payload(result["image"])
        assert tuple(arr[32, 32]) == stubs.OBJECT_COLORS[5][1]

    def test_caption_prompt_uses_grid_layout(self, service):
        prompt = {"variant": "CAPTION",
                  "caption": "a red dog and a blue cat on sky background",
                  "boxes": [], "identifiers": []}
        result = run(service, "reconstruct",
                     {"prompt": prompt, "kb": {},
                      "canvas": {"width": 256, "height": 256}}, scheme="NI")
        arr = stubs.image_from_payload(result["image"])
        (x, y, w, h) = stubs.grid_layout(2)[0]
        cx, cy = int((x + w / 2) * 256), int((y + h / 2) * 256)
        assert tuple(arr[cy, cx]) == stubs.OBJECT_COLORS[0][1]

    def test_scheme_mismatch_is_bad_request(self, service):
        import json
        prompt = {"variant": "CAPTION", "caption": "a dog on plain background",
                  "boxes": [], "identifiers": []}
        response = json.loads(service.handle(
            {"id": 3, "op": "reconstruct",
             "scheme": "NA", "payload": {"prompt": prompt, "kb": {},
                                         "canvas": {}}})[4:])
        assert response["ok"] is False
        assert response["error"]["code"] == "bad_request"


class TestEmbedAndDenoise:
    def test_embed_unit_norm_and_shared_construction(self, service):
        img = stubs.background_field(64, 64, 0)
        img[8:40, 8:40] = stubs.OBJECT_COLORS[2][1]
        result = run(service, "embed",
                     {"image": stubs.image_to_payload(img), "modality": "image"})
        vec = np.asarray(result["vector"])
        assert vec.shape == (256,)
        assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-9)
        # text describing the same content embeds to the same direction
        text = run(service, "embed",
                   {"text": "a blue car on plain background", "modality": "text"})
        cos = float(vec @ np.asarray(text["vector"]))
        assert cos == pytest.approx(1.0, abs=1e-9)

    def test_denoise_echoes(self, service):
        result = run(service, "denoise",
                     {"symbols": {"re": [0.5, -1.0], "im": [0.25, 0.75]},
                      "snr_db": 10.0})
        assert result["symbols"] == {"re": [0.5, -1.0], "im": [0.25, 0.75]}


def test_statelessness_same_request_same_bytes(service):
    request = {"id": 11, "op": "embed",
               "payload": {"text": "a red dog on plain background",
                           "modality": "text"}}
    assert service.handle(dict(request)) == service.handle(dict(request))
