"""Threaded TCP service: one request in flight per connection, any number of
connections, model invocations serialized per device. Responses depend only
on the request content and the loaded weights (no per-connection state)."""

from __future__ import annotations

import socketserver
import threading
from typing import Any

import numpy as np

from . import stubs
from .config import AdapterConfig
from .models import ModelLoadError, TinyConvEmbedder, load_model
from .protocol import FramingError, error_response, ok_response, read_frame

_SCHEMES = ("NI", "NA", "HI", "HA")


class AdapterService:
    """Op dispatch over loaded models; `echo` ops use the documented stubs."""

    _REQUIRED_METHODS = {
        "embed": ("embed_image", "embed_text"),
        "denoise": ("denoise_symbols",),
        "extract": ("extract",),
        "reconstruct": ("reconstruct",),
    }

    def __init__(self, config: AdapterConfig) -> None:
        config.validate()
        self.config = config
        self.models: dict[str, Any] = {}
        for op, model_id in config.models.items():
            model = load_model(model_id, config.device)
            if model is not None:
                missing = [m for m in self._REQUIRED_METHODS[op]
                           if not hasattr(model, m)]
                if missing:
                    raise ModelLoadError(
                        f"model {model_id!r} cannot serve {op!r}: lacks {missing}")
            self.models[op] = model
        self._device_lock = threading.Lock()

    # each handler returns the result document or raises StubError/ValueError

    def handle(self, request: Any) -> bytes:
        if not isinstance(request, dict) or "op" not in request or "id" not in request:
            return error_response(0 if not isinstance(request, dict)
                                  else request.get("id", 0),
                                  "bad_request", "request needs id and op")
        request_id = request["id"]
        op = request["op"]
        payload = request.get("payload")
        if not isinstance(payload, dict):
            return error_response(request_id, "bad_request", "payload must be an object")
        handler = getattr(self, f"_op_{op}", None)
        if handler is None:
            return error_response(request_id, "unsupported_op", f"unknown op {op!r}")
        try:
            with self._device_lock:
                result = handler(payload, request.get("scheme"))
        except (stubs.StubError, ValueError, KeyError, TypeError) as exc:
            return error_response(request_id, "bad_request", str(exc))
        except ModelLoadError as exc:
            return error_response(request_id, "provider_error", str(exc))
        return ok_response(request_id, result)

    def _op_extract(self, payload: dict, scheme: str | None) -> dict:
        if scheme not in _SCHEMES:
            raise stubs.StubError(f"extract needs a scheme, got {scheme!r}")
        options = payload.get("options") or {}
        prompt = stubs.extract(payload.get("source") or {}, scheme,
                               bool(options.get("omit_color", False)))
        return {"prompt": prompt}

    def _op_reconstruct(self, payload: dict, scheme: str | None) -> dict:
        if scheme not in _SCHEMES:
            raise stubs.StubError(f"reconstruct needs a scheme, got {scheme!r}")
        img = stubs.reconstruct(payload.get("prompt") or {}, scheme,
                                payload.get("kb") or {},
                                payload.get("canvas") or {})
        return {"image": stubs.image_to_payload(img)}

    def _op_denoise(self, payload: dict, _scheme: str | None) -> dict:
        doc = payload.get("symbols") or {}
        re = np.asarray(doc.get("re", []), dtype=np.float64)
        im = np.asarray(doc.get("im", []), dtype=np.float64)
        if re.shape != im.shape or re.ndim != 1:
            raise stubs.StubError("symbols need equal-length re/im lists")
        model = self.models["denoise"]
        if model is None:
            # echo semantics: the identity denoiser returns the input unchanged
            out = re + 1j * im
        else:
            out = model.denoise_symbols(re + 1j * im,
                                        payload.get("snr_db"),
                                        payload.get("iterations"))
        return {"symbols": {"re": [float(v) for v in out.real],
                            "im": [float(v) for v in out.imag]}}

    def _op_embed(self, payload: dict, _scheme: str | None) -> dict:
        model = self.models["embed"]
        if "image" in payload:
            arr = stubs.image_from_payload(payload["image"])
            vector = (stubs.embed_image(arr) if model is None
                      else model.embed_image(arr))
            modality = "image"
        elif "text" in payload:
            text = payload.get("text")
            if not isinstance(text, str) or not text:
                raise stubs.StubError("text embed needs a nonempty string")
            vector = stubs.embed_text(text) if model is None else model.embed_text(text)
            modality = "text"
        else:
            raise stubs.StubError("embed needs an image or text field")
        return {"vector": [float(v) for v in vector], "modality": modality}


class _Handler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        service: AdapterService = self.server.service  # type: ignore[attr-defined]
        while True:
            try:
                request = read_frame(self.request,
                                     service.config.max_payload_bytes)
            except FramingError as exc:
                # stay open after a malformed frame, per the protocol doc
                try:
                    self.request.sendall(error_response(0, "bad_request", str(exc)))
                    continue
                except OSError:
                    return
            except OSError:
                return
            if request is None:
                return
            try:
                self.request.sendall(service.handle(request))
            except OSError:
                return


class AdapterServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, service: AdapterService):
        host, _, port = service.config.listen.rpartition(":")
        super().__init__((host or "127.0.0.1", int(port)), _Handler)
        self.service = service

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"


def serve_forever(config: AdapterConfig) -> None:
    service = AdapterService(config)
    server = AdapterServer(service)
    print(f"listening on {server.endpoint}", flush=True)
    try:
        server.serve_forever()
    finally:
        server.server_close()
