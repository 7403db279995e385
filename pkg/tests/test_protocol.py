"""Framing, client behavior against live socket servers, fallback rules,
and the golden transcript fixtures."""

import json
import socket
import socketserver
import threading
from pathlib import Path

import numpy as np
import pytest

from semcom.errors import ProtocolError, ProviderUnavailable
from semcom.gateway import ProviderBinding, denoise_external
from semcom.channel import lmmse_denoise
from semcom.protocol import (MAX_FRAME_BYTES, FrameReader, GatewayClient,
                             canonical_json, decode_frame, encode_frame,
                             image_from_payload, image_payload,
                             read_frame_from_socket, symbols_from_payload,
                             symbols_payload)
from semcom.scene import RasterImage

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures" / "gateway_v1"


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        while True:
            try:
                request = read_frame_from_socket(self.connection)
            except (ProviderUnavailable, ProtocolError):
                return
            response = self.server.respond(request)  # type: ignore[attr-defined]
            if response is None:
                return
            self.connection.sendall(response)


class StubServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, respond):
        super().__init__(("127.0.0.1", 0), _Handler)
        self.respond = respond


@pytest.fixture
def serve():
    servers = []

    def _start(respond):
        server = StubServer(respond)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        servers.append(server)
        return f"127.0.0.1:{server.server_address[1]}"

    yield _start
    for server in servers:
        server.shutdown()
        server.server_close()


def echo_denoise(request):
    return encode_frame({"id": request["id"], "ok": True,
                         "result": {"symbols": request["payload"]["symbols"]}})


class TestFraming:
    def test_roundtrip(self):
        frame = encode_frame({"id": 1, "ok": True})
        reader = FrameReader()
        out = reader.feed(frame)
        assert out == [{"id": 1, "ok": True}]

    def test_partial_feeds(self):
        frame = encode_frame({"x": [1, 2, 3]})
        reader = FrameReader()
        assert reader.feed(frame[:3]) == []
        assert reader.feed(frame[3:7]) == []
        assert reader.feed(frame[7:]) == [{"x": [1, 2, 3]}]

    def test_oversized_declared_length(self):
        reader = FrameReader()
        with pytest.raises(ProtocolError):
            reader.feed((MAX_FRAME_BYTES + 1).to_bytes(4, "big"))

    def test_non_json_frame(self):
        with pytest.raises(ProtocolError):
            decode_frame(b"\xff\xfe not json")

    def test_canonical_is_sorted_and_compact(self):
        assert canonical_json({"b": 1, "a": [1, 2]}) == b'{"a":[1,2],"b":1}'


class TestPayloads:
    def test_image_roundtrip(self):
        arr = np.arange(48, dtype=np.uint8).reshape(4, 4, 3)
        img = RasterImage.from_array(arr)
        assert image_from_payload(image_payload(img)) == img

    def test_symbols_roundtrip(self):
        sym = np.array([0.5 + 1j, -2 - 0.25j])
        out = symbols_from_payload(symbols_payload(sym))
        assert np.allclose(out, sym)

    def test_bad_payloads(self):
        with pytest.raises(ProtocolError):
            image_from_payload({"width": 2, "height": 2})
        with pytest.raises(ProtocolError):
            symbols_from_payload({"re": [1.0], "im": [1.0, 2.0]})


class TestClient:
    def test_echo_provider(self, serve):
        endpoint = serve(echo_denoise)
        client = GatewayClient(endpoint, timeout=5.0)
        symbols = np.array([0.5 + 0.5j, -1.0 + 0.25j])
        result = client.request("denoise", {"symbols": symbols_payload(symbols),
                                            "snr_db": 10.0})
        assert np.allclose(symbols_from_payload(result["symbols"]), symbols)
        client.close()

    def test_unreachable_endpoint(self):
        client = GatewayClient("127.0.0.1:1", timeout=0.2)
        with pytest.raises(ProviderUnavailable):
            client.request("denoise", {})

    def test_error_response(self, serve):
        endpoint = serve(lambda req: encode_frame(
            {"id": req["id"], "ok": False,
             "error": {"code": "unsupported_op", "message": "nope"}}))
        client = GatewayClient(endpoint, timeout=5.0)
        with pytest.raises(ProviderUnavailable, match="unsupported_op"):
            client.request("extract", {})
        client.close()

    def test_malformed_response_is_typed(self, serve):
        endpoint = serve(lambda req: encode_frame(["not", "a", "dict"]))
        client = GatewayClient(endpoint, timeout=5.0)
        with pytest.raises(ProtocolError):
            client.request("embed", {})
        client.close()

    def test_mismatched_id_is_typed(self, serve):
        endpoint = serve(lambda req: encode_frame({"id": 999, "ok": True, "result": {}}))
        client = GatewayClient(endpoint, timeout=5.0)
        with pytest.raises(ProtocolError):
            client.request("embed", {})
        client.close()


class TestDenoiseExternal:
    def test_echo_identity(self, serve):
        endpoint = serve(echo_denoise)
        binding = ProviderBinding(kind="denoiser", mode="external", endpoint=endpoint)
        symbols = np.array([1 + 1j, 0.25 - 0.5j, -0.75 + 0j, 0 + 0.125j])
        out = denoise_external(symbols, 10.0, binding)
        assert np.allclose(out, symbols)

    def test_fallback_to_lmmse(self):
        binding = ProviderBinding(kind="denoiser", mode="external",
                                  endpoint="127.0.0.1:1", fallback=True)
        symbols = np.array([1 + 1j, -1 - 1j])
        out = denoise_external(symbols, 0.0, binding,
                               client=GatewayClient("127.0.0.1:1", timeout=0.2))
        assert np.allclose(out, lmmse_denoise(symbols, 0.0))

    def test_no_fallback_raises(self):
        binding = ProviderBinding(kind="denoiser", mode="external",
                                  endpoint="127.0.0.1:1", fallback=False)
        with pytest.raises(ProviderUnavailable):
            denoise_external(np.array([1 + 1j]), 0.0, binding,
                             client=GatewayClient("127.0.0.1:1", timeout=0.2))

    def test_external_binding_needs_endpoint(self):
        with pytest.raises(ProviderUnavailable):
            ProviderBinding(kind="denoiser", mode="external").validate()


class TestGoldenTranscripts:
    def test_denoise_fixture_request_bytes(self):
        doc = json.loads((FIXTURES / "denoise_echo_4sym.json").read_text())
        expected_request = bytes.fromhex(doc["request_hex"])
        symbols = np.array([0.5 + 0.125j, -0.25 + 0.75j, 1.0 - 1.0j, 0.0 + 0.5j])
        request = {"id": 1, "op": "denoise",
                   "payload": {"symbols": symbols_payload(symbols), "snr_db": 10.0,
                               "iterations": 4}}
        assert encode_frame(request) == expected_request

    def test_denoise_fixture_echo_response(self, serve):
        doc = json.loads((FIXTURES / "denoise_echo_4sym.json").read_text())
        endpoint = serve(echo_denoise)
        host, _, port = endpoint.rpartition(":")
        with socket.create_connection((host, int(port)), timeout=5.0) as sock:
            sock.sendall(bytes.fromhex(doc["request_hex"]))
            got = b""
            expected = bytes.fromhex(doc["response_hex"])
            while len(got) < len(expected):
                chunk = sock.recv(len(expected) - len(got))
                if not chunk:
                    break
                got += chunk
        assert got == expected

    def test_embed_fixture_matches_stub(self):
        from semcom.gateway import stub_embed_image
        doc = json.loads((FIXTURES / "embed_solid_red_8x8.json").read_text())
        request = decode_frame(bytes.fromhex(doc["request_hex"])[4:])
        img = image_from_payload(request["payload"]["image"])
        vector = [float(v) for v in stub_embed_image(img)]
        response = {"id": request["id"], "ok": True,
                    "result": {"modality": "image", "vector": vector}}
        assert encode_frame(response) == bytes.fromhex(doc["response_hex"])
