"""Gateway protocol v1: length-prefixed JSON frames over a byte stream.

Frame = 32-bit big-endian payload length + UTF-8 JSON. Requests carry
{id, op, scheme?, payload}; responses {id, ok, result | error{code, message}}.
The reference writer emits canonical JSON (sorted keys, no spaces) so
transcripts are byte-reproducible; readers accept any valid JSON.
"""

from __future__ import annotations

import base64
import json
import socket
import struct
from typing import Any

import numpy as np

from .errors import ProtocolError, ProviderUnavailable
from .scene import RasterImage

__all__ = ["MAX_FRAME_BYTES", "canonical_json", "encode_frame", "decode_frame",
           "FrameReader", "read_frame_from_socket", "GatewayClient",
           "image_payload", "image_from_payload", "symbols_payload",
           "symbols_from_payload"]

MAX_FRAME_BYTES = 16 * 1024 * 1024
_LEN = struct.Struct(">I")


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def encode_frame(obj: Any) -> bytes:
    payload = canonical_json(obj)
    if len(payload) > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {len(payload)} bytes exceeds the limit")
    return _LEN.pack(len(payload)) + payload


def decode_frame(payload: bytes) -> Any:
    try:
        return json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"frame is not valid JSON: {exc}") from exc


class FrameReader:
    """Incremental frame parser for stream transports."""

    def __init__(self, max_frame: int = MAX_FRAME_BYTES) -> None:
        self._buf = bytearray()
        self._max = max_frame

    def feed(self, data: bytes) -> list[Any]:
        self._buf.extend(data)
        out = []
        while True:
            if len(self._buf) < 4:
                return out
            (length,) = _LEN.unpack(self._buf[:4])
            if length > self._max:
                raise ProtocolError(f"declared frame length {length} exceeds the limit")
            if len(self._buf) < 4 + length:
                return out
            payload = bytes(self._buf[4 : 4 + length])
            del self._buf[: 4 + length]
            out.append(decode_frame(payload))


def _recv_exact(sock: socket.socket, count: int) -> bytes:
    chunks = []
    got = 0
    while got < count:
        chunk = sock.recv(count - got)
        if not chunk:
            raise ProviderUnavailable("connection closed mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame_from_socket(sock: socket.socket, max_frame: int = MAX_FRAME_BYTES) -> Any:
    header = _recv_exact(sock, 4)
    (length,) = _LEN.unpack(header)
    if length > max_frame:
        raise ProtocolError(f"declared frame length {length} exceeds the limit")
    return decode_frame(_recv_exact(sock, length))


class GatewayClient:
    """One connection, one in-flight request, responses matched by id."""

    def __init__(self, endpoint: str, timeout: float = 10.0) -> None:
        self.endpoint = endpoint
        self.timeout = timeout
        self._sock: socket.socket | None = None
        self._next_id = 1

    def _connect(self) -> socket.socket:
        if self._sock is not None:
            return self._sock
        host, _, port = self.endpoint.rpartition(":")
        try:
            sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=self.timeout)
        except (OSError, ValueError) as exc:
            raise ProviderUnavailable(f"cannot reach provider at {self.endpoint}: {exc}") from exc
        self._sock = sock
        return sock

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None

    def request(self, op: str, payload: Any, scheme: str | None = None) -> Any:
        req: dict[str, Any] = {"id": self._next_id, "op": op, "payload": payload}
        if scheme is not None:
            req["scheme"] = scheme
        self._next_id += 1
        sock = self._connect()
        try:
            sock.sendall(encode_frame(req))
            resp = read_frame_from_socket(sock)
        except socket.timeout as exc:
            self.close()
            raise ProviderUnavailable(f"provider {self.endpoint} timed out") from exc
        except OSError as exc:
            self.close()
            raise ProviderUnavailable(f"transport failure: {exc}") from exc

        if not isinstance(resp, dict) or "ok" not in resp or "id" not in resp:
            raise ProtocolError(f"response lacks required fields: {resp!r}")
        if resp["id"] != req["id"]:
            raise ProtocolError(f"response id {resp['id']} != request id {req['id']}")
        if not resp["ok"]:
            err = resp.get("error") or {}
            raise ProviderUnavailable(
                f"provider error {err.get('code', '?')}: {err.get('message', '')}")
        if "result" not in resp:
            raise ProtocolError("ok response without result")
        return resp["result"]


# --- payload converters ---------------------------------------------------------

def image_payload(img: RasterImage) -> dict:
    return {
        "width": img.width,
        "height": img.height,
        "rgb8_base64": base64.b64encode(img.pixels).decode("ascii"),
    }


def image_from_payload(doc: Any) -> RasterImage:
    try:
        pixels = base64.b64decode(doc["rgb8_base64"], validate=True)
        return RasterImage(width=int(doc["width"]), height=int(doc["height"]), pixels=pixels)
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"bad image payload: {exc}") from exc


def symbols_payload(symbols: np.ndarray) -> dict:
    symbols = np.asarray(symbols, dtype=np.complex128)
    return {"re": [float(v) for v in symbols.real], "im": [float(v) for v in symbols.imag]}


def symbols_from_payload(doc: Any) -> np.ndarray:
    try:
        re = np.asarray(doc["re"], dtype=np.float64)
        im = np.asarray(doc["im"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"bad symbols payload: {exc}") from exc
    if re.shape != im.shape or re.ndim != 1:
        raise ProtocolError("re/im must be equal-length flat lists")
    return re + 1j * im
