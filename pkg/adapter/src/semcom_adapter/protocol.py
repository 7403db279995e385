"""Gateway protocol v1 framing, server side.

Frames are a 32-bit big-endian length plus UTF-8 JSON. Responses are
emitted in canonical form (sorted keys, compact separators) to stay
byte-compatible with the published transcripts.
"""

from __future__ import annotations

import json
import struct
from typing import Any

DEFAULT_MAX_PAYLOAD = 16 * 1024 * 1024
_LEN = struct.Struct(">I")


class FramingError(Exception):
    """Transport-level violation: bad length or undecodable JSON."""


def encode_frame(obj: Any) -> bytes:
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _LEN.pack(len(payload)) + payload


def read_frame(sock, max_payload: int = DEFAULT_MAX_PAYLOAD) -> Any | None:
    """One frame from a socket; None on clean EOF before a header."""
    header = _recv_exact(sock, 4)
    if header is None:
        return None
    (length,) = _LEN.unpack(header)
    if length > max_payload:
        raise FramingError(f"declared length {length} exceeds {max_payload}")
    body = _recv_exact(sock, length)
    if body is None:
        raise FramingError("connection closed mid-frame")
    try:
        return json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FramingError(f"frame is not valid JSON: {exc}") from exc


def _recv_exact(sock, count: int) -> bytes | None:
    """Exactly `count` bytes, or None if the peer closed first."""
    chunks = []
    got = 0
    while got < count:
        chunk = sock.recv(count - got)
        if not chunk:
            return None
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def ok_response(request_id: Any, result: Any) -> bytes:
    return encode_frame({"id": request_id, "ok": True, "result": result})


def error_response(request_id: Any, code: str, message: str) -> bytes:
    return encode_frame({"id": request_id, "ok": False,
                         "error": {"code": code, "message": message}})
