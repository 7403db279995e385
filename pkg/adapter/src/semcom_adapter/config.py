"""Adapter configuration.

Each enabled op maps to a model identifier: "echo" selects the deterministic
canned implementation; anything else is resolved through the model registry
at startup (so missing weights fail fast, before the listener opens).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

MIN_PAYLOAD_BYTES = 16 * 1024 * 1024
OPS = ("extract", "reconstruct", "denoise", "embed")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AdapterConfig:
    listen: str = "127.0.0.1:9901"
    models: dict[str, str] = field(default_factory=lambda: {op: "echo" for op in OPS})
    device: str = "cpu"
    max_payload_bytes: int = MIN_PAYLOAD_BYTES

    def validate(self) -> None:
        if ":" not in self.listen:
            raise ConfigError(f"listen address {self.listen!r} needs host:port")
        for op, model_id in self.models.items():
            if op not in OPS:
                raise ConfigError(f"unknown op {op!r}")
            if not model_id:
                raise ConfigError(f"op {op!r} has no model identifier")
        if self.max_payload_bytes < MIN_PAYLOAD_BYTES:
            raise ConfigError(
                f"max_payload_bytes must be >= {MIN_PAYLOAD_BYTES} (16 MiB)")

    @classmethod
    def from_json(cls, doc: dict) -> "AdapterConfig":
        try:
            models = {op: "echo" for op in OPS}
            models.update({str(k): str(v) for k, v in doc.get("models", {}).items()})
            cfg = cls(listen=str(doc.get("listen", "127.0.0.1:9901")),
                      models=models,
                      device=str(doc.get("device", "cpu")),
                      max_payload_bytes=int(doc.get("max_payload_bytes",
                                                    MIN_PAYLOAD_BYTES)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad adapter config: {exc}") from exc
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str) -> "AdapterConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
        return cls.from_json(doc)
