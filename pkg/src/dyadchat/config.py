"""Service configuration from a JSON file plus environment overrides."""

from __future__ import annotations

import dataclasses
import json
import os
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

from .interpret import ProviderConfig
from .recommend import Weights

_ENV_FIELDS: dict[str, tuple[str, type]] = {
    "DYADCHAT_DATA_DIR": ("data_dir", str),
    "DYADCHAT_HOST": ("host", str),
    "DYADCHAT_PORT": ("port", int),
    "DYADCHAT_EPHEMERAL_TTL": ("ephemeral_ttl", float),
    "DYADCHAT_LIBRARY": ("library_path", str),
    "DYADCHAT_CACHE": ("cache_path", str),
    "DYADCHAT_PROVIDER": ("provider_kind", str),
    "DYADCHAT_PROVIDER_ENDPOINT": ("provider_endpoint", str),
    "DYADCHAT_PROVIDER_TOKEN": ("provider_token", str),
    "DYADCHAT_W_TEXT": ("w_text", float),
    "DYADCHAT_W_CTX": ("w_ctx", float),
    "DYADCHAT_W_PREF": ("w_pref", float),
    "DYADCHAT_NOISE_AMPLITUDE": ("noise_amplitude", float),
}


@dataclass
class ServiceConfig:
    data_dir: str = "./dyadchat-data"
    host: str = "127.0.0.1"
    port: int = 8470
    ephemeral_ttl: float = 60.0
    library_path: str | None = None  # None -> packaged canonical library
    cache_path: str | None = None  # None -> <data_dir>/embeddings.jsonl
    provider_kind: str = "offline"
    provider_endpoint: str = ""
    provider_token: str = ""
    w_text: float = 1.0
    w_ctx: float = 1.0
    w_pref: float = 0.5
    noise_amplitude: float = 0.05

    @classmethod
    def load(
        cls, path: str | Path | None = None, env: Mapping[str, str] | None = None
    ) -> ServiceConfig:
        env = os.environ if env is None else env
        kwargs: dict = {}
        if path is not None:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
            if not isinstance(document, dict):
                raise ValueError("config file must hold a JSON object")
            names = {f.name for f in dataclasses.fields(cls)}
            unknown = sorted(set(document) - names)
            if unknown:
                raise ValueError(f"unknown config keys: {', '.join(unknown)}")
            kwargs.update(document)
        for var, (field_name, cast) in _ENV_FIELDS.items():
            raw = env.get(var)
            if raw is not None and raw != "":
                kwargs[field_name] = cast(raw)
        return cls(**kwargs)

    def weights(self) -> Weights:
        return Weights(self.w_text, self.w_ctx, self.w_pref, self.noise_amplitude)

    def provider_config(self) -> ProviderConfig:
        return ProviderConfig(
            provider_kind=self.provider_kind,
            endpoint=self.provider_endpoint,
            token=self.provider_token,
        )

    def resolved_cache_path(self) -> Path:
        if self.cache_path:
            return Path(self.cache_path)
        return Path(self.data_dir) / "embeddings.jsonl"
