"""Service configuration: key=value file plus GUIYUN_* environment overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .errors import ConfigError
from .prosody import Strictness

ENV_PREFIX = "GUIYUN_"

_PATH_KEYS = ("corpus", "rhyme_book", "embeddings", "stopwords", "lm_path", "styles_dir")


@dataclass
class ServiceConfig:
    corpus: str = ""
    rhyme_book: str = ""            # empty = packaged fixture book
    embeddings: str = ""
    stopwords: str = ""             # empty = packaged default list
    ledger: str = "ledger.jsonl"
    styles_dir: str = ""
    lm_path: str = ""               # empty = train an n-gram on the corpus
    lm_order: int = 3
    strictness: Strictness = Strictness.RELAXED
    beam_width: int = 16
    host: str = "127.0.0.1"
    port: int = 8077
    cors_origins: tuple[str, ...] = ("*",)
    extras: dict = field(default_factory=dict)

    def validate_paths(self) -> None:
        """Configured input files must exist; the ledger is created lazily."""
        for key in _PATH_KEYS:
            value = getattr(self, key)
            if value and not Path(value).exists():
                raise ConfigError(f"{key} path does not exist: {value}")
        if not (0 < self.port < 65536):
            raise ConfigError(f"invalid port: {self.port}")
        if self.beam_width < 1:
            raise ConfigError("beam_width must be >= 1")


def _parse_kv(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {line_no}: expected key=value")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def load_config(path: str | Path | None = None, env: Mapping[str, str] | None = None) -> ServiceConfig:
    """Read the config file (if any), then apply environment overrides."""
    env = os.environ if env is None else env
    values: dict[str, str] = {}
    if path is None:
        path = env.get(ENV_PREFIX + "CONFIG", "")
    if path:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        values.update(_parse_kv(path.read_text(encoding="utf-8")))
    config = ServiceConfig()
    for key in vars(config):
        if key == "extras":
            continue
        override = env.get(ENV_PREFIX + key.upper())
        raw = override if override is not None else values.pop(key, None)
        if raw is None:
            continue
        current = getattr(config, key)
        try:
            if key == "strictness":
                setattr(config, key, Strictness.from_name(raw))
            elif key == "cors_origins":
                setattr(config, key, tuple(o.strip() for o in raw.split(",") if o.strip()))
            elif isinstance(current, int):
                setattr(config, key, int(raw))
            else:
                setattr(config, key, raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
    config.extras = values
    config.validate_paths()
    return config
