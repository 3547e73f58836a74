"""Effective run configuration: reward weights, embedder settings, thresholds.

Config files are flat TOML (or JSON) whose keys mirror :class:`RewardConfig`
fields plus the ``embedder*``, ``cue_threshold`` and keyword keys below.
``EMBEDDER_URL`` in the environment overrides ``embedder_url``.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .cct import DEFAULT_SCORE_THRESHOLD
from .embedder import DEFAULT_DIM, make_embedder
from .errors import ConfigError
from .parser import VerdictKeywords
from .reward import RewardConfig


@dataclass(frozen=True)
class CliConfig:
    reward: RewardConfig = field(default_factory=RewardConfig)
    embedder: str = "fallback"
    embedder_url: Optional[str] = None
    embedder_dim: int = DEFAULT_DIM
    embedder_timeout: float = 30.0
    embedder_batch_size: int = 32
    embedder_max_in_flight: int = 4
    cue_threshold: float = DEFAULT_SCORE_THRESHOLD
    forged_keywords: tuple[str, ...] = VerdictKeywords.forged
    authentic_keywords: tuple[str, ...] = VerdictKeywords.authentic

    def __post_init__(self):
        if self.embedder not in ("fallback", "remote"):
            raise ConfigError(f"embedder must be 'fallback' or 'remote', got {self.embedder!r}")
        if self.embedder_dim < 1:
            raise ConfigError("embedder_dim must be >= 1")
        if self.embedder_batch_size < 1 or self.embedder_max_in_flight < 1:
            raise ConfigError("embedder_batch_size and embedder_max_in_flight must be >= 1")
        if self.embedder_timeout <= 0:
            raise ConfigError("embedder_timeout must be positive")
        if not 0.0 <= self.cue_threshold <= 1.0:
            raise ConfigError("cue_threshold must lie in [0, 1]")
        object.__setattr__(self, "forged_keywords", tuple(self.forged_keywords))
        object.__setattr__(self, "authentic_keywords", tuple(self.authentic_keywords))

    @property
    def keywords(self) -> VerdictKeywords:
        return VerdictKeywords(self.forged_keywords, self.authentic_keywords)

    def to_dict(self) -> dict:
        d: dict[str, Any] = self.reward.to_dict()
        for f in fields(self):
            if f.name == "reward":
                continue
            v = getattr(self, f.name)
            d[f.name] = list(v) if isinstance(v, tuple) else v
        if self.embedder == "fallback":
            # Remote-only settings cannot change fallback results; keep them out of the hash.
            for k in ("embedder_url", "embedder_timeout", "embedder_batch_size", "embedder_max_in_flight"):
                d.pop(k)
        else:
            d.pop("embedder_dim")
        return d

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]

    def make_embedder(self):
        if self.embedder == "fallback":
            return make_embedder("fallback", dim=self.embedder_dim)
        return make_embedder(
            "remote",
            url=self.embedder_url,
            timeout=self.embedder_timeout,
            batch_size=self.embedder_batch_size,
            max_in_flight=self.embedder_max_in_flight,
        )


_CLI_KEYS = {f.name for f in fields(CliConfig)} - {"reward"}
_REWARD_KEYS = {f.name for f in fields(RewardConfig)}


def config_from_mapping(data: dict) -> CliConfig:
    unknown = set(data) - _CLI_KEYS - _REWARD_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    reward = RewardConfig.from_mapping({k: v for k, v in data.items() if k in _REWARD_KEYS})
    try:
        return CliConfig(reward=reward, **{k: v for k, v in data.items() if k in _CLI_KEYS})
    except TypeError as e:
        raise ConfigError(str(e)) from None


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> CliConfig:
    data: dict[str, Any] = {}
    if path:
        try:
            with open(path, "rb") as f:
                raw = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
        try:
            if path.endswith(".json"):
                data = json.loads(raw.decode("utf-8"))
            else:
                data = tomllib.loads(raw.decode("utf-8"))
        except (ValueError, UnicodeDecodeError) as e:
            raise ConfigError(f"cannot parse config {path}: {e}") from None
        if not isinstance(data, dict) or any(isinstance(v, dict) for v in data.values()):
            raise ConfigError("config must be a flat table of key = value pairs")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    cfg = config_from_mapping(data)
    env_url = os.environ.get("EMBEDDER_URL")
    if env_url:
        cfg = replace(cfg, embedder_url=env_url)
    return cfg
