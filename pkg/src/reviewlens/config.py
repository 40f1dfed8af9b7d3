"""Single pipeline configuration document: every stage's thresholds and the
prompt templates in one place, with strict unknown-key rejection.

The defaults encode the reference operating point: sentiment threshold 0.7,
matching (k=5, high 0.8, majority 0.3, average 0.5) and post-processing
thresholds 0.95/0.7/0.4.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from . import jsonl
from .datagen import PromptTemplates
from .embedding import (
    EmbeddingProvider,
    builtin_deterministic_provider,
    load_precomputed_provider,
)
from .errors import ConfigError
from .matching import MatchConfig
from .postprocess import PostConfig
from .segmentation import SegmenterConfig
from .sentiment import SentimentConfig
from .taxonomy import CleanConfig, ClusterConfig


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    embedder: str = "builtin:256:0"
    verbatim_sim_floor: float = 0.8
    augment: int = 0
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    sentiment: SentimentConfig = field(default_factory=SentimentConfig)
    match: MatchConfig = field(default_factory=MatchConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    clean: CleanConfig = field(default_factory=CleanConfig)
    post: PostConfig = field(default_factory=PostConfig)
    templates: PromptTemplates = field(default_factory=PromptTemplates)

    def __post_init__(self):
        if not 0 < self.verbatim_sim_floor <= 1:
            raise ConfigError(
                f"verbatim_sim_floor must be in (0, 1], got {self.verbatim_sim_floor}"
            )
        if self.augment < 0:
            raise ConfigError(f"augment must be >= 0, got {self.augment}")

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "seed": self.seed,
            "embedder": self.embedder,
            "verbatim_sim_floor": self.verbatim_sim_floor,
            "augment": self.augment,
        }
        for section in _SECTIONS:
            cfg = getattr(self, section)
            out[section] = {f.name: _plain(getattr(cfg, f.name)) for f in dataclasses.fields(cfg)}
        return out


def _plain(value):
    return list(value) if isinstance(value, tuple) else value


_SECTIONS: dict[str, type] = {
    "segmenter": SegmenterConfig,
    "sentiment": SentimentConfig,
    "match": MatchConfig,
    "cluster": ClusterConfig,
    "clean": CleanConfig,
    "post": PostConfig,
    "templates": PromptTemplates,
}

_SCALARS = ("seed", "embedder", "verbatim_sim_floor", "augment")


def _build_section(name: str, cls: type, raw: Any):
    if not isinstance(raw, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in config section {name!r}: {sorted(unknown)}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
    return cls(**kwargs)


def config_from_dict(raw: dict) -> PipelineConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    allowed = set(_SCALARS) | set(_SECTIONS)
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    kwargs: dict[str, Any] = {k: raw[k] for k in _SCALARS if k in raw}
    for name, cls in _SECTIONS.items():
        if name in raw:
            kwargs[name] = _build_section(name, cls, raw[name])
    return PipelineConfig(**kwargs)


def load_config(path: Optional[str | Path]) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    return config_from_dict(jsonl.read_json(path))


def provider_from_spec(
    spec: str, embeddings_path: Optional[str | Path] = None
) -> EmbeddingProvider:
    """--embeddings selects a precomputed table; otherwise parse the provider
    string "builtin:<dim>:<seed>"."""
    if embeddings_path is not None:
        return load_precomputed_provider(embeddings_path)
    parts = spec.split(":")
    if parts[0] == "builtin":
        try:
            dim = int(parts[1]) if len(parts) > 1 else 256
            seed = int(parts[2]) if len(parts) > 2 else 0
        except ValueError as exc:
            raise ConfigError(f"bad builtin embedder spec {spec!r}") from exc
        return builtin_deterministic_provider(dim=dim, seed=seed)
    raise ConfigError(f"unknown embedder spec {spec!r} (expected builtin:<dim>:<seed>)")
