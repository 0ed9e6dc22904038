"""Engine configuration and provider wiring."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from typing import Optional

from .extraction import AlternativesSuggester, FixtureSuggester, NullSuggester
from .grouping import (
    DEFAULT_DIMENSION,
    DEFAULT_THRESHOLD,
    EmbeddingProvider,
    HashedTrigramEmbedder,
    RemoteEmbedder,
)

EMBEDDING_ENDPOINT_ENV = "SENSETABLE_EMBEDDING_ENDPOINT"


@dataclass
class EngineConfig:
    similarity_threshold: float = DEFAULT_THRESHOLD
    visible_count: int = 15
    repeated_mention_threshold: int = 3
    idle_threshold_s: float = 120.0
    push_debounce_s: float = 2.0
    group_score_mode: str = "sum"  # "sum" | "max" over member attention
    embedding_endpoint: Optional[str] = None
    embedding_dimension: int = DEFAULT_DIMENSION
    suggester_fixture: Optional[str] = None
    store_dir: Optional[str] = None
    snapshot_every: int = 50

    @classmethod
    def from_file(cls, path: str) -> "EngineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})

    def with_env(self) -> "EngineConfig":
        endpoint = os.environ.get(EMBEDDING_ENDPOINT_ENV)
        if endpoint:
            return replace(self, embedding_endpoint=endpoint)
        return self

    def build_embedder(self) -> EmbeddingProvider:
        if self.embedding_endpoint:
            return RemoteEmbedder(self.embedding_endpoint, self.embedding_dimension)
        return HashedTrigramEmbedder(self.embedding_dimension)

    def build_suggester(self) -> AlternativesSuggester:
        if self.suggester_fixture:
            return FixtureSuggester.from_file(self.suggester_fixture)
        return NullSuggester()
