"""Run configuration: defaults, JSON config files, and CLI overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import DataFormatError
from .keywords import LlmEndpoint
from .ranking import DEFAULT_STAGE_SIZES, DeterministicWeights
from .training import TrainConfig

KEYWORD_MODES = ("local", "llm")


@dataclass
class RunConfig:
    """Everything a pipeline run needs beyond its input paths."""

    weights: DeterministicWeights = field(default_factory=DeterministicWeights)
    stage_sizes: tuple[int, ...] = DEFAULT_STAGE_SIZES
    top_k: int = 50
    seed: int | None = None
    now: int | None = None
    keyword_mode: str = "local"
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    damping: float = 0.85
    pagerank_tol: float = 1e-8
    pagerank_max_iter: int = 100
    pagerank_weight: float = 0.1
    heatmap_top_n: int = 25
    llm_endpoint: LlmEndpoint | None = None
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        if self.keyword_mode not in KEYWORD_MODES:
            raise DataFormatError(f"keyword_mode must be one of {KEYWORD_MODES}")
        if self.top_k < 1:
            raise DataFormatError("top_k must be at least 1")


_SIMPLE_KEYS = {
    "stage_sizes",
    "top_k",
    "seed",
    "now",
    "keyword_mode",
    "bm25_k1",
    "bm25_b",
    "damping",
    "pagerank_tol",
    "pagerank_max_iter",
    "pagerank_weight",
    "heatmap_top_n",
}


def load_config(path: str | Path) -> RunConfig:
    """Parse a JSON config file mirroring RunConfig; unknown keys are fatal."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise DataFormatError(f"config root must be an object: {path}")

    known = _SIMPLE_KEYS | {"weights", "llm_endpoint", "train"}
    unknown = set(raw) - known
    if unknown:
        raise DataFormatError(f"unknown config key(s) in {path}: {sorted(unknown)}")

    kwargs: dict = {k: raw[k] for k in _SIMPLE_KEYS if k in raw}
    if "stage_sizes" in kwargs:
        kwargs["stage_sizes"] = tuple(int(s) for s in kwargs["stage_sizes"])
    if "weights" in raw:
        try:
            kwargs["weights"] = DeterministicWeights.from_mapping(raw["weights"])
        except (TypeError, ValueError) as exc:
            raise DataFormatError(f"bad weights block in {path}: {exc}") from exc
    if "llm_endpoint" in raw and raw["llm_endpoint"] is not None:
        try:
            kwargs["llm_endpoint"] = LlmEndpoint(**raw["llm_endpoint"])
        except TypeError as exc:
            raise DataFormatError(f"bad llm_endpoint block in {path}: {exc}") from exc
    if "train" in raw:
        try:
            block = dict(raw["train"])
            if "split" in block:
                block["split"] = tuple(float(f) for f in block["split"])
            kwargs["train"] = TrainConfig(**block)
        except (TypeError, ValueError) as exc:
            raise DataFormatError(f"bad train block in {path}: {exc}") from exc
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise DataFormatError(f"bad config {path}: {exc}") from exc


def load_weights(path: str | Path) -> DeterministicWeights:
    """Parse a standalone weights JSON file (the --weights override)."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return DeterministicWeights.from_mapping(raw)
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise DataFormatError(f"cannot read weights {path}: {exc}") from exc


def with_overrides(config: RunConfig, **overrides) -> RunConfig:
    """New config with the given non-None fields replaced."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **changes) if changes else config
