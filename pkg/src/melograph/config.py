"""Pipeline configuration loaded from YAML."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .embed import G2V_DIM, G2V_EPOCHS, G2V_LR, G2V_NEGATIVES
from .segment import MIN_NOTES, W_ONSET, W_PITCH
from .wl import DEFAULT_H, MAX_H


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Graph2VecParams:
    dim: int = G2V_DIM
    epochs: int = G2V_EPOCHS
    lr: float = G2V_LR
    negatives: int = G2V_NEGATIVES


@dataclass(frozen=True)
class PipelineConfig:
    manifest: Path
    output: Path
    melody: str = "highest"
    w_pitch: float = W_PITCH
    w_onset: float = W_ONSET
    min_notes: int = MIN_NOTES
    normalize_dtw: bool = True
    dtw_chunk_size: int = 256
    k_min: int = 2
    k_max: int = 12
    k: int = 8
    h: int = DEFAULT_H
    graph2vec: Graph2VecParams = field(default_factory=Graph2VecParams)
    clusters: int | None = None  # None: one cluster per composer
    mds_pairs_per_tier: int = 4
    knn_k: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.melody not in ("highest", "lowest"):
            raise ConfigError(f"melody must be 'highest' or 'lowest', not {self.melody!r}")
        if not 1 <= self.k_min <= self.k_max:
            raise ConfigError(f"bad k range {self.k_min}..{self.k_max}")
        if not self.k_min <= self.k <= self.k_max:
            raise ConfigError(f"operating k={self.k} lies outside the sweep range {self.k_min}..{self.k_max}")
        if not 0 <= self.h <= MAX_H:
            raise ConfigError(f"h must be in [0, {MAX_H}]")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an explicit integer")
        if self.dtw_chunk_size < 1 or self.min_notes < 1 or self.knn_k < 1:
            raise ConfigError("chunk size, min_notes and knn_k must be positive")
        if self.clusters is not None and self.clusters < 1:
            raise ConfigError("clusters must be positive")

    @property
    def ks(self) -> list[int]:
        return list(range(self.k_min, self.k_max + 1))

    def subset(self, names) -> str:
        """Canonical JSON of the named settings, used for stage hashing."""
        data = asdict(self)
        return json.dumps({n: _plain(data[n]) for n in sorted(names)}, sort_keys=True)

    def digest(self, names) -> str:
        return hashlib.sha256(self.subset(names).encode()).hexdigest()


def _plain(value):
    if isinstance(value, Path):
        return str(value)
    return value


def load_config(path, **overrides) -> PipelineConfig:
    """Read a YAML config. Relative paths resolve against the config's directory."""
    path = Path(path)
    raw = yaml.safe_load(path.read_text()) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown settings {unknown}")
    for key in ("manifest", "output"):
        if key not in raw:
            raise ConfigError(f"{path}: missing required setting {key!r}")
        p = Path(raw[key])
        raw[key] = p if p.is_absolute() else (path.parent / p).resolve()
    g2v = raw.get("graph2vec") or {}
    g2v_known = {f.name for f in fields(Graph2VecParams)}
    if set(g2v) - g2v_known:
        raise ConfigError(f"{path}: unknown graph2vec settings {sorted(set(g2v) - g2v_known)}")
    raw["graph2vec"] = Graph2VecParams(**g2v)
    return PipelineConfig(**raw)


def write_config(config: PipelineConfig, path) -> None:
    data = asdict(config)
    data["manifest"] = str(config.manifest)
    data["output"] = str(config.output)
    Path(path).write_text(yaml.safe_dump(data, sort_keys=False))
