"""Run configuration. Defaults reproduce the reference analysis settings."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigError


@dataclass
class PipelineConfig:
    # preprocessing
    top_n: int = 2000
    variance_ddof: int = 0
    # autoencoder
    latent_dim: int = 128
    dropout_p: float = 0.1
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    weight_decay_mode: str = "coupled_l2"
    batch_size: int = 256
    val_fraction: float = 0.15
    patience: int = 15
    max_epochs: int = 500
    ae_seed: int = 0
    # clustering / stability
    k_min: int = 2
    k_max: int = 10
    n_init: int = 10
    seed: int = 42
    runs: int = 20
    stability_n_init: int = 10
    reference_run: int = 0
    rare_threshold: float = 0.10
    stable_threshold: float = 0.60
    final_n_init: int = 30
    # explicit k for `de` / pan-cancer; None selects it from the data
    k: Optional[int] = None
    cluster: Optional[int] = None
    # differential expression / figures
    fdr_threshold: float = 0.05
    n_markers: int = 20
    volcano_fdr: float = 1e-8
    volcano_effect: float = 0.6
    class_name: Optional[str] = None

    def __post_init__(self):
        self.check()

    def check(self) -> None:
        if self.k_min < 2 or self.k_max < self.k_min:
            raise ConfigError(f"invalid k range [{self.k_min}, {self.k_max}]")
        if self.runs < 2:
            raise ConfigError("runs must be >= 2")
        if self.top_n < 1:
            raise ConfigError("top_n must be >= 1")
        if self.weight_decay_mode != "coupled_l2":
            raise ConfigError("only weight_decay_mode='coupled_l2' is implemented")
        if self.reference_run != 0:
            raise ConfigError("the reference labeling is always the first run")
        if self.variance_ddof not in (0, 1):
            raise ConfigError("variance_ddof must be 0 or 1")

    @property
    def k_range(self) -> range:
        return range(self.k_min, self.k_max + 1)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        try:
            d = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(d)

    def override(self, **kw) -> "PipelineConfig":
        d = self.to_dict()
        d.update({k: v for k, v in kw.items() if v is not None})
        return PipelineConfig.from_dict(d)
