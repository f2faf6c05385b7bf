"""Experiment configuration: TOML file, validated up front, with flag overrides."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .data import SYNTHETIC_KINDS, gen_synthetic, load_csv, windowize
from .hippo import DISCRETIZATIONS
from .models import DEFAULT_MLP_HIDDEN, MODEL_KINDS, DirectKanModel, HippoKanModel, HippoMlpModel
from .training import TrainConfig

OUT_ENV_VAR = "HIPPOKAN_OUT"


class ConfigError(ValueError):
    pass


@dataclass
class DataConfig:
    source: str = "synthetic"
    path: str | None = None
    column: str = "close"
    kind: str = "sine"
    length: int = 3000
    params: dict = field(default_factory=dict)
    seed: int = 0
    window: int = 120
    horizon: int = 1
    split: list = field(default_factory=lambda: [0.8, 0.1, 0.1])

    def __post_init__(self):
        if self.source not in ("synthetic", "csv"):
            raise ConfigError(f"data.source must be 'synthetic' or 'csv', got {self.source!r}")
        if self.source == "csv" and not self.path:
            raise ConfigError("data.path is required when data.source = 'csv'")
        if self.source == "synthetic" and self.kind not in SYNTHETIC_KINDS:
            raise ConfigError(f"data.kind must be one of {SYNTHETIC_KINDS}, got {self.kind!r}")
        if self.window < 1 or self.horizon < 1 or self.length < 1:
            raise ConfigError("data.window, data.horizon and data.length must be >= 1")


@dataclass
class ModelConfig:
    kind: str = "hippo_kan"
    state_dim: int = 16
    widths: list | None = None
    hidden: list = field(default_factory=lambda: list(DEFAULT_MLP_HIDDEN))
    intervals: int = 9
    order: int = 3
    grid_range: list = field(default_factory=lambda: [-2.0, 2.0])
    discretization: str = "bilinear"
    init_scale: float = 0.1

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"model.kind must be one of {MODEL_KINDS}, got {self.kind!r}")
        if self.discretization not in DISCRETIZATIONS:
            raise ConfigError(f"model.discretization must be one of {DISCRETIZATIONS}")
        if self.state_dim < 1 or self.intervals < 1 or self.order < 0:
            raise ConfigError("model.state_dim and model.intervals must be >= 1, model.order >= 0")
        if len(self.grid_range) != 2 or not self.grid_range[0] < self.grid_range[1]:
            raise ConfigError(f"model.grid_range must be [lo, hi] with lo < hi, got {self.grid_range}")


@dataclass
class ReconstructConfig:
    n_list: list = field(default_factory=lambda: [16, 32, 64, 128, 256])
    max_n: int = 256
    start: int = 0


@dataclass
class BenchConfig:
    windows: list = field(default_factory=lambda: [120, 500, 1200])
    models: list = field(default_factory=lambda: ["hippo_kan", "kan"])


@dataclass
class LagConfig:
    max_shift: int = 5


@dataclass
class ExperimentConfig:
    out: str = "runs/default"
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    reconstruct: ReconstructConfig = field(default_factory=ReconstructConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    lag: LagConfig = field(default_factory=LagConfig)

    @classmethod
    def from_dict(cls, raw: dict) -> ExperimentConfig:
        sections = {f.name: f for f in fields(cls)}
        unknown = set(raw) - set(sections)
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        kwargs = {}
        for name, value in raw.items():
            if name == "out":
                kwargs[name] = str(value)
                continue
            section_type = sections[name].default_factory
            if not isinstance(value, dict):
                raise ConfigError(f"[{name}] must be a table")
            allowed = {f.name for f in fields(section_type)}
            bad = set(value) - allowed
            if bad:
                raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")
            try:
                kwargs[name] = section_type(**value)
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"[{name}]: {exc}") from exc
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
        return cls.from_dict(raw)

    def with_overrides(self, seed: int | None = None, out: str | None = None, threads: int | None = None):
        """Apply the environment output override, then command-line flags (flags win)."""
        raw = self.to_dict()
        if os.environ.get(OUT_ENV_VAR):
            raw["out"] = os.environ[OUT_ENV_VAR]
        if out is not None:
            raw["out"] = out
        if seed is not None:
            raw["train"]["seed"] = seed
        if threads is not None:
            raw["train"]["threads"] = threads
        return ExperimentConfig.from_dict(raw)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def out_dir(self) -> Path:
        return Path(self.out)


def load_series(cfg: DataConfig):
    if cfg.source == "csv":
        return load_csv(cfg.path, cfg.column)
    return gen_synthetic(cfg.kind, cfg.length, cfg.params, cfg.seed)


def build_dataset(cfg: DataConfig):
    return windowize(load_series(cfg), cfg.window, cfg.horizon)


def build_model(cfg: ExperimentConfig, loss_mode: str | None = None, window: int | None = None):
    m = cfg.model
    loss_mode = loss_mode or cfg.train.loss_mode
    window = window or cfg.data.window
    seed = cfg.train.seed
    if m.kind == "hippo_kan":
        return HippoKanModel(
            m.state_dim, m.widths, m.intervals, m.order, tuple(m.grid_range), m.discretization, loss_mode, seed, m.init_scale
        )
    if m.kind == "hippo_mlp":
        return HippoMlpModel(m.state_dim, m.hidden, m.discretization, loss_mode, seed)
    widths = m.widths if m.widths is not None else [window, 1]
    return DirectKanModel(window, widths, m.intervals, m.order, tuple(m.grid_range), seed, m.init_scale, loss_mode)
