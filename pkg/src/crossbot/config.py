"""TOML-backed configuration for training runs and the pipeline CLI."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from importlib import resources
from typing import Optional

from .errors import ConfigError
from .synthetic import SyntheticSpec

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

DEFAULT_SEEDS = (42, 43, 44, 45, 46)


@dataclass
class TrainConfig:
    """Estimator hyperparameters plus the seed list for repeated runs."""

    hidden_dim: int = 512
    latent_dim: int = 256
    proj_dim: int = 128
    n_domains: int = 3
    lambda_cls: float = 1.0
    lambda_adv: float = 0.2
    lambda_con: float = 0.2
    grl_lambda_max: float = 1.0
    tau: float = 0.1
    batch_size: int = 8
    epochs: int = 5
    learning_rate: float = 1e-4
    weight_decay: float = 0.01
    validation_split: float = 0.2
    validation_mode: str = "source"  # "source" (held-out) or "target-split"
    encoder_dim: int = 4096
    dtype: str = "float32"
    seeds: tuple = DEFAULT_SEEDS

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError("tau must be > 0")
        for name in ("lambda_cls", "lambda_adv", "lambda_con", "grl_lambda_max"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0.0 < self.validation_split < 1.0:
            raise ConfigError("validation_split must be in (0, 1)")
        if self.validation_mode not in ("source", "target-split"):
            raise ConfigError("validation_mode must be 'source' or 'target-split'")
        self.seeds = tuple(int(s) for s in self.seeds)

    def estimator_kwargs(self, seed: Optional[int] = None) -> dict:
        return {
            "hidden_dim": self.hidden_dim,
            "latent_dim": self.latent_dim,
            "proj_dim": self.proj_dim,
            "n_domains": self.n_domains,
            "lambda_cls": self.lambda_cls,
            "lambda_adv": self.lambda_adv,
            "lambda_con": self.lambda_con,
            "grl_lambda_max": self.grl_lambda_max,
            "tau": self.tau,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "validation_split": self.validation_split,
            "dtype": self.dtype,
            "seed": self.seeds[0] if seed is None else seed,
        }

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["seeds"] = list(self.seeds)
        return doc


VARIANTS = ("metadata", "meta-summary")
SUMMARIZERS = ("llm", "fallback")
ENCODERS = ("hashing", "external")


@dataclass
class PipelineConfig:
    """End-to-end run settings: sources, variant, summarizer, encoder, output."""

    registry: str = ""
    variant: str = "meta-summary"
    summarizer: str = "fallback"
    encoder: str = "hashing"
    out_dir: str = "out"
    llm_endpoint: str = ""
    llm_model: str = ""
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        if self.summarizer not in SUMMARIZERS:
            raise ConfigError(f"summarizer must be one of {SUMMARIZERS}")
        if self.encoder not in ENCODERS:
            raise ConfigError(f"encoder must be one of {ENCODERS}")
        if self.variant == "meta-summary" and self.summarizer == "llm" and not self.llm_endpoint:
            raise ConfigError("meta-summary with the llm summarizer needs llm_endpoint")


def _read_toml(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def load_train_config(path=None, overrides: Optional[dict] = None) -> TrainConfig:
    doc = _read_toml(path).get("train", {}) if path else {}
    doc.update(overrides or {})
    try:
        return TrainConfig(**doc)
    except TypeError as exc:
        raise ConfigError(f"bad [train] key: {exc}") from exc


def load_pipeline_config(path, overrides: Optional[dict] = None) -> PipelineConfig:
    doc = _read_toml(path)
    pipeline = doc.get("pipeline", {})
    pipeline.update(overrides or {})
    train = doc.get("train", {})
    try:
        return PipelineConfig(train=TrainConfig(**train), **pipeline)
    except TypeError as exc:
        raise ConfigError(f"bad config key: {exc}") from exc


def load_benchmark(path=None):
    """The synthetic-benchmark spec plus its training config.

    With no path, loads the benchmark definition shipped in the package data.
    Returns (SyntheticSpec, TrainConfig).
    """
    if path is None:
        text = resources.files("crossbot.data").joinpath("benchmark.toml").read_text("utf-8")
        doc = tomllib.loads(text)
    else:
        doc = _read_toml(path)
    try:
        spec = SyntheticSpec(**doc.get("benchmark", {}))
        train = TrainConfig(**doc.get("train", {}))
    except TypeError as exc:
        raise ConfigError(f"bad benchmark config key: {exc}") from exc
    return spec, train
