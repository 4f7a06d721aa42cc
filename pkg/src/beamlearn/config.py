"""Run configuration and its flat ``key = value`` file format.

One key per :class:`RunConfig` field, ``#`` starts a comment, no sections
and no includes.  Unknown keys are rejected.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .data_collection import parse_strategy
from .errors import ConfigurationError
from .losses import LOSSES

__all__ = ["RunConfig", "load_config", "parse_config", "dump_config", "PRESETS", "apply_preset"]


@dataclass(frozen=True)
class RunConfig:
    # task
    task: str = "hmm"  # hmm | garden_path
    vocab_size: int = 6
    num_labels: int = 3
    length: int = 4
    noise: float = 0.0
    stickiness: float = 0.0
    data_path: str = ""  # JSONL dataset; overrides the generator when set
    # features
    feature_dim: int = 1024
    feature_seed: int = 0
    # learning
    loss: str = "upper_bound"
    strategy: str = "continue"
    k: int = 2
    optimizer: str = "ogd"
    init_scale: float = 0.01  # std of the seeded Gaussian initial parameters
    step_scale: float = 1.0
    adam_step: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    m: int = 200
    seed: int = 0
    valid_fraction: float = 0.2
    # diagnostics and output
    delta: float = 0.1
    score_clip: float = 1e6
    valid_every: int = 50
    regret_every: int = 0
    checkpoint_every: int = 0
    mixture_eval: bool = True
    record_wallclock: bool = False
    out: str = "runs/default"

    def __post_init__(self):
        if self.task not in ("hmm", "garden_path"):
            raise ConfigurationError(f"unknown task {self.task!r}; expected hmm or garden_path")
        if self.loss not in LOSSES:
            raise ConfigurationError(f"unknown loss {self.loss!r}; choose from {sorted(LOSSES)}")
        parse_strategy(self.strategy)
        if self.optimizer not in ("ogd", "adam"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}; expected ogd or adam")
        if self.k < 1:
            raise ConfigurationError(f"k must be >= 1, got {self.k}")
        if self.m < 1:
            raise ConfigurationError(f"m must be >= 1, got {self.m}")
        if self.num_labels < 2 or self.length < 1 or self.vocab_size < 1:
            raise ConfigurationError("need num_labels >= 2, length >= 1, vocab_size >= 1")
        if not 0 <= self.valid_fraction < 1:
            raise ConfigurationError("valid_fraction must lie in [0, 1)")
        if not 0 < self.delta <= 1:
            raise ConfigurationError("delta must lie in (0, 1]")
        if self.init_scale < 0:
            raise ConfigurationError("init_scale must be >= 0")
        if self.feature_dim < 1 or self.score_clip <= 0:
            raise ConfigurationError("feature_dim and score_clip must be positive")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str):
    kind = _TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
    except ValueError:
        raise ConfigurationError(f"bad value for {key}: {raw!r}") from None
    return raw


def parse_config(text: str, **overrides) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from None
    values = {}
    for key, raw in parser["run"].items():
        if key not in _TYPES:
            raise ConfigurationError(f"unknown config key {key!r}")
        values[key] = _convert(key, raw.strip())
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def load_config(path: str | Path, **overrides) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, **overrides)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
    return "\n".join(lines) + "\n"


# Named (strategy, loss, k) combinations covering known training schemes.
# ``None`` for k keeps the configured width.
PRESETS: dict[str, tuple[str, str, int | None]] = {
    "early_update": ("stop", "perceptron_first", None),
    "laso_perceptron": ("reset", "perceptron_first", None),
    "laso_margin": ("reset", "margin_last", None),
    "bso": ("reset", "cs_margin_last", None),
    "globally_normalized": ("stop", "log_beam", None),
    "log_likelihood": ("oracle", "log_neighbors", 1),
    "dagger": ("continue", "log_neighbors", 1),
    "ours": ("continue", "upper_bound", None),
}


def apply_preset(cfg: RunConfig, name: str) -> RunConfig:
    try:
        strategy, loss, k = PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    if k is None and cfg.k < 2:
        k = 2
    return cfg.replace(strategy=strategy, loss=loss, k=cfg.k if k is None else k)
