"""Tuning configuration and validation.

``validate_config`` never raises on bad user input; it returns the full list
of problems so a config file can be fixed in one pass. Neither validation nor
planning touches the network or downloads models: the base model is a local
directory whose ``config.json`` carries the dimensions.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict

ADAPTED_PROJECTIONS = ("q_proj", "k_proj", "v_proj", "o_proj")
REQUIRED_EXAMPLE_KEYS = ("instruction", "input", "output")


@dataclass(frozen=True)
class ConfigIssue:
    kind: str  # "range" | "path" | "data"
    message: str
    line: int | None = None

    def __str__(self) -> str:
        where = f" (line {self.line})" if self.line is not None else ""
        return f"[{self.kind}] {self.message}{where}"


@dataclass(frozen=True)
class TuneConfig:
    base_model: str
    train_path: str
    output_dir: str
    adapter_rank: int = 16
    adapter_alpha: float = 32.0
    quantization_bits: int | None = 4
    epochs: int = 3
    learning_rate: float = 2e-4
    batch_size: int = 4
    dry_run: bool = True
    cpu_smoke: bool = False
    seed: int = 0
    checkpoint_every: int = 10

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "TuneConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in doc.items() if k in known})


def load_config(path: str) -> TuneConfig:
    with open(path, encoding="utf-8") as fh:
        return TuneConfig.from_json(json.load(fh))


def _check_ranges(config: TuneConfig) -> list[ConfigIssue]:
    issues = []
    if not 1 <= config.adapter_rank <= 256:
        issues.append(ConfigIssue("range", f"adapter_rank must be in 1..256, got {config.adapter_rank}"))
    if config.adapter_alpha <= 0:
        issues.append(ConfigIssue("range", f"adapter_alpha must be positive, got {config.adapter_alpha}"))
    if config.quantization_bits not in (4, 8, None):
        issues.append(
            ConfigIssue("range", f"quantization_bits must be 4, 8 or null, got {config.quantization_bits}")
        )
    if config.epochs < 1:
        issues.append(ConfigIssue("range", f"epochs must be positive, got {config.epochs}"))
    if not 0 < config.learning_rate < 1:
        issues.append(
            ConfigIssue("range", f"learning_rate must be in (0, 1), got {config.learning_rate}")
        )
    if config.batch_size < 1:
        issues.append(ConfigIssue("range", f"batch_size must be positive, got {config.batch_size}"))
    if config.checkpoint_every < 1:
        issues.append(ConfigIssue("range", f"checkpoint_every must be positive, got {config.checkpoint_every}"))
    return issues


def _check_paths(config: TuneConfig) -> list[ConfigIssue]:
    issues = []
    if not os.path.isfile(config.train_path):
        issues.append(ConfigIssue("path", f"train file not found: {config.train_path}"))
    model_config = os.path.join(config.base_model, "config.json")
    if not os.path.isfile(model_config):
        issues.append(ConfigIssue("path", f"base model metadata not found: {model_config}"))
    return issues


def _check_train_file(path: str) -> list[ConfigIssue]:
    issues = []
    count = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except ValueError:
                issues.append(ConfigIssue("data", "malformed JSON", line=lineno))
                continue
            if not isinstance(doc, dict):
                issues.append(ConfigIssue("data", "example is not an object", line=lineno))
                continue
            for key in REQUIRED_EXAMPLE_KEYS:
                if key not in doc or not isinstance(doc[key], str):
                    issues.append(ConfigIssue("data", f'missing string field "{key}"', line=lineno))
            count += 1
    if count == 0:
        issues.append(ConfigIssue("data", "train file holds no examples"))
    return issues


def validate_config(config: TuneConfig) -> list[ConfigIssue]:
    """All problems with the config, aggregated; an empty list means valid."""
    issues = _check_ranges(config)
    issues += _check_paths(config)
    if os.path.isfile(config.train_path):
        issues += _check_train_file(config.train_path)
    return issues


def load_examples(path: str) -> list[dict]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if line:
                examples.append(json.loads(line))
    return examples


def read_model_metadata(base_model: str) -> dict:
    path = os.path.join(base_model, "config.json")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, ValueError) as exc:
        raise RuntimeError(f"unreadable base-model metadata at {path}: {exc}") from None
    for key in ("vocab_size", "hidden_size", "num_hidden_layers", "num_attention_heads"):
        if key not in doc:
            raise RuntimeError(f"base-model metadata missing {key!r}")
    return doc
