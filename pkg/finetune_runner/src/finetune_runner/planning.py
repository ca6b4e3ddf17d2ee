"""Dry-run planning: counts and costs derived from metadata alone.

No torch import, no model construction; everything comes from the train JSONL
and the base model's ``config.json``.
"""

from __future__ import annotations

import hashlib
import math

from .config import ADAPTED_PROJECTIONS, TuneConfig, load_examples, read_model_metadata, validate_config


def adapter_parameter_count(rank: int, metadata: dict) -> int:
    """2 x rank x (sum of the adapted matrix's dimensions), summed over the
    attention projections of every layer."""
    hidden = metadata["hidden_size"]
    layers = metadata["num_hidden_layers"]
    per_matrix = 2 * rank * (hidden + hidden)
    return per_matrix * len(ADAPTED_PROJECTIONS) * layers


def base_parameter_count(metadata: dict) -> int:
    """Parameters of the tiny causal LM built from this metadata."""
    hidden = metadata["hidden_size"]
    layers = metadata["num_hidden_layers"]
    vocab = metadata["vocab_size"]
    intermediate = metadata.get("intermediate_size", 4 * hidden)
    positions = metadata.get("max_position_embeddings", 128)
    embed = vocab * hidden + positions * hidden
    per_layer = 4 * hidden * hidden + 2 * hidden * intermediate + 4 * hidden + intermediate
    head = hidden * vocab
    norms = 2 * hidden * layers + 2 * hidden
    return embed + per_layer * layers + head + norms


def data_hash(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def plan(config: TuneConfig) -> dict:
    """Validate, then report example/step counts, a byte-level token estimate,
    and the adapter parameter count. Performs no training and no downloads."""
    issues = validate_config(config)
    if issues:
        raise ValueError("invalid config: " + "; ".join(str(i) for i in issues))
    metadata = read_model_metadata(config.base_model)
    examples = load_examples(config.train_path)
    token_estimate = sum(
        len((e["instruction"] + "\n" + e["input"] + "\n" + e["output"]).encode("utf-8")) + 2
        for e in examples
    )
    steps_per_epoch = math.ceil(len(examples) / config.batch_size)
    return {
        "examples": len(examples),
        "token_estimate": token_estimate,
        "steps_per_epoch": steps_per_epoch,
        "steps": steps_per_epoch * config.epochs,
        "adapter_parameters": adapter_parameter_count(config.adapter_rank, metadata),
        "base_parameters": base_parameter_count(metadata),
        "adapted_projections": list(ADAPTED_PROJECTIONS),
        "quantization_bits": config.quantization_bits,
        "data_hash": data_hash(config.train_path),
    }
