"""Tiny causal transformer with low-rank adapters and weight quantization.

The base model is built from a local ``config.json`` (optionally loading
``weights.pt`` from the same directory) and frozen; only the rank-decomposed
adapter matrices on the attention projections train. Quantization rounds the
frozen weights to symmetric int4/int8 grids per output channel, which is the
honest desk-scale stand-in for quantized checkpoints.
"""

from __future__ import annotations

import math
import os

import torch
from torch import nn

from .config import ADAPTED_PROJECTIONS

BOS_ID = 256
EOS_ID = 257
VOCAB_SIZE = 258  # bytes + BOS + EOS


def encode_example(example: dict, max_len: int) -> list[int]:
    text = example["instruction"] + "\n" + example["input"] + "\n" + example["output"]
    ids = [BOS_ID] + list(text.encode("utf-8"))[: max_len - 2] + [EOS_ID]
    return ids


class AdaptedLinear(nn.Module):
    """Frozen (optionally quantized) linear layer plus a trainable low-rank
    update: y = W x + (alpha/rank) * B A x."""

    def __init__(self, base: nn.Linear, rank: int, alpha: float, generator: torch.Generator):
        super().__init__()
        self.base = base
        for p in self.base.parameters():
            p.requires_grad_(False)
        out_features, in_features = base.weight.shape
        a = torch.empty(rank, in_features)
        a.normal_(mean=0.0, std=0.02, generator=generator)
        self.lora_a = nn.Parameter(a)
        self.lora_b = nn.Parameter(torch.zeros(out_features, rank))
        self.scale = alpha / rank

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + self.scale * (x @ self.lora_a.T @ self.lora_b.T)


def quantize_weights_(module: nn.Module, bits: int) -> None:
    """Round every linear weight to a symmetric int grid, per output channel."""
    qmax = 7 if bits == 4 else 127
    with torch.no_grad():
        for sub in module.modules():
            if isinstance(sub, nn.Linear):
                w = sub.weight
                scale = w.abs().amax(dim=1, keepdim=True).clamp(min=1e-8) / qmax
                sub.weight.copy_((w / scale).round().clamp(-qmax - 1, qmax) * scale)


class Block(nn.Module):
    def __init__(self, hidden: int, heads: int, intermediate: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(hidden)
        self.ln2 = nn.LayerNorm(hidden)
        self.heads = heads
        self.q_proj = nn.Linear(hidden, hidden, bias=False)
        self.k_proj = nn.Linear(hidden, hidden, bias=False)
        self.v_proj = nn.Linear(hidden, hidden, bias=False)
        self.o_proj = nn.Linear(hidden, hidden, bias=False)
        self.up = nn.Linear(hidden, intermediate)
        self.down = nn.Linear(intermediate, hidden)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        h = self.ln1(x)
        b, t, d = h.shape
        hd = d // self.heads

        def split(proj):
            return proj(h).view(b, t, self.heads, hd).transpose(1, 2)

        q, k, v = split(self.q_proj), split(self.k_proj), split(self.v_proj)
        att = (q @ k.transpose(-2, -1)) / math.sqrt(hd)
        att = att.masked_fill(mask, float("-inf")).softmax(dim=-1)
        ctx = (att @ v).transpose(1, 2).reshape(b, t, d)
        x = x + self.o_proj(ctx)
        h = self.ln2(x)
        return x + self.down(torch.nn.functional.gelu(self.up(h)))


class TinyCausalLM(nn.Module):
    def __init__(self, metadata: dict):
        super().__init__()
        hidden = metadata["hidden_size"]
        self.max_len = metadata.get("max_position_embeddings", 128)
        intermediate = metadata.get("intermediate_size", 4 * hidden)
        vocab = metadata["vocab_size"]
        self.tok = nn.Embedding(vocab, hidden)
        self.pos = nn.Embedding(self.max_len, hidden)
        self.blocks = nn.ModuleList(
            Block(hidden, metadata["num_attention_heads"], intermediate)
            for _ in range(metadata["num_hidden_layers"])
        )
        self.ln = nn.LayerNorm(hidden)
        self.head = nn.Linear(hidden, vocab, bias=False)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        b, t = ids.shape
        pos = torch.arange(t, device=ids.device)
        x = self.tok(ids) + self.pos(pos)[None]
        mask = torch.triu(torch.ones(t, t, dtype=torch.bool, device=ids.device), diagonal=1)
        for block in self.blocks:
            x = block(x, mask)
        return self.head(self.ln(x))


def build_model(base_model_dir: str, metadata: dict, seed: int) -> TinyCausalLM:
    """Base model from metadata: load ``weights.pt`` when present, otherwise a
    seeded random initialization (the desk-scale stand-in for a checkpoint)."""
    torch.manual_seed(seed)
    model = TinyCausalLM(metadata)
    weights = os.path.join(base_model_dir, "weights.pt")
    if os.path.isfile(weights):
        model.load_state_dict(torch.load(weights, map_location="cpu", weights_only=True))
    return model


def attach_adapters(model: TinyCausalLM, rank: int, alpha: float, seed: int) -> list[str]:
    """Freeze the base model and wrap the attention projections with adapters;
    returns the adapted module names."""
    for p in model.parameters():
        p.requires_grad_(False)
    generator = torch.Generator().manual_seed(seed)
    adapted = []
    for i, block in enumerate(model.blocks):
        for name in ADAPTED_PROJECTIONS:
            base = getattr(block, name)
            setattr(block, name, AdaptedLinear(base, rank, alpha, generator))
            adapted.append(f"blocks.{i}.{name}")
    return adapted


def trainable_parameters(model: nn.Module):
    return [p for p in model.parameters() if p.requires_grad]
