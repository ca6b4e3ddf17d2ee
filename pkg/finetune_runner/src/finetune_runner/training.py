"""The training loop: seeded, checkpointed, capped in smoke mode.

Artifacts land in ``output_dir``: adapter weights, ``manifest.json`` (config
echo, data hash, counts), and ``loss.csv`` with per-step and window-smoothed
loss. Interrupted runs resume from ``checkpoint.pt``.
"""

from __future__ import annotations

import csv
import json
import math
import os
import random

import torch

from .config import TuneConfig, load_examples, read_model_metadata, validate_config
from .modeling import EOS_ID, VOCAB_SIZE, attach_adapters, build_model, encode_example, quantize_weights_, trainable_parameters
from .planning import adapter_parameter_count, base_parameter_count, data_hash, plan

SMOKE_STEP_CAP = 50
SMOKE_PARAM_CAP = 1_000_000_000
SMOOTHING_WINDOW = 10


class CapabilityError(RuntimeError):
    """No accelerator and no explicit cpu-smoke opt-in."""


def smooth(losses: list[float], window: int = SMOOTHING_WINDOW) -> list[float]:
    out = []
    for i in range(len(losses)):
        lo = max(0, i - window + 1)
        out.append(sum(losses[lo : i + 1]) / (i + 1 - lo))
    return out


def _batches(examples: list[dict], config: TuneConfig, max_len: int, epoch: int):
    order = list(range(len(examples)))
    random.Random(config.seed * 100003 + epoch).shuffle(order)
    for start in range(0, len(order), config.batch_size):
        chunk = [encode_example(examples[i], max_len) for i in order[start : start + config.batch_size]]
        width = max(len(ids) for ids in chunk)
        batch = torch.full((len(chunk), width), EOS_ID, dtype=torch.long)
        mask = torch.zeros((len(chunk), width), dtype=torch.bool)
        for row, ids in enumerate(chunk):
            batch[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            mask[row, : len(ids)] = True
        yield batch, mask


def _loss_for(model, batch: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    logits = model(batch)[:, :-1]
    targets = batch[:, 1:]
    keep = mask[:, 1:]
    raw = torch.nn.functional.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), targets.reshape(-1), reduction="none"
    )
    return (raw * keep.reshape(-1)).sum() / keep.sum().clamp(min=1)


def _write_loss_csv(path: str, losses: list[float]) -> None:
    smoothed = smooth(losses)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss", "smoothed"])
        for i, (loss, s) in enumerate(zip(losses, smoothed), start=1):
            writer.writerow([i, f"{loss:.6f}", f"{s:.6f}"])


def train(config: TuneConfig, resume: bool = False) -> str:
    """Run (or resume) adapter tuning; returns the artifact directory."""
    issues = validate_config(config)
    if issues:
        raise ValueError("invalid config: " + "; ".join(str(i) for i in issues))
    if config.dry_run:
        raise ValueError("config has dry_run=true; use plan() or clear the flag")
    if not torch.cuda.is_available() and not config.cpu_smoke:
        raise CapabilityError(
            "no accelerator available; pass cpu_smoke=true for a capped desk-scale run"
        )

    metadata = read_model_metadata(config.base_model)
    run_plan = plan(config)
    total_steps = run_plan["steps"]
    capped = False
    if config.cpu_smoke:
        if run_plan["base_parameters"] > SMOKE_PARAM_CAP:
            raise CapabilityError(
                f"smoke mode is capped at {SMOKE_PARAM_CAP} base parameters, "
                f"model has {run_plan['base_parameters']}"
            )
        if total_steps > SMOKE_STEP_CAP:
            total_steps = SMOKE_STEP_CAP
            capped = True

    examples = load_examples(config.train_path)
    os.makedirs(config.output_dir, exist_ok=True)
    checkpoint_path = os.path.join(config.output_dir, "checkpoint.pt")

    torch.manual_seed(config.seed)
    model = build_model(config.base_model, metadata, config.seed)
    if config.quantization_bits is not None:
        quantize_weights_(model, config.quantization_bits)
    attach_adapters(model, config.adapter_rank, config.adapter_alpha, config.seed + 1)
    params = trainable_parameters(model)
    optimizer = torch.optim.AdamW(params, lr=config.learning_rate)

    step = 0
    losses: list[float] = []
    if resume and os.path.isfile(checkpoint_path):
        state = torch.load(checkpoint_path, map_location="cpu", weights_only=False)
        if state["data_hash"] != run_plan["data_hash"]:
            raise ValueError("checkpoint was written for different training data")
        model.load_state_dict(state["model"])
        optimizer.load_state_dict(state["optimizer"])
        torch.set_rng_state(state["torch_rng"])
        step = state["step"]
        losses = state["losses"]

    def save_checkpoint():
        torch.save(
            {
                "step": step,
                "losses": losses,
                "model": model.state_dict(),
                "optimizer": optimizer.state_dict(),
                "torch_rng": torch.get_rng_state(),
                "data_hash": run_plan["data_hash"],
            },
            checkpoint_path,
        )

    model.train()
    interrupted = False
    steps_per_epoch = run_plan["steps_per_epoch"]
    try:
        while step < total_steps:
            epoch = step // steps_per_epoch
            skip = step % steps_per_epoch  # mid-epoch resume
            for i, (batch, mask) in enumerate(_batches(examples, config, model.max_len, epoch)):
                if i < skip:
                    continue
                if step >= total_steps:
                    break
                optimizer.zero_grad()
                loss = _loss_for(model, batch, mask)
                loss.backward()
                optimizer.step()
                losses.append(float(loss.detach()))
                step += 1
                if step % config.checkpoint_every == 0:
                    save_checkpoint()
    except KeyboardInterrupt:
        interrupted = True
        save_checkpoint()
        raise
    finally:
        if not interrupted:
            save_checkpoint()
            _write_loss_csv(os.path.join(config.output_dir, "loss.csv"), losses)
            adapters = {
                name: tensor
                for name, tensor in model.state_dict().items()
                if "lora_" in name
            }
            torch.save(adapters, os.path.join(config.output_dir, "adapter.pt"))
            smoothed = smooth(losses)
            manifest = {
                "config": config.to_json(),
                "data_hash": run_plan["data_hash"],
                "examples": run_plan["examples"],
                "planned_steps": run_plan["steps"],
                "executed_steps": step,
                "smoke_capped": capped,
                "adapter_parameters": adapter_parameter_count(config.adapter_rank, metadata),
                "base_parameters": base_parameter_count(metadata),
                "final_loss": losses[-1] if losses else None,
                "final_smoothed_loss": smoothed[-1] if smoothed else None,
                "artifacts": {"adapter": "adapter.pt", "loss_curve": "loss.csv"},
            }
            with open(os.path.join(config.output_dir, "manifest.json"), "w", encoding="utf-8") as fh:
                json.dump(manifest, fh, indent=2, sort_keys=True)
                fh.write("\n")
    return config.output_dir
