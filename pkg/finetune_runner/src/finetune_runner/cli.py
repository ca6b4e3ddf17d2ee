"""CLI: validate a tuning config, print a dry-run plan, or run training."""

from __future__ import annotations

import argparse
import json
import sys

from .config import TuneConfig, load_config, validate_config
from .planning import plan


def _config_from(args) -> TuneConfig:
    if args.config:
        config = load_config(args.config)
    else:
        config = TuneConfig(
            base_model=args.base_model,
            train_path=args.train,
            output_dir=args.output_dir,
        )
    overrides = {}
    for field in (
        "adapter_rank",
        "adapter_alpha",
        "quantization_bits",
        "epochs",
        "learning_rate",
        "batch_size",
        "seed",
    ):
        value = getattr(args, field, None)
        if value is not None:
            overrides[field] = value
    if getattr(args, "cpu_smoke", False):
        overrides["cpu_smoke"] = True
    if args.command == "train":
        overrides["dry_run"] = False
    if overrides:
        config = TuneConfig.from_json({**config.to_json(), **overrides})
    return config


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="JSON file with TuneConfig fields")
    p.add_argument("--base-model", default=None, help="local directory with config.json")
    p.add_argument("--train", default=None, help="instruction/input/output JSONL")
    p.add_argument("--output-dir", default="out/adapter")
    p.add_argument("--adapter-rank", type=int, default=None)
    p.add_argument("--adapter-alpha", type=float, default=None)
    p.add_argument("--quantization-bits", type=int, default=None, choices=(4, 8))
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="finetune-runner")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a config and its train file")
    _add_common(p)
    p.set_defaults(command="validate")

    p = sub.add_parser("plan", help="dry-run plan: counts, steps, adapter size")
    _add_common(p)
    p.set_defaults(command="plan")

    p = sub.add_parser("train", help="run adapter tuning (needs accelerator or --cpu-smoke)")
    _add_common(p)
    p.add_argument("--cpu-smoke", action="store_true",
                   help="explicit opt-in to a capped CPU run (<= 50 steps, <= 1B params)")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(command="train")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    if not args.config and (not args.base_model or not args.train):
        print("either --config or both --base-model and --train are required", file=sys.stderr)
        return 2

    config = _config_from(args)
    if args.command == "validate":
        issues = validate_config(config)
        for issue in issues:
            print(str(issue), file=sys.stderr)
        print(json.dumps({"valid": not issues, "issues": len(issues)}))
        return 0 if not issues else 1
    try:
        if args.command == "plan":
            print(json.dumps(plan(config), indent=2, sort_keys=True))
            return 0
        from .training import train  # import here: plan/validate stay torch-free

        artifact_dir = train(config, resume=args.resume)
        print(json.dumps({"artifacts": artifact_dir}))
        return 0
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
