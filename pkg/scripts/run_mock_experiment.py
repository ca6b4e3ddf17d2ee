#!/usr/bin/env python3
"""Desk-scale end-to-end experiment against deterministic mock models.

Builds the demo dataset, splits it, exports fine-tune JSONL, runs both tasks
with and without the task-aware prefix for a handful of mock "models" of
different quality, judges every prediction with a deterministic mock judge,
and prints the MAS tables. Everything is seeded; rerunning reproduces the
same tables byte for byte.

Usage: python3 scripts/run_mock_experiment.py [--out-dir OUT] [--records N]
"""

from __future__ import annotations

import argparse
import hashlib
import json
import pathlib
import sys

from kginject import demo
from kginject.dataset import export_finetune, make_split, write_records
from kginject.evaluation import build_report, dimensions_for, judge_items, render_table, write_scores
from kginject.llm import LlmResponse, ModelConfig
from kginject.prompt import PromptContext, PromptSpec, gold_answer
from kginject.tasks import build_manifest, run_task, write_results


def _digest(*parts: str) -> int:
    return int(hashlib.sha256("::".join(parts).encode()).hexdigest()[:8], 16)


def mock_model(name: str, skill: int, records, task: str):
    """A fake model that answers the gold label with probability skill/10,
    otherwise something plausible-but-wrong; fully determined by the prompt."""
    by_title = {r.title: r for r in records}
    fields = sorted({r.gold_research_field for r in records})

    def completer(prompt) -> LlmResponse:
        text = prompt.text()
        record = next((r for t, r in by_title.items() if t in text), None)
        if record is None:
            return LlmResponse("UNKNOWN", name, 0.0, 1)
        roll = _digest(name, task, record.id) % 10
        gold = gold_answer(record, task)
        if roll < skill:
            answer = gold
        elif task == "RF":
            answer = fields[(fields.index(gold) + 1) % len(fields)]
        else:
            answer = "\n".join(list(record.gold_predicates)[:1] + ["hasUnrelatedProperty"])
        return LlmResponse(answer, name, 0.0, 1)

    return completer


def mock_judge(records_by_id):
    """Deterministic judge: perfect agreement with gold scores 3s, anything
    else gets hash-spread scores per dimension."""

    def completer(prompt) -> LlmResponse:
        text = prompt.text()
        task = "LP" if "context_recognition" in text else "RF"
        gold_block = text.split("Reference", 1)[1]
        predicted_block = text.split("Predicted", 1)[1]
        gold = gold_block.split(":\n", 1)[1].split("\n\n", 1)[0]
        predicted = predicted_block.split(":\n", 1)[1].split("\n\n", 1)[0]
        dims = {}
        for d in dimensions_for(task):
            if predicted.strip() == gold.strip():
                dims[d] = 3
            else:
                dims[d] = _digest(d, predicted, gold) % 3  # 0..2 for wrong answers
        return LlmResponse(json.dumps(dims), "mock-judge", 0.0, 1)

    return completer


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out-dir", default="out/mock_experiment")
    parser.add_argument("--records", type=int, default=40)
    parser.add_argument("--test-size", type=int, default=10)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    records = demo.demo_records(args.records)
    write_records(records, out / "records.jsonl")
    (out / "graph.nt").write_text(demo.SCHOLARLY_NT, encoding="utf-8")
    (out / "taxonomy.json").write_text(json.dumps(demo.TAXONOMY_JSON, indent=2), encoding="utf-8")

    taxonomy = demo.demo_taxonomy()
    models = (("mock-strong", 9), ("mock-mid", 6), ("mock-weak", 3))
    all_scores = []

    for task in ("RF", "LP"):
        split = make_split(records, task, test_size=args.test_size, seed=args.seed)
        for variant in ("task_independent", "task_driven"):
            path = out / f"finetune_{task.lower()}_{variant}.jsonl"
            count = export_finetune(split, variant, path)
            print(f"exported {count} {variant} examples for {task} -> {path}")

        for prefix_enabled in (False, True):
            prefix = "with" if prefix_enabled else "without"
            spec = PromptSpec(
                style="zero_shot",
                task=task,
                prefix_enabled=prefix_enabled,
                context=PromptContext(taxonomy=taxonomy),
            )
            config = ModelConfig(name="mock")
            for name, skill in models:
                completer = mock_model(name, skill, records, task)
                items = run_task(list(split.test), task, spec, config, completer=completer)
                tag = f"{task.lower()}_{prefix}_{name}"
                write_results(items, out / f"results_{tag}.jsonl")
                manifest = build_manifest(spec, config, items, seed=args.seed)
                (out / f"manifest_{tag}.json").write_text(
                    json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
                )
                by_id = {r.id: r for r in records}
                scores = judge_items(
                    items, by_id, task, mock_judge(by_id), model=name, prefix=prefix
                )
                all_scores.extend(scores)

    write_scores(all_scores, out / "scores.jsonl")
    report = build_report(all_scores)
    (out / "report.json").write_text(
        json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print()
    print(render_table(report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
