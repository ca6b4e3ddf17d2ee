from __future__ import annotations

import json

import pytest

TINY_METADATA = {
    "model_type": "tiny-causal-lm",
    "vocab_size": 258,
    "hidden_size": 64,
    "num_hidden_layers": 2,
    "num_attention_heads": 2,
    "intermediate_size": 128,
    "max_position_embeddings": 128,
}

FIELDS = ("machine learning", "databases", "statistics", "natural language processing")


def write_examples(path, count):
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(count):
            fh.write(
                json.dumps(
                    {
                        "instruction": "Research_field_prediction\nName the research field.",
                        "input": f"Title: Paper about topic {i % 4}",
                        "output": FIELDS[i % 4],
                    }
                )
                + "\n"
            )


@pytest.fixture()
def model_dir(tmp_path):
    d = tmp_path / "tiny-model"
    d.mkdir()
    (d / "config.json").write_text(json.dumps(TINY_METADATA), encoding="utf-8")
    return d


@pytest.fixture()
def train_file(tmp_path):
    path = tmp_path / "train.jsonl"
    write_examples(path, 20)
    return path
