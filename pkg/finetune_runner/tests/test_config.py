from __future__ import annotations

import dataclasses
import json

from finetune_runner.config import TuneConfig, validate_config


def make_config(model_dir, train_file, **overrides) -> TuneConfig:
    base = dict(
        base_model=str(model_dir),
        train_path=str(train_file),
        output_dir="out",
        adapter_rank=8,
        adapter_alpha=16.0,
        quantization_bits=8,
        epochs=3,
        learning_rate=2e-4,
        batch_size=4,
    )
    base.update(overrides)
    return TuneConfig(**base)


def test_valid_config_passes(model_dir, train_file):
    assert validate_config(make_config(model_dir, train_file)) == []


def test_rank_zero_is_range_error(model_dir, train_file):
    issues = validate_config(make_config(model_dir, train_file, adapter_rank=0))
    assert [i.kind for i in issues] == ["range"]
    assert "adapter_rank" in issues[0].message


def test_rank_over_cap_is_range_error(model_dir, train_file):
    issues = validate_config(make_config(model_dir, train_file, adapter_rank=300))
    assert [i.kind for i in issues] == ["range"]


def test_learning_rate_out_of_interval(model_dir, train_file):
    issues = validate_config(make_config(model_dir, train_file, learning_rate=1.5))
    assert [i.kind for i in issues] == ["range"]
    assert "learning_rate" in issues[0].message


def test_missing_train_file_is_path_error(model_dir, tmp_path):
    issues = validate_config(make_config(model_dir, tmp_path / "ghost.jsonl"))
    assert [i.kind for i in issues] == ["path"]


def test_line_missing_output_is_data_error_with_line(model_dir, tmp_path):
    path = tmp_path / "train.jsonl"
    lines = [
        {"instruction": "a", "input": "b", "output": "c"},
        {"instruction": "a", "input": "b"},
    ]
    path.write_text("\n".join(json.dumps(l) for l in lines) + "\n", encoding="utf-8")
    issues = validate_config(make_config(model_dir, path))
    assert [i.kind for i in issues] == ["data"]
    assert issues[0].line == 2
    assert "output" in issues[0].message


def test_errors_aggregate(model_dir, tmp_path):
    config = make_config(model_dir, tmp_path / "ghost.jsonl", adapter_rank=0, epochs=0)
    kinds = sorted(i.kind for i in validate_config(config))
    assert kinds == ["path", "range", "range"]


def test_config_json_roundtrip(model_dir, train_file):
    config = make_config(model_dir, train_file)
    assert TuneConfig.from_json(config.to_json()) == config
    assert dataclasses.asdict(config)["quantization_bits"] == 8
