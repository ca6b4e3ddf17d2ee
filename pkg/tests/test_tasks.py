from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from kginject.llm import ModelConfig, make_mock_completer
from kginject.prompt import PromptContext, PromptSpec, gold_answer
from kginject.tasks import (
    Prediction,
    RunItem,
    build_manifest,
    parse_lp,
    parse_rf,
    read_results,
    run_task,
    write_results,
)

CONFIG = ModelConfig(name="mock")


# --- parse_rf ----------------------------------------------------------------

def test_parse_rf_clean_label(taxonomy):
    p = parse_rf("machine learning", taxonomy)
    assert p.parse_ok
    assert p.rf_label == "machine learning"
    assert p.taxonomy_match is True


def test_parse_rf_empty():
    p = parse_rf("")
    assert not p.parse_ok
    assert p.rf_label is None


def test_parse_rf_extra_prose_fails(taxonomy):
    p = parse_rf("Field: NLP\nBecause the abstract says so.", taxonomy)
    assert not p.parse_ok
    assert p.rf_label == "Field: NLP"


def test_parse_rf_strips_bullets(taxonomy):
    p = parse_rf("- Machine Learning\n", taxonomy)
    assert p.parse_ok
    assert p.rf_label == "Machine Learning"
    assert p.taxonomy_match is True


def test_parse_rf_no_taxonomy_match_flag(taxonomy):
    p = parse_rf("alchemy", taxonomy)
    assert p.parse_ok and p.taxonomy_match is False
    assert parse_rf("alchemy").taxonomy_match is None


# --- parse_lp ----------------------------------------------------------------

def test_parse_lp_multi():
    p = parse_lp("usesTrainingCorpus\nusesTokenization\nhasNumberofParameters")
    assert p.parse_ok
    assert p.lp_labels == ("usesTrainingCorpus", "usesTokenization", "hasNumberofParameters")


def test_parse_lp_casefold_dedup():
    p = parse_lp("- usesDataset\n- UsesDataset")
    assert p.lp_labels == ("usesDataset",)


def test_parse_lp_empty():
    p = parse_lp("")
    assert not p.parse_ok and p.lp_labels is None


def test_parse_lp_numbered():
    p = parse_lp("1. hasEvaluation\n2) usesDataset")
    assert p.lp_labels == ("hasEvaluation", "usesDataset")


@given(st.text(max_size=200))
def test_parsers_total(text):
    parse_rf(text)
    parse_lp(text)


@given(st.text(max_size=80))
def test_parse_rf_idempotent(text):
    p = parse_rf(text)
    if p.parse_ok:
        again = parse_rf(p.rf_label)
        assert again.parse_ok and again.rf_label == p.rf_label


@given(st.text(max_size=120))
def test_parse_lp_idempotent(text):
    p = parse_lp(text)
    if p.parse_ok:
        again = parse_lp("\n".join(p.lp_labels))
        assert again.lp_labels == p.lp_labels


# --- run_task ----------------------------------------------------------------

def echo_gold_completer(records, task):
    script = {}
    for r in records:
        script[r.title] = gold_answer(r, task)
    return make_mock_completer(script)


def test_run_task_echo_gold(records, taxonomy):
    two = records[:2]
    spec = PromptSpec(style="zero_shot", task="RF", context=PromptContext(taxonomy=taxonomy))
    items = run_task(two, "RF", spec, CONFIG, completer=echo_gold_completer(two, "RF"))
    assert [i.record_id for i in items] == [r.id for r in two]
    for item, record in zip(items, two):
        assert item.error is None
        assert item.prediction.parse_ok
        assert item.prediction.rf_label == record.gold_research_field


def test_run_task_isolation(records):
    two = records[:2]

    def completer(prompt):
        if two[0].title in prompt.text():
            raise RuntimeError("backend down")
        return make_mock_completer({two[1].title: "usesDataset"})(prompt)

    spec = PromptSpec(style="zero_shot", task="LP")
    items = run_task(two, "LP", spec, CONFIG, completer=completer)
    assert len(items) == 2
    assert items[0].error is not None and "backend down" in items[0].error
    assert items[0].prediction is None
    assert items[1].error is None


def test_run_task_spec_mismatch(records):
    spec = PromptSpec(style="zero_shot", task="RF")
    with pytest.raises(ValueError):
        run_task(records, "LP", spec, CONFIG, completer=lambda p: None)


def test_run_task_deterministic_and_results_roundtrip(tmp_path, records):
    spec = PromptSpec(style="zero_shot", task="LP")
    completer = echo_gold_completer(records, "LP")
    a = run_task(records, "LP", spec, CONFIG, completer=completer)
    b = run_task(records, "LP", spec, CONFIG, completer=completer)
    assert a == b
    path = tmp_path / "results.jsonl"
    write_results(a, path)
    assert read_results(path) == a
    manifest = build_manifest(spec, CONFIG, a, seed=7)
    assert manifest["task"] == "LP"
    assert manifest["seed"] == 7
    assert all("fingerprint" in item for item in manifest["items"])
    assert "user" in manifest["template_versions"]


def test_prediction_json_roundtrip():
    p = Prediction(task="LP", raw_text="a\nb", parse_ok=True, lp_labels=("a", "b"))
    assert Prediction.from_json(p.to_json()) == p
    item = RunItem("r1", "f" * 64, "LP", p, None)
    assert RunItem.from_json(item.to_json()) == item
