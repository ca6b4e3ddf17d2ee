from __future__ import annotations

import json

import pytest

from kginject.dataset import (
    PaperRecord,
    RecordError,
    Split,
    export_finetune,
    join_abstracts,
    load_records,
    make_split,
    normalize_doi,
    write_records,
)


def write_jsonl(path, docs):
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc) + "\n")


def test_load_records_basic(tmp_path):
    path = tmp_path / "r.jsonl"
    write_jsonl(path, [{"id": "a", "title": "A"}, {"id": "b", "title": "B", "bonus": 1}])
    records = load_records(path)
    assert [r.id for r in records] == ["a", "b"]


def test_load_records_duplicate_id(tmp_path):
    path = tmp_path / "r.jsonl"
    write_jsonl(path, [{"id": "a", "title": "A"}, {"id": "a", "title": "B"}])
    with pytest.raises(RecordError, match="'a'"):
        load_records(path)


def test_load_records_missing_title(tmp_path):
    path = tmp_path / "r.jsonl"
    write_jsonl(path, [{"id": "a"}])
    with pytest.raises(RecordError, match="title"):
        load_records(path)


def test_load_records_malformed_line(tmp_path):
    path = tmp_path / "r.jsonl"
    path.write_text('{"id": "a", "title": "A"}\n{oops\n', encoding="utf-8")
    with pytest.raises(RecordError, match="line 2"):
        load_records(path)


def test_records_roundtrip(tmp_path, records):
    path = tmp_path / "r.jsonl"
    write_records(records, path)
    assert load_records(path) == records


def test_join_abstracts_by_doi():
    rec = PaperRecord(id="a", title="T", doi="10.1/xyz")
    joined, stats = join_abstracts([rec], {"DOI:10.1/XYZ": "found it"})
    assert joined[0].abstract == "found it"
    assert stats.hits == 1 and stats.misses == 0


def test_join_abstracts_by_title_fallback():
    rec = PaperRecord(id="a", title="Deep Parsing Tricks")
    joined, stats = join_abstracts([rec], {"deep parsing tricks": "via title"})
    assert joined[0].abstract == "via title"
    assert stats.hits == 1


def test_join_abstracts_miss_keeps_record():
    rec = PaperRecord(id="a", title="T", abstract=None)
    joined, stats = join_abstracts([rec], {"other": "x"})
    assert joined[0] == rec
    assert stats.misses == 1


def test_normalize_doi():
    assert normalize_doi("https://doi.org/10.1/ABC") == "10.1/abc"
    assert normalize_doi("doi:10.1/abc ") == "10.1/abc"


def rf_records(n):
    return [
        PaperRecord(id=f"r{i:04d}", title=f"Paper {i}", gold_research_field=f"field {i % 7}")
        for i in range(n)
    ]


def lp_records(n):
    return [
        PaperRecord(id=f"l{i:04d}", title=f"Paper {i}", gold_predicates=(f"p{i % 5}", "q"))
        for i in range(n)
    ]


def test_make_split_table_sizes():
    split = make_split(rf_records(1994), "RF", test_size=100, seed=13)
    assert len(split.train) == 1894
    assert len(split.test) == 100
    split = make_split(lp_records(1840), "LP", test_size=100, seed=13)
    assert len(split.train) == 1740
    assert len(split.test) == 100


def test_make_split_no_leak_and_deterministic():
    records = rf_records(300)
    a = make_split(records, "RF", test_size=40, seed=5)
    b = make_split(records, "RF", test_size=40, seed=5)
    assert [r.id for r in a.train] == [r.id for r in b.train]
    assert [r.id for r in a.test] == [r.id for r in b.test]
    assert not {r.id for r in a.train} & {r.id for r in a.test}
    c = make_split(records, "RF", test_size=40, seed=6)
    assert [r.id for r in c.test] != [r.id for r in a.test]


def test_make_split_filters_unusable():
    records = rf_records(30) + [PaperRecord(id="x", title="no gold")]
    split = make_split(records, "RF", test_size=10, seed=1)
    assert len(split.train) + len(split.test) == 30


def test_make_split_test_size_zero():
    split = make_split(rf_records(12), "RF", test_size=0, seed=3)
    assert len(split.train) == 12 and split.test == ()


def test_make_split_insufficient():
    with pytest.raises(RecordError, match="usable"):
        make_split(rf_records(5), "RF", test_size=10, seed=0)


def test_export_task_driven_rf(tmp_path, records):
    split = make_split(records, "RF", test_size=2, seed=0)
    out = tmp_path / "ft.jsonl"
    count = export_finetune(split, "task_driven", out)
    lines = out.read_text(encoding="utf-8").splitlines()
    assert count == len(lines) == len(split.train)
    for line in lines:
        doc = json.loads(line)
        assert set(doc) == {"instruction", "input", "output"}
        assert doc["instruction"].startswith("Research_field_prediction")
    train_titles = {r.title for r in split.train}
    test_titles = {r.title for r in split.test}
    for line in lines:
        doc = json.loads(line)
        title = doc["input"].splitlines()[0][len("Title: ") :]
        assert title in train_titles
        assert title not in test_titles


def test_export_task_driven_lp_output_format(tmp_path):
    rec = PaperRecord(
        id="a", title="T", gold_predicates=("usesDataset", "hasContribution")
    )
    split = Split(train=(rec,), test=(), seed=0, task="LP")
    out = tmp_path / "ft.jsonl"
    export_finetune(split, "task_driven", out)
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["output"] == "usesDataset\nhasContribution"
    assert doc["instruction"].startswith("List_of_predicates_recommendation")


def test_export_task_independent(tmp_path, records):
    split = Split(train=tuple(records[:3]), test=(), seed=0, task="RF")
    out = tmp_path / "ft.jsonl"
    count = export_finetune(split, "task_independent", out)
    assert count == 3
    for line in out.read_text(encoding="utf-8").splitlines():
        doc = json.loads(line)
        assert "belongsToResearchField" in doc["output"]


def test_export_empty_train(tmp_path):
    split = Split(train=(), test=(), seed=0, task="RF")
    out = tmp_path / "ft.jsonl"
    assert export_finetune(split, "task_driven", out) == 0
    assert out.read_text(encoding="utf-8") == ""


def test_export_missing_instance_rejected(tmp_path):
    split = Split(
        train=(PaperRecord(id="a", title="T", gold_research_field="x"),),
        test=(),
        seed=0,
        task="RF",
    )
    with pytest.raises(RecordError, match="graphlet instance"):
        export_finetune(split, "task_independent", tmp_path / "ft.jsonl")


def test_export_idempotent_bytes(tmp_path, records):
    split = make_split(records, "LP", test_size=2, seed=4)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    export_finetune(split, "task_driven", a)
    export_finetune(split, "task_driven", b)
    assert a.read_bytes() == b.read_bytes()
