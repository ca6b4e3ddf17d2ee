from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from kginject.dataset import PaperRecord
from kginject.evaluation import (
    CsvFormatError,
    EvaluationReport,
    MissingDimensionError,
    NoJsonError,
    RubricScore,
    ScoreRangeError,
    build_judge_prompt,
    build_report,
    dimensions_for,
    export_human_csv,
    import_human_csv,
    item_fraction,
    judge_items,
    mas,
    parse_judge,
    read_scores,
    render_table,
    write_scores,
    zero_score,
)
from kginject.llm import make_mock_completer
from kginject.tasks import Prediction, RunItem


def rf_score(item_id="i1", values=(3, 3, 3, 3), model="m", prefix="with", source="human"):
    dims = dict(zip(dimensions_for("RF"), values))
    return RubricScore(item_id, "RF", dims, source, model, prefix)


def lp_score(item_id="i1", values=(3, 3, 3, 3, 3), model="m", prefix="with", source="human"):
    dims = dict(zip(dimensions_for("LP"), values))
    return RubricScore(item_id, "LP", dims, source, model, prefix)


# --- RubricScore invariants --------------------------------------------------

def test_rf_dimension_set_enforced():
    with pytest.raises(MissingDimensionError):
        RubricScore("i", "RF", {"clarity": 1}, "human")
    with pytest.raises(MissingDimensionError):
        RubricScore("i", "RF", dict(zip(dimensions_for("LP"), [1] * 5)), "human")


def test_score_range_enforced():
    with pytest.raises(ScoreRangeError):
        rf_score(values=(0, 1, 2, 4))
    with pytest.raises(ScoreRangeError):
        rf_score(values=(0, 1, 2, -1))


def test_dimension_order_normalized():
    dims = {"granularity": 1, "clarity": 2, "coverage": 3, "relevance": 0}
    s = RubricScore("i", "RF", dims, "human", "m", "with")
    assert tuple(s.dimensions) == dimensions_for("RF")


# --- judge prompt and parsing -------------------------------------------------

REC = PaperRecord(id="p1", title="T", abstract="A", gold_research_field="machine learning")


def test_build_judge_prompt_rf():
    pred = Prediction(task="RF", raw_text="ml", parse_ok=True, rf_label="ml")
    rp = build_judge_prompt("RF", REC, pred, "machine learning")
    user = rp.messages[1][1]
    assert '{"clarity": <0-3>, "coverage": <0-3>, "relevance": <0-3>, "granularity": <0-3>}' in user
    assert "context_recognition" not in user
    assert "machine learning" in user and "ml" in user


def test_build_judge_prompt_lp_has_fifth_dimension():
    pred = Prediction(task="LP", raw_text="x", parse_ok=True, lp_labels=("usesDataset",))
    rp = build_judge_prompt("LP", REC, pred, "usesDataset\nhasEvaluation")
    assert "context_recognition" in rp.messages[1][1]


def test_build_judge_prompt_rejects_unparsed():
    pred = Prediction(task="RF", raw_text="", parse_ok=False)
    with pytest.raises(ValueError):
        build_judge_prompt("RF", REC, pred, "x")


def test_parse_judge_valid_rf():
    s = parse_judge('{"clarity":3,"coverage":2,"relevance":3,"granularity":2}', "RF", "i1")
    assert s.dimensions == {"clarity": 3, "coverage": 2, "relevance": 3, "granularity": 2}


def test_parse_judge_out_of_range():
    with pytest.raises(ScoreRangeError):
        parse_judge('{"clarity":4,"coverage":2,"relevance":3,"granularity":2}', "RF")
    with pytest.raises(ScoreRangeError):
        parse_judge('{"clarity":true,"coverage":2,"relevance":3,"granularity":2}', "RF")


def test_parse_judge_missing_dimension():
    with pytest.raises(MissingDimensionError):
        parse_judge('{"clarity":3}', "RF")


def test_parse_judge_no_json():
    with pytest.raises(NoJsonError):
        parse_judge("the answer deserves a three", "RF")


def test_parse_judge_embedded_json():
    text = 'Sure! Scores: {"not": "this one"... {"clarity":1,"coverage":1,"relevance":1,"granularity":1} done'
    s = parse_judge(text, "RF")
    assert s.dimensions["clarity"] == 1


def test_judge_items_zero_path():
    items = [
        RunItem("a", "f1", "RF", Prediction(task="RF", raw_text="", parse_ok=False)),
        RunItem("b", None, "RF", None, error="boom"),
    ]
    records = {"a": REC, "b": REC}
    calls = []

    def completer(prompt):
        calls.append(prompt)
        raise AssertionError("judge should not be called")

    scores = judge_items(items, records, "RF", completer, model="m", prefix="with")
    assert len(scores) == 2
    assert all(set(s.dimensions.values()) == {0} for s in scores)
    assert not calls


def test_judge_items_scores_parseable(taxonomy):
    pred = Prediction(task="RF", raw_text="machine learning", parse_ok=True, rf_label="machine learning")
    items = [RunItem("a", "f1", "RF", pred)]
    completer = make_mock_completer(
        {"Grade the predicted research field": '{"clarity":3,"coverage":3,"relevance":2,"granularity":3}'}
    )
    scores = judge_items(items, {"a": REC}, "RF", completer, model="m", prefix="without")
    assert scores[0].dimensions["relevance"] == 2
    assert scores[0].source == "llm_judge"
    assert scores[0].prefix == "without"


# --- human CSV -----------------------------------------------------------------

CSV_HEADER = "item_id,model,task,prefix,clarity,coverage,relevance,granularity,context_recognition\n"


def test_import_human_csv_valid_rf(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text(CSV_HEADER + "i1,gemini,RF,with,3,2,1,0,\n", encoding="utf-8")
    scores = import_human_csv(path)
    assert len(scores) == 1
    assert scores[0].source == "human"
    assert scores[0].dimensions == {"clarity": 3, "coverage": 2, "relevance": 1, "granularity": 0}


def test_import_human_csv_rf_with_context_recognition_rejected(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text(CSV_HEADER + "i1,gemini,RF,with,3,2,1,0,2\n", encoding="utf-8")
    with pytest.raises(CsvFormatError, match="row 2"):
        import_human_csv(path)


def test_import_human_csv_lp_missing_context_recognition_rejected(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text(CSV_HEADER + "i1,gemini,LP,with,3,2,1,0,\n", encoding="utf-8")
    with pytest.raises(CsvFormatError, match="row 2"):
        import_human_csv(path)


def test_import_human_csv_header_mismatch(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("item_id,task\n", encoding="utf-8")
    with pytest.raises(CsvFormatError, match="header"):
        import_human_csv(path)


def test_import_human_csv_range_violation_with_row(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text(
        CSV_HEADER + "i1,g,RF,with,3,2,1,0,\ni2,g,RF,with,5,2,1,0,\n", encoding="utf-8"
    )
    with pytest.raises(CsvFormatError, match="row 3"):
        import_human_csv(path)


def test_human_csv_roundtrip(tmp_path):
    scores = [rf_score(f"i{k}", (k % 4, 3, 2, 1), model="m1") for k in range(6)]
    scores += [lp_score(f"j{k}", (1, 2, 3, k % 4, 2), model="m2", prefix="without") for k in range(6)]
    path = tmp_path / "h.csv"
    export_human_csv(scores, path)
    assert import_human_csv(path) == scores


def test_scores_jsonl_roundtrip(tmp_path):
    scores = [rf_score("a"), lp_score("b", source="llm_judge")]
    path = tmp_path / "s.jsonl"
    write_scores(scores, path)
    assert read_scores(path) == scores


# --- aggregation ---------------------------------------------------------------

def test_item_fraction_extremes():
    assert item_fraction(rf_score(values=(3, 3, 3, 3))) == 1
    assert item_fraction(rf_score(values=(0, 0, 0, 0))) == 0
    assert item_fraction(rf_score(values=(3, 2, 2, 3))) == Fraction(10, 12)


def test_item_fraction_monotone():
    base = rf_score(values=(1, 2, 0, 3))
    bumped = rf_score(values=(2, 2, 0, 3))
    assert item_fraction(bumped) > item_fraction(base)


def test_mas_arithmetic():
    assert mas([rf_score(values=(3, 3, 3, 3))]) == 100
    two = [rf_score("a", (3, 3, 3, 3)), rf_score("b", (3, 3, 0, 0))]
    assert mas(two) == 75


def test_mas_errors():
    with pytest.raises(ValueError):
        mas([])
    with pytest.raises(ValueError):
        mas([rf_score("a"), lp_score("b")])


@given(st.lists(st.tuples(*[st.integers(0, 3)] * 4), min_size=1, max_size=30), st.randoms())
def test_mas_permutation_invariant_and_bounded(rows, rnd):
    scores = [rf_score(f"i{k}", values) for k, values in enumerate(rows)]
    value = mas(scores)
    assert 0 <= value <= 100
    shuffled = list(scores)
    rnd.shuffle(shuffled)
    assert mas(shuffled) == value


def test_mas_rounds_half_up():
    # two items with fractions 1 and 0.5 -> 75; three with 0.5,0.5,0.75 -> 58.33 -> 58
    scores = [rf_score("a", (3, 3, 3, 3)), rf_score("b", (3, 3, 0, 0)), rf_score("c", (3, 3, 3, 0))]
    assert mas(scores) == 75  # (1 + 0.5 + 0.75)/3 = 0.75
    half = [rf_score("a", (3, 0, 0, 0)), rf_score("b", (3, 3, 0, 0))]
    # (0.25 + 0.5)/2 = 0.375 -> 37.5 -> rounds half up to 38
    assert mas(half) == 38


# --- report ---------------------------------------------------------------------

def group(model, count, frac_num, prefix="with", task="RF"):
    """count items whose mean fraction is frac_num/100."""
    full = round(count * frac_num / 100)
    make = rf_score if task == "RF" else lp_score
    top = (3, 3, 3, 3) if task == "RF" else (3, 3, 3, 3, 3)
    bottom = (0, 0, 0, 0) if task == "RF" else (0, 0, 0, 0, 0)
    out = [make(f"{model}-{k}", top, model=model, prefix=prefix) for k in range(full)]
    out += [make(f"{model}-z{k}", bottom, model=model, prefix=prefix) for k in range(count - full)]
    return out


def test_build_report_ordering():
    scores = []
    for model, pct in (("m-alpha", 61), ("m-beta", 80), ("m-gamma", 43), ("m-delta", 77)):
        scores.extend(group(model, 100, pct))
    report = build_report(scores)
    assert [r.mas for r in report.rows] == [80, 77, 61, 43]


def test_build_report_tie_breaks_by_model_name():
    scores = group("zeta", 50, 64) + group("alpha", 50, 64) + group("mid", 50, 64)
    report = build_report(scores)
    assert [r.model for r in report.rows] == ["alpha", "mid", "zeta"]
    assert {r.mas for r in report.rows} == {64}


def test_build_report_single_group():
    report = build_report(group("only", 10, 70))
    assert len(report.rows) == 1
    assert report.rows[0].mas == 70


def test_build_report_requires_metadata():
    bare = RubricScore("i", "RF", dict(zip(dimensions_for("RF"), (1, 1, 1, 1))), "human")
    with pytest.raises(ValueError, match="metadata"):
        build_report([bare])


def test_render_table_contains_note_and_rows():
    report = build_report(group("m1", 4, 75) + group("m2", 4, 50))
    text = render_table(report)
    assert "MAS" in text.splitlines()[0]
    assert "75%" in text and "50%" in text
    assert "half-up-rounded integer percentage" in text
    assert isinstance(report, EvaluationReport)


def test_zero_score_shape():
    z = zero_score("i", "LP")
    assert tuple(z.dimensions) == dimensions_for("LP")
    assert set(z.dimensions.values()) == {0}
