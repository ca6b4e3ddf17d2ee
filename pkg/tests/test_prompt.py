from __future__ import annotations

import pytest

from kginject import demo
from kginject.dataset import PaperRecord
from kginject.graphlet import GraphletInstance
from kginject.prompt import (
    PromptContext,
    PromptError,
    PromptSpec,
    Taxonomy,
    TaxonomyError,
    render,
    select_examples,
    serialize_graphlet,
    serialize_taxonomy,
    task_prefix,
)
from kginject.store import Term, parse_ntriples

EX = demo.EX

RECORD = PaperRecord(
    id="p1",
    title="A compact benchmark for long-context retrieval",
    abstract="We build a benchmark and evaluate baselines.",
)


# --- graphlet serialization -------------------------------------------------

def test_serialize_fixture_instance(paper1_instance):
    text = serialize_graphlet(paper1_instance)
    lines = text.splitlines()
    assert lines[0] == "paper1"
    assert any(line.strip().startswith("hasContribution:") for line in lines)
    assert "    belongsToResearchField: machine learning" in lines


def test_serialize_single_triple_instance():
    g = parse_ntriples(f'<{EX}paper1> <{EX}hasTitle> "T5 paper" .')
    inst = GraphletInstance(
        root=Term.iri(EX + "paper1"),
        triples=g.triples,
        graphlet=demo.SCHOLARLY_GRAPHLET,
    )
    assert serialize_graphlet(inst) == "paper1\n  hasTitle: T5 paper"


def test_serialize_deterministic(paper1_instance):
    assert serialize_graphlet(paper1_instance) == serialize_graphlet(paper1_instance)


def test_serialize_empty_instance_rejected():
    inst = GraphletInstance(
        root=Term.iri(EX + "paper1"), triples=frozenset(), graphlet=demo.SCHOLARLY_GRAPHLET
    )
    with pytest.raises(ValueError, match="empty instance"):
        serialize_graphlet(inst)


# --- taxonomy ----------------------------------------------------------------

def test_taxonomy_two_level():
    tax = Taxonomy({"a": ("Science", None), "b": ("Computer Science", "a")})
    assert serialize_taxonomy(tax) == "Science\n  Computer Science"


def test_taxonomy_empty():
    assert serialize_taxonomy(Taxonomy({})) == ""


def test_taxonomy_truncation(taxonomy):
    text = serialize_taxonomy(taxonomy, max_depth=2)
    lines = text.splitlines()
    assert "  Computer Science" in lines
    assert "    ..." in lines
    assert not any("Machine Learning" in line for line in lines)
    full = serialize_taxonomy(taxonomy, max_depth=3)
    assert "    Machine Learning" in full.splitlines()


def test_taxonomy_children_sorted_by_label(taxonomy):
    lines = serialize_taxonomy(taxonomy).splitlines()
    cs_children = [l.strip() for l in lines if l.startswith("    ")]
    assert cs_children == sorted(cs_children)


def test_taxonomy_cycle_rejected():
    with pytest.raises(TaxonomyError, match="cycle"):
        Taxonomy({"a": ("A", "b"), "b": ("B", "a")})


def test_taxonomy_unknown_parent_rejected():
    with pytest.raises(TaxonomyError, match="unknown parent"):
        Taxonomy({"a": ("A", "ghost")})


def test_taxonomy_label_matching(taxonomy):
    assert taxonomy.matches_label("machine learning")
    assert taxonomy.matches_label("  Machine-Learning ")
    assert not taxonomy.matches_label("alchemy")


# --- prefixes ----------------------------------------------------------------

def test_task_prefixes():
    assert task_prefix("RF") == "Research_field_prediction"
    assert task_prefix("LP") == "List_of_predicates_recommendation"
    with pytest.raises(ValueError):
        task_prefix("XX")


# --- rendering ---------------------------------------------------------------

def test_zero_shot_render_minimal():
    spec = PromptSpec(style="zero_shot", task="RF")
    rp = render(spec, RECORD)
    roles = [role for role, _ in rp.messages]
    assert roles == ["system", "user"]
    user = rp.messages[1][1]
    assert "Research_field_prediction" not in user
    assert "Worked examples" not in user
    assert "Structured description" not in user
    assert RECORD.title in user
    assert RECORD.abstract in user


def test_prefix_toggle_changes_exactly_one_line():
    base = PromptSpec(style="zero_shot", task="LP")
    on = PromptSpec(style="zero_shot", task="LP", prefix_enabled=True)
    plain = render(base, RECORD).messages[1][1]
    prefixed = render(on, RECORD).messages[1][1]
    assert prefixed.splitlines() == ["List_of_predicates_recommendation"] + plain.splitlines()


def test_render_determinism(taxonomy, paper1_instance):
    spec = PromptSpec(
        style="iqck_cot",
        task="RF",
        context=PromptContext(
            graphlet_text=serialize_graphlet(paper1_instance), taxonomy=taxonomy
        ),
    )
    assert render(spec, RECORD).fingerprint == render(spec, RECORD).fingerprint


def test_iqck_render_contains_blocks(taxonomy, paper1_instance):
    spec = PromptSpec(
        style="iqck_cot",
        task="RF",
        context=PromptContext(
            graphlet_text=serialize_graphlet(paper1_instance), taxonomy=taxonomy
        ),
    )
    user = render(spec, RECORD).messages[1][1]
    assert "Structured description of the paper" in user
    assert "Research field hierarchy" in user
    assert "machine learning" in user
    assert "Machine Learning" in user


def test_iqck_requires_context():
    with pytest.raises(ValueError):
        PromptSpec(style="iqck_cot", task="RF")


def test_iqck_rf_requires_taxonomy(paper1_instance):
    spec = PromptSpec(
        style="iqck_cot",
        task="RF",
        context=PromptContext(graphlet_text=serialize_graphlet(paper1_instance)),
    )
    with pytest.raises(PromptError, match="taxonomy"):
        render(spec, RECORD)


def test_iqck_uses_record_instance(taxonomy, records):
    spec = PromptSpec(
        style="iqck_cot", task="RF", context=PromptContext(taxonomy=taxonomy)
    )
    record = records[0]
    user = render(spec, record).messages[1][1]
    assert "Structured description of the paper" in user
    assert "belongsToResearchField" in user


def test_monotone_context_invariant(taxonomy, paper1_instance):
    zs_cot = PromptSpec(style="zero_shot_cot", task="RF")
    iqck = PromptSpec(
        style="iqck_cot",
        task="RF",
        context=PromptContext(
            graphlet_text=serialize_graphlet(paper1_instance), taxonomy=taxonomy
        ),
    )
    zs_user = render(zs_cot, RECORD).messages[1][1]
    iq_user = render(iqck, RECORD).messages[1][1]
    instruction = zs_user.splitlines()[0]
    assert instruction in iq_user
    assert "Let's think step by step." in zs_user
    assert "Let's think step by step." in iq_user


def test_cot_and_few_shot_differ_only_in_reasoning(records):
    examples = select_examples(records, "RF", count=3, seed=1)
    few = PromptSpec(style="few_shot", task="RF", few_shot_examples=examples)
    cot = PromptSpec(style="cot", task="RF", few_shot_examples=examples)
    few_user = render(few, RECORD).messages[1][1]
    cot_user = render(cot, RECORD).messages[1][1]
    few_lines = [l for l in few_user.splitlines()]
    cot_lines = [l for l in cot_user.splitlines() if not l.startswith("Reasoning: ")]
    assert few_lines == cot_lines
    assert any(l.startswith("Reasoning: ") for l in cot_user.splitlines())


def test_few_shot_requires_examples():
    with pytest.raises(ValueError):
        PromptSpec(style="few_shot", task="RF")


def test_record_without_title_rejected():
    spec = PromptSpec(style="zero_shot", task="RF")
    with pytest.raises(PromptError, match="title"):
        render(spec, PaperRecord(id="x", title=""))


def test_select_examples_deterministic(records):
    a = select_examples(records, "LP", count=3, seed=9)
    b = select_examples(records, "LP", count=3, seed=9)
    assert [r.id for r, _ in a] == [r.id for r, _ in b]
    for record, gold in a:
        assert gold == "\n".join(record.gold_predicates)
