"""Deterministic prompt construction for the two scholarly tasks.

Wording lives in versioned template files under ``templates/``; this module
only assembles them. Rendering is a pure function: equal inputs produce equal
bytes and therefore equal fingerprints.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass
from functools import cache, cached_property
from importlib import resources
from typing import TYPE_CHECKING

from .store import RDF_TYPE, RDFS_LABEL, Term, local_name, serialize_term, triple_sort_key

if TYPE_CHECKING:
    from .dataset import PaperRecord
    from .graphlet import GraphletInstance

STYLES = ("zero_shot", "few_shot", "cot", "zero_shot_cot", "iqck_cot")
TASKS = ("RF", "LP")

_TEMPLATES = resources.files(__package__) / "templates"


class PromptError(ValueError):
    """Missing context or record fields required by the requested style."""


class TaxonomyError(ValueError):
    """Malformed research-field hierarchy (broken parent links or cycles)."""


class TemplateError(KeyError):
    """Template references a placeholder the caller did not supply."""


@cache
def load_template(name: str) -> str:
    return (_TEMPLATES / f"{name}.txt").read_text(encoding="utf-8").rstrip("\n")


@cache
def template_versions() -> tuple[tuple[str, str], ...]:
    """(template name, sha256 of file bytes) pairs; pinned into run manifests."""
    out = []
    for entry in sorted(_TEMPLATES.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".txt"):
            out.append((entry.name[:-4], hashlib.sha256(entry.read_bytes()).hexdigest()))
    return tuple(out)


def fill(template: str, values: dict[str, str]) -> str:
    def sub(m: re.Match) -> str:
        key = m.group(1)
        if key not in values:
            raise TemplateError(f"no value supplied for placeholder {{{{{key}}}}}")
        return values[key]

    return re.sub(r"\{\{(\w+)\}\}", sub, template)


def task_prefix(task: str) -> str:
    if task == "RF":
        return "Research_field_prediction"
    if task == "LP":
        return "List_of_predicates_recommendation"
    raise ValueError(f"unknown task {task!r}")


# ---------------------------------------------------------------------------
# research-field taxonomy

@dataclass(frozen=True)
class Taxonomy:
    """A forest of research fields: id -> (label, parent id or None)."""

    nodes: dict[str, tuple[str, str | None]]

    def __post_init__(self):
        for node_id, (_, parent) in self.nodes.items():
            if parent is not None and parent not in self.nodes:
                raise TaxonomyError(f"node {node_id!r} references unknown parent {parent!r}")
        for node_id in self.nodes:
            seen = {node_id}
            cur = self.nodes[node_id][1]
            while cur is not None:
                if cur in seen:
                    raise TaxonomyError(f"cycle detected through node {cur!r}")
                seen.add(cur)
                cur = self.nodes[cur][1]

    @property
    def roots(self) -> tuple[str, ...]:
        ids = [i for i, (_, parent) in self.nodes.items() if parent is None]
        return tuple(sorted(ids, key=lambda i: (self.nodes[i][0], i)))

    def children(self, node_id: str) -> tuple[str, ...]:
        kids = [i for i, (_, parent) in self.nodes.items() if parent == node_id]
        return tuple(sorted(kids, key=lambda i: (self.nodes[i][0], i)))

    def label(self, node_id: str) -> str:
        return self.nodes[node_id][0]

    @cached_property
    def _normalized_labels(self) -> frozenset[str]:
        return frozenset(_normalize_label(label) for label, _ in self.nodes.values())

    def matches_label(self, text: str) -> bool:
        return _normalize_label(text) in self._normalized_labels

    @classmethod
    def from_json(cls, doc: dict) -> "Taxonomy":
        nodes = {}
        for f in doc.get("fields", ()):
            nodes[f["id"]] = (f["label"], f.get("parent"))
        return cls(nodes)

    def to_json(self) -> dict:
        fields = [
            {"id": i, "label": label, "parent": parent}
            for i, (label, parent) in sorted(self.nodes.items())
        ]
        return {"fields": fields}


def _normalize_label(text: str) -> str:
    return re.sub(r"\s+", " ", re.sub(r"[^\w\s]", " ", text)).strip().casefold()


def load_taxonomy(path) -> Taxonomy:
    with open(path, encoding="utf-8") as fh:
        return Taxonomy.from_json(json.load(fh))


def serialize_taxonomy(taxonomy: Taxonomy, max_depth: int = 3) -> str:
    """Indented tree, children sorted by label; levels below ``max_depth`` are
    replaced by a single ``...`` marker line per truncated parent."""
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    lines: list[str] = []
    seen: set[str] = set()

    def walk(node_id: str, depth: int):
        if node_id in seen:
            raise TaxonomyError(f"cycle detected through node {node_id!r}")
        seen.add(node_id)
        lines.append("  " * (depth - 1) + taxonomy.label(node_id))
        kids = taxonomy.children(node_id)
        if not kids:
            return
        if depth >= max_depth:
            lines.append("  " * depth + "...")
            return
        for kid in kids:
            walk(kid, depth + 1)

    for root in taxonomy.roots:
        walk(root, 1)
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# graphlet serialization

def serialize_graphlet(
    instance: "GraphletInstance",
    rdf_type: str = RDF_TYPE,
    label_predicate: str = RDFS_LABEL,
) -> str:
    """Indented outline of a rooted instance: the root line, then nested
    ``property: value`` lines per entity in the store's deterministic order.
    Values show their label when the instance carries one, IRI local names
    otherwise."""
    if not instance.triples:
        raise ValueError("empty instance")

    labels: dict[Term, str] = {}
    out_edges: dict[Term, list] = {}
    for t in sorted(instance.triples, key=triple_sort_key):
        pred = t.predicate.value
        if pred == label_predicate and t.object.kind == "literal":
            labels.setdefault(t.subject, t.object.value)
        if pred == label_predicate or pred == rdf_type:
            continue
        out_edges.setdefault(t.subject, []).append(t)

    def display(term: Term) -> str:
        if term.kind == "literal":
            return term.value
        if term in labels:
            return labels[term]
        if term.kind == "iri":
            return local_name(term.value)
        return "_:" + term.value

    lines: list[str] = []
    walked: set[Term] = set()

    def walk(entity: Term, depth: int):
        for t in out_edges.get(entity, ()):
            lines.append("  " * depth + f"{local_name(t.predicate.value)}: {display(t.object)}")
            if t.object.kind != "literal" and t.object not in walked and t.object in out_edges:
                walked.add(t.object)
                walk(t.object, depth + 1)

    lines.append(display(instance.root))
    walked.add(instance.root)
    walk(instance.root, 1)
    for entity in sorted(out_edges, key=serialize_term):
        if entity not in walked:
            walked.add(entity)
            lines.append(display(entity))
            walk(entity, 1)
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# prompt specs and rendering

@dataclass(frozen=True)
class PromptContext:
    graphlet_text: str | None = None
    taxonomy: Taxonomy | None = None
    abstract: str | None = None


@dataclass(frozen=True)
class PromptSpec:
    style: str
    task: str
    prefix_enabled: bool = False
    few_shot_examples: tuple[tuple["PaperRecord", str], ...] = ()
    context: PromptContext | None = None

    def __post_init__(self):
        if self.style not in STYLES:
            raise ValueError(f"unknown style {self.style!r}")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.style in ("few_shot", "cot") and not self.few_shot_examples:
            raise ValueError(f"style {self.style} requires worked examples")
        if self.style == "iqck_cot" and self.context is None:
            raise ValueError("style iqck_cot requires context")


@dataclass(frozen=True)
class RenderedPrompt:
    messages: tuple[tuple[str, str], ...]

    @cached_property
    def fingerprint(self) -> str:
        canonical = json.dumps(
            [[role, content] for role, content in self.messages],
            ensure_ascii=False,
            separators=(",", ":"),
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def text(self) -> str:
        """All message contents joined; handy for substring checks and mocks."""
        return "\n".join(content for _, content in self.messages)


def format_rendered(rp: RenderedPrompt) -> str:
    blocks = [f"== {role} ==\n{content}" for role, content in rp.messages]
    return "\n".join(blocks) + "\n"


def _examples_block(spec: PromptSpec) -> str:
    reasoned = spec.style in ("cot", "iqck_cot")
    rendered = []
    for record, gold in spec.few_shot_examples:
        values = {"title": record.title, "answer": gold}
        if reasoned:
            values["reasoning"] = fill(load_template(f"reasoning_{spec.task.lower()}"), {"answer": gold})
            rendered.append(fill(load_template("example_reasoned"), values))
        else:
            rendered.append(fill(load_template("example_plain"), values))
    return fill(load_template("section_examples"), {"examples": "\n\n".join(rendered)})


def render(spec: PromptSpec, record: "PaperRecord") -> RenderedPrompt:
    """Render the prompt for one record under ``spec``.

    The user message is the optional task prefix line, the task instruction,
    title and abstract, then per style the graphlet and taxonomy blocks,
    worked examples, and the reasoning-elicitation line.
    """
    if not record.title:
        raise PromptError(f"record {record.id!r} has no title")

    task = spec.task
    context = spec.context or PromptContext()
    abstract = record.abstract if record.abstract else context.abstract

    graphlet_text = ""
    taxonomy_text = ""
    if spec.style == "iqck_cot":
        outline = context.graphlet_text
        if outline is None and record.graphlet_instance is not None:
            outline = serialize_graphlet(record.graphlet_instance)
        if outline is None:
            raise PromptError(f"style iqck_cot needs a graphlet for record {record.id!r}")
        graphlet_text = "\n\n" + fill(load_template("section_graphlet"), {"outline": outline})
        if task == "RF":
            if context.taxonomy is None:
                raise PromptError("style iqck_cot for task RF needs a taxonomy in the context")
        if context.taxonomy is not None:
            tree = serialize_taxonomy(context.taxonomy)
            taxonomy_text = "\n\n" + fill(load_template("section_taxonomy"), {"tree": tree})

    examples_text = ""
    if spec.style in ("few_shot", "cot", "iqck_cot") and spec.few_shot_examples:
        examples_text = "\n\n" + _examples_block(spec)

    cot_text = ""
    if spec.style in ("zero_shot_cot", "iqck_cot"):
        cot_text = "\n\n" + load_template("cot_line")

    user = fill(
        load_template("user"),
        {
            "prefix": task_prefix(task) + "\n" if spec.prefix_enabled else "",
            "instruction": load_template(f"instruction_{task.lower()}"),
            "title": record.title,
            "abstract": f"\nAbstract: {abstract}" if abstract else "",
            "graphlet": graphlet_text,
            "taxonomy": taxonomy_text,
            "examples": examples_text,
            "cot": cot_text,
        },
    )
    system = load_template(f"system_{task.lower()}")
    return RenderedPrompt((("system", system), ("user", user)))


def select_examples(
    records, task: str, count: int = 3, seed: int = 0
) -> tuple[tuple["PaperRecord", str], ...]:
    """Draw worked examples deterministically from task-usable records."""
    usable = []
    for r in records:
        gold = gold_answer(r, task)
        if gold is not None:
            usable.append((r, gold))
    if len(usable) < count:
        raise PromptError(f"need {count} example records, only {len(usable)} usable for {task}")
    rng = random.Random(seed)
    return tuple(rng.sample(usable, count))


def gold_answer(record: "PaperRecord", task: str) -> str | None:
    """The record's gold answer in the task's output format, or None."""
    if task == "RF":
        return record.gold_research_field or None
    if task == "LP":
        if record.gold_predicates:
            return "\n".join(record.gold_predicates)
        return None
    raise ValueError(f"unknown task {task!r}")
