"""Paper records: JSONL ingestion, abstract joining, splits, fine-tune export."""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, replace

from .graphlet import GraphletInstance
from .prompt import gold_answer, serialize_graphlet, task_prefix

TASK_INDEPENDENT_INSTRUCTION = (
    "Describe the structured contribution of this paper as a list of properties and values."
)
TASK_DRIVEN_INSTRUCTIONS = {
    "RF": "Name the research field this paper belongs to.",
    "LP": "List the predicates that describe this paper's contribution, one per line.",
}


class RecordError(ValueError):
    """Malformed record file or a record missing fields an operation needs."""


@dataclass(frozen=True)
class PaperRecord:
    id: str
    title: str
    abstract: str | None = None
    doi: str | None = None
    gold_research_field: str | None = None
    gold_predicates: tuple[str, ...] | None = None
    graphlet_instance: GraphletInstance | None = None

    def usable_for(self, task: str) -> bool:
        if task == "RF":
            return bool(self.gold_research_field)
        if task == "LP":
            return bool(self.gold_predicates)
        raise ValueError(f"unknown task {task!r}")

    def to_json(self) -> dict:
        doc: dict = {"id": self.id, "title": self.title}
        if self.abstract is not None:
            doc["abstract"] = self.abstract
        if self.doi is not None:
            doc["doi"] = self.doi
        if self.gold_research_field is not None:
            doc["gold_research_field"] = self.gold_research_field
        if self.gold_predicates is not None:
            doc["gold_predicates"] = list(self.gold_predicates)
        if self.graphlet_instance is not None:
            doc["graphlet_instance"] = self.graphlet_instance.to_json()
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "PaperRecord":
        preds = doc.get("gold_predicates")
        inst = doc.get("graphlet_instance")
        return cls(
            id=doc["id"],
            title=doc["title"],
            abstract=doc.get("abstract"),
            doi=doc.get("doi"),
            gold_research_field=doc.get("gold_research_field"),
            gold_predicates=tuple(preds) if preds is not None else None,
            graphlet_instance=GraphletInstance.from_json(inst) if inst is not None else None,
        )


@dataclass(frozen=True)
class Split:
    train: tuple[PaperRecord, ...]
    test: tuple[PaperRecord, ...]
    seed: int
    task: str


@dataclass(frozen=True)
class JoinStats:
    hits: int
    misses: int


def load_records(path) -> list[PaperRecord]:
    """Read one record per JSONL line; requires ``id`` and ``title``, ignores
    unknown keys, rejects duplicate ids."""
    records: list[PaperRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except ValueError as exc:
                raise RecordError(f"malformed JSON on line {lineno}: {exc}") from None
            if not isinstance(doc, dict) or "id" not in doc:
                raise RecordError(f"line {lineno} is not a record object with an id")
            if "title" not in doc or not isinstance(doc["title"], str):
                raise RecordError(f"record {doc['id']!r} on line {lineno} has no title")
            if doc["id"] in seen:
                raise RecordError(f"duplicate record id {doc['id']!r} on line {lineno}")
            seen.add(doc["id"])
            try:
                records.append(PaperRecord.from_json(doc))
            except (KeyError, TypeError, ValueError) as exc:
                raise RecordError(f"bad record on line {lineno}: {exc}") from None
    return records


def write_records(records, path) -> int:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), ensure_ascii=False) + "\n")
    return len(list(records))


def normalize_doi(doi: str) -> str:
    doi = doi.strip().lower()
    for prefix in ("https://doi.org/", "http://doi.org/", "doi:"):
        if doi.startswith(prefix):
            doi = doi[len(prefix) :]
    return doi


def _title_key(title: str) -> str:
    return re.sub(r"\s+", " ", title).strip().casefold()


def load_abstracts(path) -> dict[str, str]:
    """Abstract map from JSONL lines ``{"key": ..., "abstract": ...}``."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                out[doc["key"]] = doc["abstract"]
            except (ValueError, KeyError, TypeError) as exc:
                raise RecordError(f"bad abstract entry on line {lineno}: {exc}") from None
    return out


def join_abstracts(
    records: list[PaperRecord], abstracts: dict[str, str]
) -> tuple[list[PaperRecord], JoinStats]:
    """Attach abstracts keyed by normalized DOI, falling back to the
    case-folded title; records without a key hit are returned unchanged."""
    by_key = {}
    for key, text in abstracts.items():
        by_key[normalize_doi(key)] = text
        by_key[_title_key(key)] = text
    joined: list[PaperRecord] = []
    hits = 0
    for r in records:
        text = None
        if r.doi is not None:
            text = by_key.get(normalize_doi(r.doi))
        if text is None:
            text = by_key.get(_title_key(r.title))
        if text is not None:
            joined.append(replace(r, abstract=text))
            hits += 1
        else:
            joined.append(r)
    return joined, JoinStats(hits=hits, misses=len(records) - hits)


def make_split(records: list[PaperRecord], task: str, test_size: int, seed: int) -> Split:
    """Filter to task-usable records, shuffle with a seeded PRNG, and take the
    last ``test_size`` as the test set. Identical inputs give identical splits."""
    if test_size < 0:
        raise ValueError("test_size must be non-negative")
    usable = [r for r in records if r.usable_for(task)]
    if len(usable) < test_size:
        raise RecordError(
            f"need {test_size} {task}-usable records for the test set, have {len(usable)}"
        )
    shuffled = list(usable)
    random.Random(seed).shuffle(shuffled)
    cut = len(shuffled) - test_size
    return Split(train=tuple(shuffled[:cut]), test=tuple(shuffled[cut:]), seed=seed, task=task)


def export_finetune(split: Split, variant: str, out) -> int:
    """Write instruction-tuning JSONL for the split's train records.

    ``task_independent`` lines ask for the structured contribution and answer
    with the serialized graphlet; ``task_driven`` lines start with the task
    prefix and answer with the gold label(s). Output bytes are deterministic.
    """
    if variant not in ("task_independent", "task_driven"):
        raise ValueError(f"unknown variant {variant!r}")
    lines: list[str] = []
    for r in split.train:
        body = f"Title: {r.title}"
        if r.abstract:
            body += f"\nAbstract: {r.abstract}"
        if variant == "task_independent":
            if r.graphlet_instance is None:
                raise RecordError(f"record {r.id!r} has no graphlet instance")
            doc = {
                "instruction": TASK_INDEPENDENT_INSTRUCTION,
                "input": body,
                "output": serialize_graphlet(r.graphlet_instance),
            }
        else:
            gold = gold_answer(r, split.task)
            if gold is None:
                raise RecordError(f"record {r.id!r} has no gold answer for task {split.task}")
            doc = {
                "instruction": f"{task_prefix(split.task)}\n{TASK_DRIVEN_INSTRUCTIONS[split.task]}",
                "input": body,
                "output": gold,
            }
        lines.append(json.dumps(doc, ensure_ascii=False))
    with open(out, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")
    return len(lines)
