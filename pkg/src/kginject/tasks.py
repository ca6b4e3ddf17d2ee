"""End-to-end task runners and strict parsing of model outputs.

The output contract is fixed by the system prompt: one field label on one
line for research-field prediction, one predicate label per line for the
predicate-list task. Parsers are total; violations surface as
``parse_ok=False`` rather than exceptions so scoring stays honest.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .dataset import PaperRecord
from .llm import Completer, ModelConfig, make_completer
from .prompt import PromptSpec, RenderedPrompt, Taxonomy, render, template_versions

_BULLET = re.compile(r"^\s*(?:[-*•]+|\d+[.)])\s*")


@dataclass(frozen=True)
class Prediction:
    task: str
    raw_text: str
    parse_ok: bool
    rf_label: str | None = None
    lp_labels: tuple[str, ...] | None = None
    taxonomy_match: bool | None = None

    def to_json(self) -> dict:
        doc: dict = {"task": self.task, "raw_text": self.raw_text, "parse_ok": self.parse_ok}
        if self.rf_label is not None:
            doc["rf_label"] = self.rf_label
        if self.lp_labels is not None:
            doc["lp_labels"] = list(self.lp_labels)
        if self.taxonomy_match is not None:
            doc["taxonomy_match"] = self.taxonomy_match
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "Prediction":
        labels = doc.get("lp_labels")
        return cls(
            task=doc["task"],
            raw_text=doc["raw_text"],
            parse_ok=doc["parse_ok"],
            rf_label=doc.get("rf_label"),
            lp_labels=tuple(labels) if labels is not None else None,
            taxonomy_match=doc.get("taxonomy_match"),
        )


def _clean_lines(text: str) -> list[str]:
    out = []
    for raw in text.splitlines():
        line = _BULLET.sub("", raw).strip()
        if line:
            out.append(line)
    return out


def parse_rf(text: str, taxonomy: Taxonomy | None = None) -> Prediction:
    """First non-empty line is the field label; exactly one line means the
    output honored the format contract. Never raises."""
    lines = _clean_lines(text)
    label = lines[0] if lines else None
    match = None
    if taxonomy is not None and label is not None:
        match = taxonomy.matches_label(label)
    return Prediction(
        task="RF",
        raw_text=text,
        parse_ok=len(lines) == 1,
        rf_label=label,
        taxonomy_match=match,
    )


def parse_lp(text: str) -> Prediction:
    """One predicate label per line; bullets stripped, case-fold deduplication
    keeping first occurrences. Never raises."""
    labels: list[str] = []
    seen: set[str] = set()
    for line in _clean_lines(text):
        key = line.casefold()
        if key not in seen:
            seen.add(key)
            labels.append(line)
    return Prediction(
        task="LP",
        raw_text=text,
        parse_ok=bool(labels),
        lp_labels=tuple(labels) if labels else None,
    )


@dataclass(frozen=True)
class RunItem:
    record_id: str
    fingerprint: str | None
    task: str
    prediction: Prediction | None
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "id": self.record_id,
            "fingerprint": self.fingerprint,
            "task": self.task,
            "prediction": self.prediction.to_json() if self.prediction else None,
            "error": self.error,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RunItem":
        pred = doc.get("prediction")
        return cls(
            record_id=doc["id"],
            fingerprint=doc.get("fingerprint"),
            task=doc["task"],
            prediction=Prediction.from_json(pred) if pred else None,
            error=doc.get("error"),
        )


def run_task(
    records: list[PaperRecord],
    task: str,
    spec: PromptSpec,
    config: ModelConfig,
    completer: Completer | None = None,
) -> list[RunItem]:
    """Render, complete, and parse every record, in input order.

    Records are isolated: one failing record becomes an error item rather than
    aborting the run. Pass a mock or cached completer for offline work.
    """
    if spec.task != task:
        raise ValueError(f"spec is for task {spec.task}, run requested {task}")
    run_one = completer or make_completer(config)
    taxonomy = spec.context.taxonomy if spec.context else None
    items: list[RunItem] = []
    for record in records:
        fingerprint = None
        try:
            prompt = render(spec, record)
            fingerprint = prompt.fingerprint
            response = run_one(prompt)
            prediction = (
                parse_rf(response.text, taxonomy) if task == "RF" else parse_lp(response.text)
            )
            items.append(RunItem(record.id, fingerprint, task, prediction))
        except Exception as exc:  # per-record isolation
            items.append(
                RunItem(record.id, fingerprint, task, None, f"{type(exc).__name__}: {exc}")
            )
    return items


def build_manifest(
    spec: PromptSpec, config: ModelConfig, items: list[RunItem], seed: int | None = None
) -> dict:
    """Everything needed to reproduce a run; deliberately free of timestamps."""
    return {
        "task": spec.task,
        "style": spec.style,
        "prefix_enabled": spec.prefix_enabled,
        "model": config.to_json(),
        "seed": seed,
        "template_versions": {name: digest for name, digest in template_versions()},
        "items": [
            {"id": it.record_id, "fingerprint": it.fingerprint, "error": it.error}
            for it in items
        ],
    }


def write_results(items: list[RunItem], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item.to_json(), ensure_ascii=False) + "\n")


def read_results(path) -> list[RunItem]:
    items = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                items.append(RunItem.from_json(json.loads(line)))
    return items
