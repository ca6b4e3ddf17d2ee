"""Rubric scoring and Mean Average Score aggregation.

Each item is scored 0-3 on four dimensions for research-field prediction
(clarity, coverage, relevance, granularity) and five for predicate
recommendation (plus context_recognition). MAS for a group is the mean over
items of (dimension sum / max sum), reported as a half-up-rounded integer
percentage; every report footer restates this formula.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fractions import Fraction

from .dataset import PaperRecord
from .llm import Completer
from .prompt import RenderedPrompt, fill, gold_answer, load_template
from .tasks import RunItem

RF_DIMENSIONS = ("clarity", "coverage", "relevance", "granularity")
LP_DIMENSIONS = ("clarity", "coverage", "relevance", "granularity", "context_recognition")
SOURCES = ("llm_judge", "human")
PREFIXES = ("with", "without")

HUMAN_CSV_HEADER = [
    "item_id",
    "model",
    "task",
    "prefix",
    "clarity",
    "coverage",
    "relevance",
    "granularity",
    "context_recognition",
]

MAS_NOTE = (
    "MAS = mean over items of (sum of the item's 0-3 dimension scores / "
    "3 x dimension count), shown as a half-up-rounded integer percentage."
)


def dimensions_for(task: str) -> tuple[str, ...]:
    if task == "RF":
        return RF_DIMENSIONS
    if task == "LP":
        return LP_DIMENSIONS
    raise ValueError(f"unknown task {task!r}")


class JudgeParseError(ValueError):
    pass


class NoJsonError(JudgeParseError):
    pass


class MissingDimensionError(JudgeParseError):
    pass


class ScoreRangeError(JudgeParseError):
    pass


class CsvFormatError(ValueError):
    pass


@dataclass(frozen=True)
class RubricScore:
    """One item's 0-3 scores on the task's dimensions.

    ``model`` and ``prefix`` carry the grouping metadata the report tables
    need; they ride along with each score row.
    """

    item_id: str
    task: str
    dimensions: dict[str, int]
    source: str
    model: str | None = None
    prefix: str | None = None

    def __post_init__(self):
        expected = dimensions_for(self.task)
        if tuple(self.dimensions) != expected:
            missing = [d for d in expected if d not in self.dimensions]
            extra = [d for d in self.dimensions if d not in expected]
            if missing or set(self.dimensions) != set(expected):
                raise MissingDimensionError(
                    f"task {self.task} expects dimensions {expected}; "
                    f"missing {missing}, unexpected {extra}"
                )
            # same set, wrong order: normalize
            object.__setattr__(self, "dimensions", {d: self.dimensions[d] for d in expected})
        for name, value in self.dimensions.items():
            if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= 3:
                raise ScoreRangeError(f"dimension {name} must be an integer in 0..3, got {value!r}")
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}, got {self.source!r}")
        if self.prefix is not None and self.prefix not in PREFIXES:
            raise ValueError(f"prefix must be one of {PREFIXES}, got {self.prefix!r}")

    def to_json(self) -> dict:
        return {
            "item_id": self.item_id,
            "task": self.task,
            "model": self.model,
            "prefix": self.prefix,
            "source": self.source,
            "dimensions": dict(self.dimensions),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RubricScore":
        return cls(
            item_id=doc["item_id"],
            task=doc["task"],
            dimensions={k: v for k, v in doc["dimensions"].items()},
            source=doc["source"],
            model=doc.get("model"),
            prefix=doc.get("prefix"),
        )


def zero_score(
    item_id: str, task: str, source: str = "llm_judge", model: str | None = None,
    prefix: str | None = None,
) -> RubricScore:
    return RubricScore(item_id, task, {d: 0 for d in dimensions_for(task)}, source, model, prefix)


# ---------------------------------------------------------------------------
# judge prompts

def build_judge_prompt(
    task: str, record: PaperRecord, prediction, gold: str
) -> RenderedPrompt:
    """Prompt asking the judge for a single JSON object with the task's
    dimensions as integer fields. Unparseable predictions never reach the
    judge; they are scored zero upstream."""
    if not prediction.parse_ok:
        raise ValueError("unparseable predictions are scored zero, not judged")
    predicted = prediction.rf_label if task == "RF" else "\n".join(prediction.lp_labels)
    user = fill(
        load_template(f"judge_{task.lower()}"),
        {
            "title": record.title,
            "abstract": f"\nAbstract: {record.abstract}" if record.abstract else "",
            "gold": gold,
            "prediction": predicted,
        },
    )
    return RenderedPrompt((("system", load_template("judge_system")), ("user", user)))


def _first_json_object(text: str) -> dict:
    start = text.find("{")
    while start >= 0:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            c = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif c == "\\":
                    escaped = True
                elif c == '"':
                    in_string = False
            elif c == '"':
                in_string = True
            elif c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    try:
                        doc = json.loads(text[start : i + 1])
                    except ValueError:
                        break
                    if isinstance(doc, dict):
                        return doc
                    break
        start = text.find("{", start + 1)
    raise NoJsonError("no JSON object found in judge output")


def parse_judge(
    text: str, task: str, item_id: str = "", model: str | None = None,
    prefix: str | None = None,
) -> RubricScore:
    """Extract the first balanced JSON object and validate it as a rubric
    score; extra keys are ignored, missing dimensions and out-of-range values
    are distinct errors."""
    doc = _first_json_object(text)
    expected = dimensions_for(task)
    missing = [d for d in expected if d not in doc]
    if missing:
        raise MissingDimensionError(f"judge output missing dimensions: {missing}")
    dims = {}
    for d in expected:
        value = doc[d]
        if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= 3:
            raise ScoreRangeError(f"dimension {d} must be an integer in 0..3, got {value!r}")
        dims[d] = value
    return RubricScore(item_id, task, dims, "llm_judge", model, prefix)


def judge_items(
    items: list[RunItem],
    records_by_id: dict[str, PaperRecord],
    task: str,
    completer: Completer,
    model: str,
    prefix: str,
) -> list[RubricScore]:
    """Score every run item: parseable predictions go to the judge, failed or
    unparseable items get all-zero scores without a judge call."""
    scores = []
    for item in items:
        pred = item.prediction
        if pred is None or not pred.parse_ok:
            scores.append(zero_score(item.record_id, task, "llm_judge", model, prefix))
            continue
        record = records_by_id[item.record_id]
        gold = gold_answer(record, task)
        if gold is None:
            raise ValueError(f"record {record.id!r} has no gold answer for task {task}")
        prompt = build_judge_prompt(task, record, pred, gold)
        response = completer(prompt)
        scores.append(parse_judge(response.text, task, item.record_id, model, prefix))
    return scores


# ---------------------------------------------------------------------------
# human CSV

def import_human_csv(path) -> list[RubricScore]:
    """Read human rubric scores; the header is fixed and every violation is
    reported with its row number."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError("empty CSV, expected a header row") from None
        if header != HUMAN_CSV_HEADER:
            raise CsvFormatError(
                f"header mismatch: expected {','.join(HUMAN_CSV_HEADER)}, got {','.join(header)}"
            )
        scores = []
        for rownum, row in enumerate(reader, start=2):
            if len(row) != len(HUMAN_CSV_HEADER):
                raise CsvFormatError(f"row {rownum}: expected {len(HUMAN_CSV_HEADER)} cells")
            item_id, model, task, prefix = row[0], row[1], row[2], row[3]
            cells = dict(zip(HUMAN_CSV_HEADER[4:], row[4:]))
            if task not in ("RF", "LP"):
                raise CsvFormatError(f"row {rownum}: unknown task {task!r}")
            if task == "RF" and cells["context_recognition"] != "":
                raise CsvFormatError(
                    f"row {rownum}: context_recognition is not an RF dimension"
                )
            dims = {}
            for d in dimensions_for(task):
                cell = cells[d]
                if cell == "":
                    raise CsvFormatError(f"row {rownum}: missing {d}")
                try:
                    value = int(cell)
                except ValueError:
                    raise CsvFormatError(f"row {rownum}: {d} is not an integer") from None
                if not 0 <= value <= 3:
                    raise CsvFormatError(f"row {rownum}: {d}={value} outside 0..3")
                dims[d] = value
            try:
                scores.append(RubricScore(item_id, task, dims, "human", model, prefix))
            except ValueError as exc:
                raise CsvFormatError(f"row {rownum}: {exc}") from None
    return scores


def export_human_csv(scores: list[RubricScore], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HUMAN_CSV_HEADER)
        for s in scores:
            row = [s.item_id, s.model or "", s.task, s.prefix or ""]
            row += [str(s.dimensions.get(d, "")) for d in LP_DIMENSIONS]
            writer.writerow(row)


def write_scores(scores: list[RubricScore], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in scores:
            fh.write(json.dumps(s.to_json(), ensure_ascii=False) + "\n")


def read_scores(path) -> list[RubricScore]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(RubricScore.from_json(json.loads(line)))
    return out


# ---------------------------------------------------------------------------
# aggregation

def item_fraction(score: RubricScore) -> Fraction:
    """Dimension sum over the maximum possible sum, as an exact rational."""
    return Fraction(sum(score.dimensions.values()), 3 * len(score.dimensions))


def mas(scores: list[RubricScore]) -> int:
    """Mean of item fractions as a half-up-rounded integer percentage."""
    if not scores:
        raise ValueError("mas needs at least one score")
    tasks = {s.task for s in scores}
    if len(tasks) > 1:
        raise ValueError(f"mas needs a homogeneous task, got {sorted(tasks)}")
    mean = sum((item_fraction(s) for s in scores), Fraction(0)) / len(scores)
    return math.floor(mean * 100 + Fraction(1, 2))


@dataclass(frozen=True)
class ReportRow:
    task: str
    prefix: str
    model: str
    mas: int
    source: str


@dataclass(frozen=True)
class EvaluationReport:
    rows: tuple[ReportRow, ...]
    note: str = MAS_NOTE

    def to_json(self) -> dict:
        return {
            "rows": [
                {
                    "task": r.task,
                    "prefix": r.prefix,
                    "model": r.model,
                    "mas": r.mas,
                    "source": r.source,
                }
                for r in self.rows
            ],
            "note": self.note,
        }


def build_report(scores: list[RubricScore]) -> EvaluationReport:
    """Group scores by (task, prefix, model, source) and compute each group's
    MAS. Rows within a (task, prefix, source) block are ordered by MAS
    descending, ties broken by model name."""
    if not scores:
        raise ValueError("no scores to report")
    groups: dict[tuple[str, str, str, str], list[RubricScore]] = {}
    for s in scores:
        if s.model is None or s.prefix is None:
            raise ValueError(f"score for item {s.item_id!r} lacks model/prefix metadata")
        groups.setdefault((s.task, s.prefix, s.model, s.source), []).append(s)
    rows = [
        ReportRow(task, prefix, model, mas(group), source)
        for (task, prefix, model, source), group in groups.items()
    ]
    rows.sort(key=lambda r: (r.task, r.prefix, r.source, -r.mas, r.model))
    return EvaluationReport(tuple(rows))


def render_table(report: EvaluationReport) -> str:
    headers = ("Task", "Prefix", "Model", "MAS", "Source")
    cells = [
        (r.task, r.prefix, r.model, f"{r.mas}%", r.source) for r in report.rows
    ]
    widths = [max(len(h), *(len(c[i]) for c in cells)) if cells else len(h)
              for i, h in enumerate(headers)]
    def fmt(row):
        return "  ".join(value.ljust(widths[i]) for i, value in enumerate(row)).rstrip()
    lines = [fmt(headers), fmt(tuple("-" * w for w in widths))]
    lines += [fmt(c) for c in cells]
    return "\n".join(lines) + "\n\n" + report.note + "\n"
