"""Synthetic desk-scale demo data: a small scholarly graph, a research-field
taxonomy, and paper records with gold answers and per-record graphlet
instances. Everything here is deterministic so runs and tests are
reproducible byte for byte."""

from __future__ import annotations

from .dataset import PaperRecord
from .graphlet import Graphlet, extract_instance
from .prompt import Taxonomy
from .store import Graph, Term, parse_ntriples

EX = "http://example.org/"

# A 20-triple scholarly graph: two papers with typed contributions; the first
# carries a methodology and a dataset, the second only a research field.
SCHOLARLY_NT = f"""\
<{EX}paper1> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <{EX}Paper> .
<{EX}paper1> <{EX}hasTitle> "Exploring transfer learning with a unified text-to-text model" .
<{EX}paper1> <{EX}hasContribution> <{EX}contrib1> .
<{EX}contrib1> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <{EX}Contribution> .
<{EX}contrib1> <{EX}belongsToResearchField> <{EX}field_ml> .
<{EX}contrib1> <{EX}followsMethodology> <{EX}meth1> .
<{EX}contrib1> <{EX}usesDataset> <{EX}ds1> .
<{EX}field_ml> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <{EX}ResearchField> .
<{EX}field_ml> <http://www.w3.org/2000/01/rdf-schema#label> "machine learning" .
<{EX}meth1> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <{EX}Methodology> .
<{EX}meth1> <http://www.w3.org/2000/01/rdf-schema#label> "transfer learning" .
<{EX}ds1> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <{EX}Dataset> .
<{EX}ds1> <http://www.w3.org/2000/01/rdf-schema#label> "C4" .
<{EX}paper2> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <{EX}Paper> .
<{EX}paper2> <{EX}hasTitle> "Attention-based encoders for long documents" .
<{EX}paper2> <{EX}hasContribution> <{EX}contrib2> .
<{EX}contrib2> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <{EX}Contribution> .
<{EX}contrib2> <{EX}belongsToResearchField> <{EX}field_nlp> .
<{EX}field_nlp> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <{EX}ResearchField> .
<{EX}field_nlp> <http://www.w3.org/2000/01/rdf-schema#label> "natural language processing" .
"""

SCHOLARLY_GRAPHLET = Graphlet(
    classes=frozenset(
        {
            EX + "Paper",
            EX + "Contribution",
            EX + "ResearchField",
            EX + "Methodology",
            EX + "Dataset",
        }
    ),
    properties=frozenset(
        {
            EX + "hasContribution",
            EX + "belongsToResearchField",
            EX + "followsMethodology",
            EX + "usesDataset",
        }
    ),
)

TAXONOMY_JSON = {
    "fields": [
        {"id": "f_sci", "label": "Science", "parent": None},
        {"id": "f_cs", "label": "Computer Science", "parent": "f_sci"},
        {"id": "f_ml", "label": "Machine Learning", "parent": "f_cs"},
        {"id": "f_nlp", "label": "Natural Language Processing", "parent": "f_cs"},
        {"id": "f_db", "label": "Databases", "parent": "f_cs"},
        {"id": "f_math", "label": "Mathematics", "parent": "f_sci"},
        {"id": "f_stat", "label": "Statistics", "parent": "f_math"},
    ]
}

_FIELDS = (
    "Machine Learning",
    "Natural Language Processing",
    "Databases",
    "Statistics",
    "Computer Science",
)
_PREDICATES = (
    ("usesDataset", "followsMethodology"),
    ("usesTrainingCorpus", "usesTokenization", "hasNumberofParameters"),
    ("hasEvaluation", "usesDataset"),
    ("followsMethodology", "hasModelFamily"),
    ("usesDataset", "hasEvaluation", "followsMethodology"),
)
_TOPICS = (
    "transfer learning for text models",
    "tokenization strategies at scale",
    "indexing engines for graph workloads",
    "variance estimation in small samples",
    "benchmark design for retrieval systems",
)


def scholarly_graph() -> Graph:
    return parse_ntriples(SCHOLARLY_NT)


def demo_taxonomy() -> Taxonomy:
    return Taxonomy.from_json(TAXONOMY_JSON)


def paper1_instance(max_depth: int = 2):
    graph = scholarly_graph()
    return extract_instance(graph, Term.iri(EX + "paper1"), SCHOLARLY_GRAPHLET, max_depth)


def _record_graph(i: int, field: str, predicates: tuple[str, ...]) -> str:
    field_id = field.lower().replace(" ", "_")
    lines = [
        f"<{EX}paper{i}> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <{EX}Paper> .",
        f"<{EX}paper{i}> <{EX}hasContribution> <{EX}contrib{i}> .",
        f"<{EX}contrib{i}> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <{EX}Contribution> .",
        f"<{EX}contrib{i}> <{EX}belongsToResearchField> <{EX}field_{field_id}> .",
        f"<{EX}field_{field_id}> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <{EX}ResearchField> .",
        f'<{EX}field_{field_id}> <http://www.w3.org/2000/01/rdf-schema#label> "{field}" .',
    ]
    for j, pred in enumerate(predicates):
        lines.append(f"<{EX}contrib{i}> <{EX}{pred}> <{EX}thing{i}_{j}> .")
    return "\n".join(lines) + "\n"


def demo_records(count: int = 10) -> list[PaperRecord]:
    """Records with gold answers for both tasks and a per-record instance."""
    records = []
    properties = {EX + "hasContribution", EX + "belongsToResearchField"}
    for preds in _PREDICATES:
        properties.update(EX + p for p in preds)
    graphlet = Graphlet(
        classes=SCHOLARLY_GRAPHLET.classes, properties=frozenset(properties)
    )
    for i in range(count):
        field = _FIELDS[i % len(_FIELDS)]
        preds = _PREDICATES[i % len(_PREDICATES)]
        graph = parse_ntriples(_record_graph(i, field, preds))
        instance = extract_instance(graph, Term.iri(f"{EX}paper{i}"), graphlet, max_depth=2)
        records.append(
            PaperRecord(
                id=f"p{i:03d}",
                title=f"A study of {_TOPICS[i % len(_TOPICS)]} ({i})",
                abstract=f"We investigate {_TOPICS[i % len(_TOPICS)]} and report results.",
                doi=f"10.1000/demo.{i:03d}",
                gold_research_field=field,
                gold_predicates=preds,
                graphlet_instance=instance,
            )
        )
    return records
