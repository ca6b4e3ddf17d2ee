"""Graphlet engine and knowledge-injection pipeline for scholarly LLM tasks."""

from .store import Graph, Schema, Term, Triple, infer_schema, parse_ntriples, serialize_graph
from .graphlet import (
    Graphlet,
    GraphletInstance,
    ShapeSet,
    ValidationReport,
    extract_instance,
    to_pattern,
    to_shapes,
    validate,
)
from .query import Binding, Pattern, Var, evaluate, fetch_endpoint, generate_sparql, is_connected, parse_query
from .dataset import PaperRecord, Split, export_finetune, join_abstracts, load_records, make_split
from .prompt import (
    PromptContext,
    PromptSpec,
    RenderedPrompt,
    Taxonomy,
    render,
    serialize_graphlet,
    serialize_taxonomy,
    task_prefix,
)
from .llm import LlmResponse, ModelConfig, complete, mock_complete, with_cache
from .tasks import Prediction, RunItem, parse_lp, parse_rf, run_task
from .evaluation import (
    EvaluationReport,
    RubricScore,
    build_judge_prompt,
    build_report,
    import_human_csv,
    item_fraction,
    mas,
    parse_judge,
)

__version__ = "0.1.0"
