"""Command-line entry point orchestrating the pipeline end to end.

Exit codes: 0 success, 1 validation/input failure, 2 usage error. Outputs are
JSON first; ``report`` additionally prints an aligned table.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import dataset, evaluation, graphlet, llm, prompt, query, store, tasks


def _existing_file(path: str) -> str:
    import os

    if not os.path.isfile(path):
        raise argparse.ArgumentTypeError(f"no such file: {path}")
    return path


def _parse_mode(text: str) -> tuple[str, str]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2 or parts[0] not in graphlet.LENIENCIES or parts[1] not in graphlet.DIRECTIONS:
        raise argparse.ArgumentTypeError(
            "mode must be '<lenient|strict>,<undirected|directed>'"
        )
    return parts[0], parts[1]


def _parse_root(text: str) -> store.Term:
    if not text.startswith(("<", "_", '"')):
        text = f"<{text}>"
    term, pos = store.scan_term(text, 0)
    if pos != len(text):
        raise argparse.ArgumentTypeError(f"trailing characters in term {text!r}")
    return term


def _schema_for(args) -> tuple[store.Graph, store.Schema]:
    graph = store.load_graph(args.graph)
    declarations = None
    if getattr(args, "declarations", None):
        with open(args.declarations, encoding="utf-8") as fh:
            declarations = [tuple(d) for d in json.load(fh)]
    schema = store.infer_schema(graph, declarations, rdf_type=args.rdf_type)
    return graph, schema


def _emit(args, doc) -> None:
    text = json.dumps(doc, indent=2, ensure_ascii=False, sort_keys=True) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_mock_script(path: str) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in doc.items()
    ):
        raise ValueError("mock script must be a JSON object of string -> string")
    return doc


def _model_config(args) -> llm.ModelConfig:
    return llm.ModelConfig(
        name=args.model,
        base_url=args.base_url,
        temperature=args.temperature,
        max_output_tokens=args.max_output_tokens,
        timeout=args.timeout,
        max_retries=args.max_retries,
        api_key_env=args.api_key_env,
    )


def _completer(args, config: llm.ModelConfig) -> llm.Completer:
    if args.mock_script:
        inner = llm.make_mock_completer(_load_mock_script(args.mock_script))
    else:
        inner = llm.make_completer(config)
    if args.cache_dir:
        inner = llm.with_cache(inner, args.cache_dir, config.name)
    return inner


def _prompt_spec(args, records: list[dataset.PaperRecord]) -> prompt.PromptSpec:
    taxonomy = prompt.load_taxonomy(args.taxonomy) if getattr(args, "taxonomy", None) else None
    context = None
    if args.style == "iqck_cot" or taxonomy is not None:
        context = prompt.PromptContext(taxonomy=taxonomy)
    examples = ()
    if args.style in ("few_shot", "cot"):
        pool = (
            dataset.load_records(args.examples_records)
            if getattr(args, "examples_records", None)
            else records
        )
        examples = prompt.select_examples(
            pool, args.task, count=args.examples_count, seed=args.examples_seed
        )
    return prompt.PromptSpec(
        style=args.style,
        task=args.task,
        prefix_enabled=args.prefix,
        few_shot_examples=examples,
        context=context,
    )


# ---------------------------------------------------------------------------
# subcommands

def _cmd_validate_graphlet(args) -> int:
    _, schema = _schema_for(args)
    g = graphlet.load_graphlet(args.graphlet)
    leniency, direction = args.mode
    report = graphlet.validate(g, schema, leniency=leniency, direction=direction)
    _emit(args, report.to_json())
    return 0 if report.ok else 1


def _cmd_extract(args) -> int:
    graph = store.load_graph(args.graph)
    g = graphlet.load_graphlet(args.graphlet)
    instance = graphlet.extract_instance(
        graph, args.root, g, args.depth, rdf_type=args.rdf_type
    )
    _emit(args, instance.to_json())
    return 0


def _cmd_query(args) -> int:
    with open(args.query, encoding="utf-8") as fh:
        text = fh.read()
    if args.endpoint:
        bindings = query.fetch_endpoint(
            args.endpoint, text, timeout=args.timeout, cache_dir=args.cache_dir
        )
        head_vars = sorted({v for b in bindings for v in b})
    else:
        pattern = query.parse_query(text)
        graph = store.load_graph(args.graph)
        bindings = query.evaluate(pattern, graph)
        head_vars = list(pattern.select_vars)
    doc = {
        "head": {"vars": head_vars},
        "results": {
            "bindings": [
                {v: store.term_to_json(t) for v, t in b.items()} for b in bindings
            ]
        },
    }
    _emit(args, doc)
    return 0


def _cmd_gen_sparql(args) -> int:
    _, schema = _schema_for(args)
    g = graphlet.load_graphlet(args.graphlet)
    text = query.generate_sparql(graphlet.to_pattern(g, schema))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_split(args) -> int:
    records = dataset.load_records(args.records)
    split = dataset.make_split(records, args.task, args.test_size, args.seed)
    dataset.write_records(split.train, args.out_train)
    dataset.write_records(split.test, args.out_test)
    _emit(
        args,
        {
            "task": split.task,
            "seed": split.seed,
            "train": len(split.train),
            "test": len(split.test),
            "note": "test items are a seeded random sample of the task-usable records",
        },
    )
    return 0


def _cmd_export_finetune(args) -> int:
    records = dataset.load_records(args.train)
    split = dataset.Split(train=tuple(records), test=(), seed=0, task=args.task)
    count = dataset.export_finetune(split, args.variant, args.out)
    doc = {"examples": count, "variant": args.variant, "path": args.out}
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_build_prompt(args) -> int:
    records = dataset.load_records(args.records)
    by_id = {r.id: r for r in records}
    if args.id not in by_id:
        raise dataset.RecordError(f"no record with id {args.id!r}")
    spec = _prompt_spec(args, records)
    rendered = prompt.render(spec, by_id[args.id])
    if args.text:
        sys.stdout.write(prompt.format_rendered(rendered))
        return 0
    _emit(
        args,
        {
            "fingerprint": rendered.fingerprint,
            "messages": [{"role": r, "content": c} for r, c in rendered.messages],
        },
    )
    return 0


def _cmd_run(args) -> int:
    records = dataset.load_records(args.records)
    spec = _prompt_spec(args, records)
    config = _model_config(args)
    items = tasks.run_task(records, args.task, spec, config, completer=_completer(args, config))
    tasks.write_results(items, args.out)
    if args.manifest:
        manifest = tasks.build_manifest(spec, config, items, seed=args.seed)
        with open(args.manifest, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, ensure_ascii=False, sort_keys=True)
            fh.write("\n")
    errors = sum(1 for i in items if i.error)
    print(f"ran {len(items)} records, {errors} errors -> {args.out}", file=sys.stderr)
    return 0


def _cmd_judge(args) -> int:
    items = tasks.read_results(args.results)
    records = dataset.load_records(args.records)
    by_id = {r.id: r for r in records}
    config = _model_config(args)
    scores = evaluation.judge_items(
        items, by_id, args.task, _completer(args, config), model=args.label, prefix=args.prefix
    )
    evaluation.write_scores(scores, args.out)
    print(f"scored {len(scores)} items -> {args.out}", file=sys.stderr)
    return 0


def _cmd_import_human(args) -> int:
    scores = evaluation.import_human_csv(args.csv)
    evaluation.write_scores(scores, args.out)
    print(f"imported {len(scores)} scores -> {args.out}", file=sys.stderr)
    return 0


def _cmd_report(args) -> int:
    scores = evaluation.read_scores(args.scores)
    if args.task:
        scores = [s for s in scores if s.task == args.task]
    if args.prefix:
        scores = [s for s in scores if s.prefix == args.prefix]
    if args.source:
        scores = [s for s in scores if s.source == args.source]
    report = evaluation.build_report(scores)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report.to_json(), fh, indent=2, ensure_ascii=False, sort_keys=True)
            fh.write("\n")
    sys.stdout.write(evaluation.render_table(report))
    return 0


# ---------------------------------------------------------------------------
# argument wiring

def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", default="mock", help="model name for the wire body and cache key")
    p.add_argument("--base-url", default="https://api.openai.com/v1")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--max-output-tokens", type=int, default=512)
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--max-retries", type=int, default=2)
    p.add_argument("--api-key-env", default="LLM_API_KEY")
    p.add_argument("--mock-script", type=_existing_file, default=None,
                   help="JSON object mapping fingerprints or substrings to replies; offline mode")
    p.add_argument("--cache-dir", default=None)


def _add_prompt_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--style", choices=prompt.STYLES, default="zero_shot")
    p.add_argument("--task", choices=prompt.TASKS, required=True)
    p.add_argument("--prefix", action="store_true", help="prepend the task-aware prefix line")
    p.add_argument("--taxonomy", type=_existing_file, default=None)
    p.add_argument("--examples-records", type=_existing_file, default=None)
    p.add_argument("--examples-count", type=int, default=3)
    p.add_argument("--examples-seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kginject")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-graphlet", help="check the two graphlet conditions")
    p.add_argument("--graph", type=_existing_file, required=True)
    p.add_argument("--graphlet", type=_existing_file, required=True)
    p.add_argument("--mode", type=_parse_mode, default=("lenient", "undirected"))
    p.add_argument("--rdf-type", default=store.RDF_TYPE)
    p.add_argument("--declarations", type=_existing_file, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_validate_graphlet)

    p = sub.add_parser("extract", help="extract a rooted graphlet instance")
    p.add_argument("--graph", type=_existing_file, required=True)
    p.add_argument("--graphlet", type=_existing_file, required=True)
    p.add_argument("--root", type=_parse_root, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--rdf-type", default=store.RDF_TYPE)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("query", help="evaluate a query locally or against an endpoint")
    p.add_argument("--query", type=_existing_file, required=True)
    p.add_argument("--graph", type=_existing_file, default=None)
    p.add_argument("--endpoint", default=None)
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("gen-sparql", help="compile a graphlet into SPARQL text")
    p.add_argument("--graph", type=_existing_file, required=True)
    p.add_argument("--graphlet", type=_existing_file, required=True)
    p.add_argument("--rdf-type", default=store.RDF_TYPE)
    p.add_argument("--declarations", type=_existing_file, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_gen_sparql)

    p = sub.add_parser("split", help="seeded train/test split of task-usable records")
    p.add_argument("--records", type=_existing_file, required=True)
    p.add_argument("--task", choices=prompt.TASKS, required=True)
    p.add_argument("--test-size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("export-finetune", help="write instruction-tuning JSONL")
    p.add_argument("--train", type=_existing_file, required=True)
    p.add_argument("--task", choices=prompt.TASKS, required=True)
    p.add_argument("--variant", choices=("task_independent", "task_driven"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_finetune)

    p = sub.add_parser("build-prompt", help="render one record's prompt")
    p.add_argument("--records", type=_existing_file, required=True)
    p.add_argument("--id", required=True)
    _add_prompt_flags(p)
    p.add_argument("--text", action="store_true", help="print plain text instead of JSON")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_build_prompt)

    p = sub.add_parser("run", help="run a task over records")
    p.add_argument("--records", type=_existing_file, required=True)
    _add_prompt_flags(p)
    _add_model_flags(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("judge", help="rubric-score run results with a judge model")
    p.add_argument("--results", type=_existing_file, required=True)
    p.add_argument("--records", type=_existing_file, required=True)
    p.add_argument("--task", choices=prompt.TASKS, required=True)
    p.add_argument("--label", required=True, help="evaluated model name for the report rows")
    p.add_argument("--prefix", choices=evaluation.PREFIXES, required=True)
    _add_model_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_judge)

    p = sub.add_parser("import-human", help="validate and convert a human scores CSV")
    p.add_argument("--csv", type=_existing_file, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_import_human)

    p = sub.add_parser("report", help="MAS tables from score JSONL")
    p.add_argument("--scores", type=_existing_file, required=True)
    p.add_argument("--task", choices=prompt.TASKS, default=None)
    p.add_argument("--prefix", choices=evaluation.PREFIXES, default=None)
    p.add_argument("--source", choices=evaluation.SOURCES, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    if args.command == "query" and not args.endpoint and not args.graph:
        print("query: either --graph or --endpoint is required", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (
        store.ParseError,
        store.SchemaError,
        graphlet.UnknownIriError,
        graphlet.GraphletValidationError,
        query.QuerySyntaxError,
        query.EndpointError,
        dataset.RecordError,
        prompt.PromptError,
        prompt.TaxonomyError,
        evaluation.CsvFormatError,
        evaluation.JudgeParseError,
        llm.LlmError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
