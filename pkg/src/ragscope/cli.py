"""Operator command line: ingest, sweep, compare, report, serve, perturb.

Every command exits 0 on success and nonzero with a one-line error on
stderr; ``--json`` switches human-readable tables to JSON on stdout.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from ragscope.comparison import transition_matrix
from ragscope.corpus import CorpusLoadError, load_corpus, load_questions
from ragscope.domain import ConfigSpace, OUTCOME_ORDER, OutcomeLabel
from ragscope.metrics import METRIC_NAMES, aggregate
from ragscope.perturbation import (
    PerturbationRequest,
    UnresolvableChunkError,
    append_perturbation,
    perturb_and_regenerate,
)
from ragscope.providers import FixtureMissError, ProviderError, load_registry, lookup
from ragscope.store import read_jsonl, resolve_sweep_dir, write_jsonl
from ragscope.sweep import (
    SpaceValidationError,
    execute,
    load_manifest,
    load_runs,
    load_store_registry,
)


class CliError(Exception):
    def __init__(self, message: str, exit_code: int = 1):
        super().__init__(message)
        self.exit_code = exit_code


def _load_space(path: Path) -> ConfigSpace:
    try:
        return ConfigSpace.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except FileNotFoundError:
        raise CliError(f"space file not found: {path}")
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CliError(f"invalid space file {path}: {exc}")


def _emit(args: argparse.Namespace, human: str, payload: dict[str, Any]) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(human)


def cmd_ingest(args: argparse.Namespace) -> int:
    try:
        docs = load_corpus(Path(args.corpus))
        questions = load_questions(Path(args.questions))
    except CorpusLoadError as exc:
        raise CliError(str(exc))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(out / "corpus.jsonl", (d.to_dict() for d in docs))
    write_jsonl(out / "questions.jsonl", (q.to_dict() for q in questions))
    _emit(
        args,
        f"docs={len(docs)} questions={len(questions)}",
        {"docs": len(docs), "questions": len(questions), "out": str(out)},
    )
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    out = Path(args.out)
    corpus_path = out / "corpus.jsonl"
    questions_path = out / "questions.jsonl"
    if not corpus_path.exists() or not questions_path.exists():
        raise CliError(f"{out} is not an ingested store (run `ragscope ingest` first)")
    space = _load_space(Path(args.space))
    try:
        registry = load_registry(Path(args.providers))
    except (FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        raise CliError(f"invalid providers file {args.providers}: {exc}")
    try:
        docs = load_corpus(corpus_path)
        questions = load_questions(questions_path)
    except CorpusLoadError as exc:
        raise CliError(str(exc))
    try:
        result = execute(
            out,
            space,
            docs,
            questions,
            registry,
            workers=args.workers,
            seed=args.seed,
            max_new_runs=args.max_new_runs,
        )
    except SpaceValidationError as exc:
        raise CliError("invalid config space: " + "; ".join(exc.violations))
    except (ProviderError, FixtureMissError, ValueError, KeyError) as exc:
        raise CliError(f"sweep failed: {exc}")
    manifest = result.manifest
    if not result.finished:
        _emit(
            args,
            f"checkpointed {result.new_runs} new runs, {result.remaining} remaining "
            f"(rerun to resume): {result.sweep_dir}",
            {"sweep_dir": str(result.sweep_dir), "remaining": result.remaining},
        )
        return 0
    lines = [f"sweep {manifest.sweep_id} {manifest.status}: {result.sweep_dir / 'manifest.json'}"]
    lines.append(f"{'config':<14} {'accuracy':>8}")
    for cid in manifest.config_ids:
        lines.append(f"{cid:<14} {manifest.reports[cid].accuracy:>8.3f}")
    _emit(args, "\n".join(lines), manifest.to_dict())
    return 0 if manifest.status == "complete" else 1


def _resolve(args: argparse.Namespace) -> Path:
    try:
        return resolve_sweep_dir(Path(args.sweep), getattr(args, "sweep_id", None))
    except FileNotFoundError as exc:
        raise CliError(str(exc))


def _records_for(sweep_dir: Path, config_id: str) -> list:
    manifest = load_manifest(sweep_dir)
    if config_id not in manifest.configs:
        raise CliError(f"unknown config id {config_id!r}")
    return [r for r in load_runs(sweep_dir) if r.config_id == config_id]


def cmd_compare(args: argparse.Namespace) -> int:
    sweep_dir = _resolve(args)
    records_a = _records_for(sweep_dir, args.a)
    records_b = _records_for(sweep_dir, args.b)
    try:
        matrix = transition_matrix(records_a, records_b)
    except ValueError as exc:
        raise CliError(str(exc))
    if args.flow:
        try:
            from_name, to_name = args.flow.split(":", 1)
            flow = (OutcomeLabel(from_name), OutcomeLabel(to_name))
        except ValueError:
            raise CliError(f"bad --flow {args.flow!r}; expected FROM:TO outcome labels")
        qids = list(matrix.question_ids.get(flow, ()))
        _emit(args, "\n".join(qids) if qids else "(no questions)", {"question_ids": qids})
        return 0
    if args.json:
        print(json.dumps(matrix.to_dict(), indent=2, sort_keys=True))
        return 0
    short = [label.value.split("_")[0] for label in OUTCOME_ORDER]
    width = max(len(s) for s in short) + 2
    header = " " * width + "".join(f"{s:>{width}}" for s in short)
    lines = [f"rows: {args.a}  columns: {args.b}", header]
    for label, row in zip(OUTCOME_ORDER, matrix.counts):
        cells = "".join(f"{c:>{width}}" for c in row)
        lines.append(f"{label.value.split('_')[0]:<{width}}{cells}")
    print("\n".join(lines))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    if args.metric not in METRIC_NAMES:
        raise CliError(f"unknown metric {args.metric!r}; expected one of {METRIC_NAMES}")
    sweep_dir = _resolve(args)
    manifest = load_manifest(sweep_dir)
    reports = manifest.reports
    if args.pre_rerank:
        records = load_runs(sweep_dir)
        by_config: dict[str, list] = {}
        for r in records:
            by_config.setdefault(r.config_id, []).append(r)
        reports = {
            cid: aggregate(rs, k=manifest.configs[cid].top_k, pre_rerank=True)
            for cid, rs in by_config.items()
        }
    ordered = sorted(
        manifest.config_ids, key=lambda cid: (-reports[cid].value(args.metric), cid)
    )
    rows = [reports[cid].to_dict() for cid in ordered]
    for row in rows:
        row.update(manifest.configs[row["config_id"]].options())
    if args.csv:
        fieldnames = list(rows[0].keys())
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(rows)
        _emit(args, f"wrote {len(rows)} rows to {args.csv}", {"rows": len(rows), "csv": args.csv})
        return 0
    if args.json:
        print(json.dumps(rows, indent=2, sort_keys=True))
        return 0
    print(f"{'config':<14} {args.metric:>10}")
    for row in rows:
        print(f"{row['config_id']:<14} {row[args.metric if args.metric != 'recall' else 'recall_at_k']:>10.4f}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from ragscope.api import create_app

    store_root = Path(args.sweep)
    ui_dir = Path(args.ui) if args.ui else None
    app = create_app(store_root, ui_dir=ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_perturb(args: argparse.Namespace) -> int:
    sweep_dir = _resolve(args)
    manifest = load_manifest(sweep_dir)
    if args.config not in manifest.configs:
        raise CliError(f"unknown config id {args.config!r}")
    records = {r.question_id: r for r in load_runs(sweep_dir) if r.config_id == args.config}
    base = records.get(args.qid)
    if base is None or base.error is not None:
        raise CliError(f"no usable base run for question {args.qid!r}")
    store_root = sweep_dir.parent.parent
    questions_path = store_root / "questions.jsonl"
    if not questions_path.exists():
        raise CliError(f"store has no questions.jsonl next to {sweep_dir}")
    questions = {q.question_id: q for q in load_questions(questions_path)}
    if args.qid not in questions:
        raise CliError(f"question {args.qid!r} not in the store")
    registry = load_store_registry(sweep_dir)
    generator = lookup(registry, manifest.configs[args.config].response_model, "generate")
    judges = [s for s in registry.values() if s.kind == "judge"]
    if not judges:
        raise CliError("store registry has no judge provider")
    from ragscope.corpus import ChunkingParams, chunking_digest
    from ragscope.domain import Chunk
    from ragscope.store import SweepPaths

    paths = SweepPaths(sweep_dir)
    resolver: dict[str, Chunk] = {}
    for path in sorted(paths.chunks_dir.glob("*.jsonl")):
        for row in read_jsonl(path):
            chunk = Chunk.from_dict(row)
            resolver[chunk.chunk_id] = chunk
    # the base config's own store wins chunk-id collisions across chunkings
    config = manifest.configs[args.config]
    base_digest = chunking_digest(
        ChunkingParams(config.chunk_size, config.chunk_overlap), manifest.corpus_digest
    )
    base_store = paths.chunk_store(base_digest)
    if base_store.exists():
        for row in read_jsonl(base_store):
            chunk = Chunk.from_dict(row)
            resolver[chunk.chunk_id] = chunk
    context_ids = [c for c in args.context.split(",") if c] if args.context else []
    try:
        req = PerturbationRequest(
            config_id=args.config,
            question_id=args.qid,
            context_chunk_ids=tuple(context_ids),
            note=args.note,
            allow_empty_context=args.allow_empty,
        )
        result = perturb_and_regenerate(
            req, base, questions[args.qid], resolver, generator, judges[0]
        )
    except UnresolvableChunkError as exc:
        raise CliError(str(exc))
    except (ProviderError, FixtureMissError, ValueError) as exc:
        raise CliError(str(exc))
    append_perturbation(paths.perturbations, req, result)
    verdict_word = {True: "correct", False: "incorrect"}
    lines = []
    if result.answer_pert == result.answer_orig:
        lines.append("answer unchanged")
    else:
        lines.append(f"answer changed: {result.answer_orig!r} -> {result.answer_pert!r}")
    lines.append(
        f"verdict: {verdict_word[result.verdict_orig]} -> {verdict_word[result.verdict_pert]}"
    )
    lines.append(f"context label: {result.context_label.value}")
    _emit(args, "\n".join(lines), result.to_dict())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ragscope",
        description="Sweep, score, and diagnose RAG pipeline configurations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and normalize a corpus + questions into a store")
    p.add_argument("--corpus", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("sweep", help="expand a config space and run every (config, question)")
    p.add_argument("--space", required=True)
    p.add_argument("--providers", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-new-runs", type=int, default=None, help="checkpoint after N new runs")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="outcome-transition matrix between two configs")
    p.add_argument("--sweep", required=True)
    p.add_argument("--sweep-id", default=None)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--flow", default=None, help="FROM:TO outcome labels; prints question ids")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="per-config metric table / CSV export")
    p.add_argument("--sweep", required=True)
    p.add_argument("--sweep-id", default=None)
    p.add_argument("--metric", default="accuracy")
    p.add_argument("--csv", default=None)
    p.add_argument("--pre-rerank", action="store_true", help="recompute on the raw retrieval")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="HTTP API (and UI, if built) over a sweep store")
    p.add_argument("--sweep", required=True, help="store root (the sweep --out directory)")
    p.add_argument("--port", type=int, default=7341)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui", default=None, help="directory of built UI assets to serve at /")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("perturb", help="regenerate one question with a curated context")
    p.add_argument("--sweep", required=True)
    p.add_argument("--sweep-id", default=None)
    p.add_argument("--config", required=True)
    p.add_argument("--qid", required=True)
    p.add_argument("--context", required=True, help="comma-separated chunk ids")
    p.add_argument("--note", default="")
    p.add_argument("--allow-empty", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_perturb)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
