"""Config-space expansion and resumable sweep execution over the run store.

A sweep owns one directory: ``manifest.json``, ``runs.jsonl``,
``perturbations.jsonl``, plus shared ``chunks/`` and ``indexes/`` artifacts
keyed by content digests so distinct configs reuse them. Everything is
written canonically; a sweep rerun, a resumed sweep, and a sweep run with a
different worker count produce byte-identical stores.
"""

from __future__ import annotations

import json
import shutil
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Any, Mapping, Sequence

from ragscope.attribution import AttributionPolicy
from ragscope.comparison import label_histogram
from ragscope.corpus import ChunkingParams, chunk_corpus, chunking_digest, read_chunk_store, write_chunk_store
from ragscope.domain import (
    ConfigSpace,
    Document,
    OutcomeLabel,
    Question,
    RagConfig,
    RunRecord,
    canonical_config_id,
    validate_config_space,
)
from ragscope.metrics import MetricReport, aggregate
from ragscope.pipeline import RunContext, run_question
from ragscope.providers import ProviderSpec, lookup
from ragscope.retrieval import build_index, load_index, save_index
from ragscope.store import (
    SweepPaths,
    atomic_write_text,
    canonical_json,
    digest12,
    read_jsonl,
    store_sweeps_dir,
)

DEFAULT_MAX_ERROR_RATE = 0.5

STATUS_RUNNING = "running"
STATUS_COMPLETE = "complete"
STATUS_FAILED = "failed"


class SpaceValidationError(ValueError):
    def __init__(self, violations: Sequence[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


def expand(space: ConfigSpace) -> list[RagConfig]:
    """All configurations of a space, lexicographic over option indices."""
    violations = validate_config_space(space)
    if violations:
        raise SpaceValidationError(violations)
    configs = []
    option_lists = [values for _, values in space.field_options()]
    for combo in product(*option_lists):
        configs.append(RagConfig(*combo))
    return configs


@dataclass
class SweepManifest:
    """Summary of one sweep: the space, its configs, and per-config results."""

    sweep_id: str
    space: ConfigSpace
    config_ids: list[str]
    configs: dict[str, RagConfig]
    reports: dict[str, MetricReport] = field(default_factory=dict)
    histograms: dict[str, dict[str, int]] = field(default_factory=dict)
    status: str = STATUS_RUNNING
    seed: int = 0
    corpus_digest: str = ""
    questions_digest: str = ""
    n_runs: int = 0
    n_errors: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "sweep_id": self.sweep_id,
            "space": self.space.to_dict(),
            "config_ids": list(self.config_ids),
            "configs": {cid: c.to_dict() for cid, c in self.configs.items()},
            "reports": {cid: r.to_dict() for cid, r in self.reports.items()},
            "histograms": self.histograms,
            "status": self.status,
            "seed": self.seed,
            "corpus_digest": self.corpus_digest,
            "questions_digest": self.questions_digest,
            "n_runs": self.n_runs,
            "n_errors": self.n_errors,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SweepManifest":
        return cls(
            sweep_id=d["sweep_id"],
            space=ConfigSpace.from_dict(d["space"]),
            config_ids=list(d["config_ids"]),
            configs={cid: RagConfig.from_dict(c) for cid, c in d["configs"].items()},
            reports={cid: MetricReport.from_dict(r) for cid, r in d["reports"].items()},
            histograms={cid: dict(h) for cid, h in d["histograms"].items()},
            status=d["status"],
            seed=d["seed"],
            corpus_digest=d.get("corpus_digest", ""),
            questions_digest=d.get("questions_digest", ""),
            n_runs=d.get("n_runs", 0),
            n_errors=d.get("n_errors", 0),
        )


def load_manifest(sweep_dir: Path) -> SweepManifest:
    return SweepManifest.from_dict(
        json.loads((Path(sweep_dir) / "manifest.json").read_text(encoding="utf-8"))
    )


def load_runs(sweep_dir: Path) -> list[RunRecord]:
    paths = SweepPaths(Path(sweep_dir))
    if not paths.runs.exists():
        return []
    return [RunRecord.from_dict(d) for d in read_jsonl(paths.runs, skip_bad_tail=True)]


def _digest_docs(corpus: Sequence[Document]) -> str:
    return digest12("\n".join(canonical_json(d.to_dict()) for d in corpus))


def _digest_questions(questions: Sequence[Question]) -> str:
    return digest12("\n".join(canonical_json(q.to_dict()) for q in questions))


def sweep_id_for(space: ConfigSpace, corpus_digest: str, questions_digest: str) -> str:
    return digest12(
        canonical_json(
            {
                "space": space.to_dict(),
                "corpus": corpus_digest,
                "questions": questions_digest,
            }
        )
    )


def _copy_registry(registry: Mapping[str, ProviderSpec], paths: SweepPaths) -> dict[str, ProviderSpec]:
    """Persist the provider registry inside the sweep dir, localizing fixtures.

    Scripted fixture files are copied under fixtures/ so the store is
    self-contained for later `serve` / `perturb` invocations.
    """
    localized: dict[str, ProviderSpec] = {}
    serializable: dict[str, Any] = {}
    for name in sorted(registry):
        spec = registry[name]
        if spec.fixture_path:
            src = Path(spec.fixture_path)
            dst = paths.fixtures_dir / f"{name}__{src.name}"
            if src.resolve() != dst.resolve():
                shutil.copyfile(src, dst)
            spec = ProviderSpec.from_dict(
                name, {**spec.to_dict(), "fixture_path": str(dst)}
            )
        localized[name] = spec
        entry = spec.to_dict()
        if entry["fixture_path"]:
            entry["fixture_path"] = str(Path(entry["fixture_path"]).relative_to(paths.root))
        serializable[name] = entry
    atomic_write_text(paths.providers, canonical_json(serializable) + "\n")
    return localized


def load_store_registry(sweep_dir: Path) -> dict[str, ProviderSpec]:
    """Read the registry copied into a sweep dir (fixture paths are relative)."""
    sweep_dir = Path(sweep_dir)
    raw = json.loads((sweep_dir / "providers.json").read_text(encoding="utf-8"))
    registry: dict[str, ProviderSpec] = {}
    for name, entry in raw.items():
        if entry.get("fixture_path"):
            entry = {**entry, "fixture_path": str(sweep_dir / entry["fixture_path"])}
        registry[name] = ProviderSpec.from_dict(name, entry)
    return registry


def _single_judge(registry: Mapping[str, ProviderSpec]) -> ProviderSpec:
    judges = [s for s in registry.values() if s.kind == "judge"]
    if len(judges) != 1:
        raise ValueError(f"registry must contain exactly one judge, found {len(judges)}")
    return judges[0]


@dataclass
class SweepResult:
    manifest: SweepManifest
    sweep_dir: Path
    new_runs: int
    remaining: int

    @property
    def finished(self) -> bool:
        return self.remaining == 0


def execute(
    out_root: Path,
    space: ConfigSpace,
    corpus: Sequence[Document],
    questions: Sequence[Question],
    registry: Mapping[str, ProviderSpec],
    workers: int | None = None,
    seed: int = 0,
    max_error_rate: float = DEFAULT_MAX_ERROR_RATE,
    max_new_runs: int | None = None,
    policy: AttributionPolicy | None = None,
) -> SweepResult:
    """Run every (config, question) pair of a space, resumably.

    Chunk stores and indexes are built once per distinct (chunking, embedder)
    pair. Completed (config_id, question_id) keys found in runs.jsonl are
    skipped, so re-running after an interruption finishes the sweep; with
    ``max_new_runs`` the sweep checkpoints after that many new runs and
    returns without finalizing. Output files are canonically sorted, making
    stores byte-identical regardless of worker count or interruptions.
    """
    configs = expand(space)
    policy = policy or AttributionPolicy()
    judge_spec = _single_judge(registry)
    corpus_digest = _digest_docs(corpus)
    questions_digest = _digest_questions(questions)
    sweep_id = sweep_id_for(space, corpus_digest, questions_digest)
    sweep_dir = store_sweeps_dir(out_root) / sweep_id
    paths = SweepPaths(sweep_dir)
    paths.ensure_dirs()
    registry = _copy_registry(registry, paths)
    judge_spec = registry[judge_spec.name]

    manifest = SweepManifest(
        sweep_id=sweep_id,
        space=space,
        config_ids=[canonical_config_id(c) for c in configs],
        configs={canonical_config_id(c): c for c in configs},
        seed=seed,
        corpus_digest=corpus_digest,
        questions_digest=questions_digest,
    )

    # Shared artifacts: one chunk store per chunking, one index per
    # (chunking, embedder); both skipped when already on disk.
    chunkings = sorted(
        {(c.chunk_size, c.chunk_overlap) for c in configs}
    )
    chunk_stores: dict[tuple[int, int], tuple[str, list]] = {}
    for size, overlap in chunkings:
        params = ChunkingParams(size, overlap)
        digest = chunking_digest(params, corpus_digest)
        path = paths.chunk_store(digest)
        if path.exists():
            chunks = read_chunk_store(path)
        else:
            chunks = chunk_corpus(corpus, params)
            write_chunk_store(path, chunks)
        chunk_stores[(size, overlap)] = (digest, chunks)

    embedder_names = sorted({c.embedding_model for c in configs})
    indexes: dict[tuple[str, str], Any] = {}
    for (size, overlap), (digest, chunks) in sorted(chunk_stores.items()):
        for name in embedder_names:
            embedder = lookup(registry, name, "embed")
            index_path = paths.index_file(digest, name)
            if index_path.exists():
                indexes[(digest, name)] = load_index(index_path)
            else:
                checkpoint = index_path.with_suffix(".partial")
                index = build_index(chunks, embedder, digest, checkpoint=checkpoint)
                save_index(index, index_path)
                indexes[(digest, name)] = index

    # One RunContext per config; configs sharing a chunking share one evidence
    # cache since locations depend only on (question, chunk store).
    evidence_caches: dict[str, dict] = {
        digest: {} for digest, _ in chunk_stores.values()
    }
    contexts: dict[str, RunContext] = {}
    for config in configs:
        config_id = canonical_config_id(config)
        digest, chunks = chunk_stores[(config.chunk_size, config.chunk_overlap)]
        contexts[config_id] = RunContext(
            chunks=chunks,
            index=indexes[(digest, config.embedding_model)],
            embedder=lookup(registry, config.embedding_model, "embed"),
            reranker=(
                None
                if config.rerank_model is None
                else lookup(registry, config.rerank_model, "rerank")
            ),
            generator=lookup(registry, config.response_model, "generate"),
            judge=judge_spec,
            policy=policy,
            evidence_cache=evidence_caches[digest],
        )

    done: set[tuple[str, str]] = set()
    existing: list[dict[str, Any]] = []
    if paths.runs.exists():
        existing = read_jsonl(paths.runs, skip_bad_tail=True)
        done = {(r["config_id"], r["question_id"]) for r in existing}
        # Rewrite before appending so a truncated tail line from a killed
        # writer cannot corrupt the next appended record.
        atomic_write_text(paths.runs, "".join(canonical_json(r) + "\n" for r in existing))

    tasks = [
        (config, question)
        for config in configs
        for question in questions
        if (canonical_config_id(config), question.question_id) not in done
    ]
    capped = tasks if max_new_runs is None else tasks[:max_new_runs]
    remaining = len(tasks) - len(capped)

    # Warm evidence caches sequentially so worker scheduling cannot interleave
    # cache construction.
    for config, question in capped:
        contexts[canonical_config_id(config)].locations_for(question)

    new_rows: list[dict[str, Any]] = []
    if capped:
        pool_size = max(1, workers or 1)
        with open(paths.runs, "a", encoding="utf-8") as sink:
            with ThreadPoolExecutor(max_workers=pool_size) as pool:
                futures = {
                    pool.submit(
                        run_question, config, question, contexts[canonical_config_id(config)]
                    ): (config, question)
                    for config, question in capped
                }
                for future in as_completed(futures):
                    record = future.result()
                    row = record.to_dict()
                    sink.write(canonical_json(row) + "\n")
                    sink.flush()
                    new_rows.append(row)

    all_rows = existing + new_rows
    all_rows.sort(key=lambda r: (r["config_id"], r["question_id"]))
    atomic_write_text(paths.runs, "".join(canonical_json(r) + "\n" for r in all_rows))

    if remaining > 0:
        manifest.status = STATUS_RUNNING
        manifest.n_runs = len(all_rows)
        atomic_write_text(paths.manifest, canonical_json(manifest.to_dict()) + "\n")
        return SweepResult(manifest, sweep_dir, len(new_rows), remaining)

    records = [RunRecord.from_dict(r) for r in all_rows]
    by_config: dict[str, list[RunRecord]] = {cid: [] for cid in manifest.config_ids}
    for record in records:
        by_config.setdefault(record.config_id, []).append(record)
    n_errors = 0
    for config_id in manifest.config_ids:
        config = manifest.configs[config_id]
        config_records = by_config[config_id]
        manifest.reports[config_id] = aggregate(config_records, k=config.top_k)
        histogram = label_histogram(config_records)
        manifest.histograms[config_id] = {
            label.value: histogram[label] for label in OutcomeLabel
        }
        n_errors += sum(1 for r in config_records if r.error is not None)
    manifest.n_runs = len(records)
    manifest.n_errors = n_errors
    error_rate = n_errors / len(records) if records else 0.0
    manifest.status = STATUS_FAILED if error_rate > max_error_rate else STATUS_COMPLETE
    atomic_write_text(paths.manifest, canonical_json(manifest.to_dict()) + "\n")
    return SweepResult(manifest, sweep_dir, len(new_rows), 0)
