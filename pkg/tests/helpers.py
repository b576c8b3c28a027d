"""Builders for designed run records and fabricated sweep stores.

Comparison, API and frontend-fixture tests need stores with exact outcome
labels and flows; fabricating the store files directly (the stored schema is
the contract) is far more controllable than coaxing the mock pipeline into
specific failures.
"""

from __future__ import annotations

import json
from pathlib import Path

from ragscope.corpus import ChunkingParams, chunking_digest
from ragscope.domain import (
    Chunk,
    CoverageStats,
    JudgeDecision,
    OutcomeLabel,
    ParsedResponse,
    Question,
    RagConfig,
    RunRecord,
    canonical_config_id,
)
from ragscope.metrics import aggregate
from ragscope.comparison import label_histogram
from ragscope.prompting import scripted_key
from ragscope.store import SweepPaths, atomic_write_text, canonical_json, write_jsonl
from ragscope.sweep import SweepManifest


def make_response(answer: str, strict: bool = True, supporting: tuple[str, ...] = ()) -> ParsedResponse:
    if strict:
        raw = json.dumps({"supporting_sentences": list(supporting), "final_answer": answer})
    else:
        raw = f"Answer: {answer}"
    return ParsedResponse(supporting, answer, strict, raw)


def make_record(
    config_id: str,
    question_id: str,
    outcome: OutcomeLabel,
    ranking: list[tuple[str, float]] | None = None,
    top_k: int = 2,
    correct: bool | None = None,
    strict: bool = True,
    answer: str = "x",
    supporting: tuple[str, ...] = (),
    coverage: tuple[int, int, int] = (1, 1, 1),
    relevant: tuple[str, ...] = (),
) -> RunRecord:
    """A designed record; coverage is (total, in_range, in_context)."""
    ranking = ranking if ranking is not None else [("d:0", 1.0), ("d:100", 0.5)]
    total, in_range, in_context = coverage
    return RunRecord(
        config_id=config_id,
        question_id=question_id,
        retrieved=tuple(ranking),
        reranked=tuple(ranking),
        context_chunk_ids=tuple(cid for cid, _ in ranking[:top_k]),
        response=make_response(answer, strict, supporting),
        judge_verdict=JudgeDecision(
            correct if correct is not None else outcome is OutcomeLabel.CORRECT,
            "designed",
        ),
        outcome=outcome,
        coverage=CoverageStats.from_counts(total, in_range, in_context),
        relevant_chunk_ids=relevant,
    )


def chunk_of(doc_id: str, start: int, text: str) -> Chunk:
    return Chunk.make(doc_id, text, start, start + len(text))


def write_fabricated_store(
    root: Path,
    configs: dict[str, RagConfig],
    records: list[RunRecord],
    questions: list[Question],
    chunks_by_config: dict[str, list[Chunk]],
    scripted_responses: dict[str, str] | None = None,
    corpus_digest: str = "fabricated000",
) -> Path:
    """Write a complete, servable store with designed records.

    ``configs`` maps config_id -> RagConfig (ids must be canonical for their
    configs); each config's chunk list is written to the chunk store its
    chunking params resolve to. Returns the sweep directory.
    """
    root = Path(root)
    write_jsonl(root / "questions.jsonl", (q.to_dict() for q in questions))
    sweep_id = "fab0000sweep"
    sweep_dir = root / "sweeps" / sweep_id
    paths = SweepPaths(sweep_dir)
    paths.ensure_dirs()

    fields = {f: [] for f in ("embedding_model", "rerank_model", "response_model",
                              "chunk_size", "chunk_overlap", "retrieval_depth", "top_k")}
    for config in configs.values():
        for f in fields:
            v = getattr(config, f)
            v = "none" if v is None else v
            if v not in fields[f]:
                fields[f].append(v)
    from ragscope.domain import ConfigSpace

    space = ConfigSpace.from_dict(fields)

    for config_id, config in configs.items():
        assert canonical_config_id(config) == config_id, "config ids must be canonical"
        digest = chunking_digest(
            ChunkingParams(config.chunk_size, config.chunk_overlap), corpus_digest
        )
        write_jsonl(paths.chunk_store(digest), (c.to_dict() for c in chunks_by_config[config_id]))

    rows = sorted(
        (r.to_dict() for r in records), key=lambda r: (r["config_id"], r["question_id"])
    )
    atomic_write_text(paths.runs, "".join(canonical_json(r) + "\n" for r in rows))

    by_config: dict[str, list[RunRecord]] = {cid: [] for cid in configs}
    for record in records:
        by_config[record.config_id].append(record)
    manifest = SweepManifest(
        sweep_id=sweep_id,
        space=space,
        config_ids=sorted(configs),
        configs=dict(configs),
        reports={
            cid: aggregate(rs, k=configs[cid].top_k) for cid, rs in by_config.items()
        },
        histograms={
            cid: {label.value: n for label, n in label_histogram(rs).items()}
            for cid, rs in by_config.items()
        },
        status="complete",
        corpus_digest=corpus_digest,
        n_runs=len(records),
    )
    atomic_write_text(paths.manifest, canonical_json(manifest.to_dict()) + "\n")

    fixture_rel = "fixtures/scripted.json"
    if scripted_responses is not None:
        atomic_write_text(
            paths.fixtures_dir / "scripted.json", canonical_json(scripted_responses) + "\n"
        )
    registry = {
        "scripted-gen": {
            "kind": "generate",
            "mode": "mock_scripted",
            "name": "scripted-gen",
            "fixture_path": fixture_rel if scripted_responses is not None else None,
            "endpoint": None,
            "auth_env_var": None,
            "dimension": None,
            "max_in_flight": 4,
        },
        "token-judge": {
            "kind": "judge",
            "mode": "mock_lexical",
            "name": "token-judge",
            "fixture_path": None,
            "endpoint": None,
            "auth_env_var": None,
            "dimension": None,
            "max_in_flight": 4,
        },
    }
    if scripted_responses is None:
        registry["scripted-gen"] = {
            "kind": "generate",
            "mode": "mock_lexical",
            "name": "scripted-gen",
            "fixture_path": None,
            "endpoint": None,
            "auth_env_var": None,
            "dimension": None,
            "max_in_flight": 4,
        }
    atomic_write_text(paths.providers, canonical_json(registry) + "\n")
    return sweep_dir


EV = "The Zephyr array was built by Heliodyne"


def fabricate_comparison_store(tmp_path) -> tuple[str, str, str]:
    """Two designed configs with known labels, flows and chunk stores.

    Returns (sweep_id, config_id_a, config_id_b). Config A carries an
    FP2->FP3 flow of exactly {q2, q3} into config B, plus a scripted
    distractor flip on q7.
    """
    config_a = RagConfig("hash-embed-256", None, "scripted-gen", 200, 50, 4, 2)
    config_b = RagConfig("hash-embed-256", None, "scripted-gen", 400, 50, 4, 2)
    a, b = canonical_config_id(config_a), canonical_config_id(config_b)

    chunks_a = [
        chunk_of("a1", 0, f"{EV}. Coastal grid notes follow here."),
        chunk_of("a2", 0, "The Zephyr array brochure was printed by Granite Press."),
        chunk_of("a1", 100, "Wholly unrelated filler about gardens and weather."),
    ]
    chunks_b = [
        chunk_of("b1", 0, f"{EV}. Different tail content in this store."),
        chunk_of("b2", 0, "Unrelated prose about harbors and tide gauges."),
    ]
    ranking_a = [("a1:0", 0.9), ("a2:0", 0.7), ("a1:100", 0.2)]
    ranking_b = [("b1:0", 0.8), ("b2:0", 0.3)]

    from ragscope.domain import EvidenceRef

    def q(qid, text="Who built the Zephyr array?", gt="Heliodyne", ev=(EV,)):
        return Question(qid, text, gt, tuple(EvidenceRef("", s) for s in ev))

    questions = [
        q("q1"),
        q("q2"), q("q3"),
        q("q4"),
        Question("q5", "What is the array's mass?", "insufficient information", ()),
        q("q6"),
        q("q7"),
    ]

    def rec(cid, qid, outcome, ranking, **kw):
        return make_record(cid, qid, outcome, ranking=list(ranking), relevant=("a1:0", "b1:0"), **kw)

    records = [
        rec(a, "q1", OutcomeLabel.CORRECT, ranking_a, answer="Heliodyne", coverage=(1, 1, 1)),
        rec(b, "q1", OutcomeLabel.CORRECT, ranking_b, answer="Heliodyne", coverage=(1, 1, 1)),
        rec(a, "q2", OutcomeLabel.FP2_MISSED_TOP_RANKED, ranking_a, coverage=(2, 1, 0)),
        rec(b, "q2", OutcomeLabel.FP3_NOT_IN_CONTEXT, ranking_b, coverage=(2, 2, 1)),
        rec(a, "q3", OutcomeLabel.FP2_MISSED_TOP_RANKED, ranking_a, coverage=(2, 1, 0)),
        rec(b, "q3", OutcomeLabel.FP3_NOT_IN_CONTEXT, ranking_b, coverage=(2, 2, 1)),
        rec(a, "q4", OutcomeLabel.CORRECT, ranking_a, answer="Heliodyne", coverage=(1, 1, 1)),
        rec(b, "q4", OutcomeLabel.FP4_NOT_EXTRACTED, ranking_b, answer="Granite", coverage=(1, 1, 1)),
        rec(a, "q5", OutcomeLabel.FP1_MISSING_CONTENT, ranking_a, answer="heavy", coverage=(0, 0, 0)),
        rec(b, "q5", OutcomeLabel.FP1_MISSING_CONTENT, ranking_b, answer="light", coverage=(0, 0, 0)),
        rec(a, "q6", OutcomeLabel.FP5_WRONG_FORMAT, ranking_a, strict=False, coverage=(1, 1, 1)),
        rec(b, "q6", OutcomeLabel.CORRECT, ranking_b, answer="Heliodyne", coverage=(1, 1, 1)),
        rec(a, "q7", OutcomeLabel.FP4_NOT_EXTRACTED, ranking_a, answer="Granite Press",
            coverage=(1, 1, 1)),
        rec(b, "q7", OutcomeLabel.FP4_NOT_EXTRACTED, ranking_b, answer="Granite Press",
            coverage=(1, 1, 1)),
    ]
    scripted = {
        # identity perturbation of A/q1 reproduces the stored raw exactly
        scripted_key("q1", ["a1:0", "a2:0"]): make_response("Heliodyne").raw,
        # dropping the distractor flips A/q7 from incorrect to correct
        scripted_key("q7", ["a1:0", "a2:0"]): make_response("Granite Press").raw,
        scripted_key("q7", ["a1:0"]): make_response("Heliodyne").raw,
    }
    sweep_dir = write_fabricated_store(
        tmp_path,
        configs={a: config_a, b: config_b},
        records=records,
        questions=questions,
        chunks_by_config={a: chunks_a, b: chunks_b},
        scripted_responses=scripted,
    )
    return sweep_dir.name, a, b


def random_mini_run(seed: int) -> list[RunRecord]:
    """Run a random tiny corpus/question set through the real mock pipeline.

    Deterministic per seed; used for randomized invariant checks (label
    partition, coverage monotonicity).
    """
    import random

    from ragscope.attribution import AttributionPolicy
    from ragscope.corpus import ChunkingParams as CP, chunk_corpus
    from ragscope.domain import Document, EvidenceRef
    from ragscope.pipeline import RunContext, run_question
    from ragscope.providers import ProviderSpec
    from ragscope.retrieval import build_index

    rng = random.Random(seed)
    vocab = [f"term{i}" for i in range(30)] + ["alpha", "beta", "gamma", "delta"]

    def sentence() -> str:
        return " ".join(rng.choices(vocab, k=rng.randint(4, 9))).capitalize() + "."

    docs = []
    for d in range(rng.randint(4, 7)):
        body = " ".join(sentence() for _ in range(rng.randint(4, 8)))
        docs.append(Document(f"doc{d}", f"Doc {d}", body))

    questions = []
    for qi in range(rng.randint(6, 10)):
        if rng.random() < 0.25:
            questions.append(
                Question(f"rq{qi}", " ".join(rng.choices(vocab, k=4)) + "?",
                         "insufficient information", ())
            )
            continue
        doc = rng.choice(docs)
        sentences = [s for s in doc.body.split(". ") if s]
        ev = rng.choice(sentences).rstrip(".")
        tokens = ev.split()
        start = rng.randrange(len(tokens))
        answer = " ".join(tokens[start : start + rng.randint(1, 3)])
        questions.append(
            Question(
                f"rq{qi}",
                " ".join(rng.choices(tokens, k=min(3, len(tokens)))) + "?",
                answer,
                (EvidenceRef(doc.doc_id if rng.random() < 0.8 else "", ev),),
            )
        )

    size = rng.randint(60, 200)
    overlap = rng.randint(0, size // 2 - 1) if size > 2 else 0
    depth = rng.randint(3, 8)
    config = RagConfig(
        "emb", "rr" if rng.random() < 0.5 else None, "gen",
        size, overlap, depth, rng.randint(1, depth),
    )
    chunks = chunk_corpus(docs, CP(size, overlap))
    embedder = ProviderSpec("embed", "emb", "mock_lexical", dimension=128)
    ctx = RunContext(
        chunks=chunks,
        index=build_index(chunks, embedder),
        embedder=embedder,
        reranker=ProviderSpec("rerank", "rr", "mock_lexical") if config.rerank_model else None,
        generator=ProviderSpec("generate", "gen", "mock_lexical"),
        judge=ProviderSpec("judge", "jd", "mock_lexical"),
        policy=AttributionPolicy(),
    )
    return [run_question(config, q, ctx) for q in questions]


def flip_fixture_responses(
    question_id: str,
    wrong_context: list[str],
    right_context: list[str],
    wrong_answer: str,
    right_answer: str,
) -> dict[str, str]:
    """Scripted entries realizing a distractor-removal flip."""
    wrong = json.dumps({"supporting_sentences": [], "final_answer": wrong_answer})
    right = json.dumps({"supporting_sentences": [], "final_answer": right_answer})
    return {
        scripted_key(question_id, wrong_context): wrong,
        scripted_key(question_id, right_context): right,
    }
