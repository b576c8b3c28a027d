"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`. Everything here is offline:
mock providers only, the committed desk-scale fixture corpus, and designed
stores for the causality cases.
"""

import functools
import itertools
import json
import random
import time
from pathlib import Path

import pytest

from helpers import make_record, random_mini_run
from ragscope.attribution import AttributionPolicy, attribute
from ragscope.comparison import (
    jaccard_words,
    label_histogram,
    match_chunks,
    component_aggregates,
    transition_matrix,
)
from ragscope.corpus import tokenize
from ragscope.domain import (
    Chunk,
    EvidenceRef,
    OUTCOME_ORDER,
    OutcomeLabel,
    Question,
    RagConfig,
)
from ragscope.metrics import average_precision, recall_at_k, reciprocal_rank
from ragscope.pipeline import RunContext, parse_response_lenient, run_question
from ragscope.perturbation import PerturbationRequest, perturb_and_regenerate
from ragscope.prompting import scripted_key
from ragscope.providers import ProviderSpec, embed_texts
from ragscope.retrieval import build_index, knn_search, take_top_k
from ragscope.sweep import execute

TOL = 1e-12


def criterion(number: int, title: str):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"FAIL  criterion {number}: {title}")
                raise
            print(f"PASS  criterion {number}: {title}")

        return run

    return wrap


# --------------------------------------------------------------------------
# 1. Metric oracle equivalence on exhaustive instances


def oracle_recall(relevant: set, ids: list, k: int) -> float:
    if not relevant:
        return 1.0
    return sum(1 for cid in ids[:k] if cid in relevant) / len(relevant)


def oracle_rr(relevant: set, ids: list) -> float:
    for i, cid in enumerate(ids):
        if cid in relevant:
            return 1.0 / (i + 1)
    return 0.0


def oracle_ap(relevant: set, ids: list) -> float:
    if not relevant:
        return 1.0
    hits, total = 0, 0.0
    for i, cid in enumerate(ids):
        if cid in relevant:
            hits += 1
            total += hits / (i + 1)
    return total / len(relevant)


@criterion(1, "metric oracle equivalence on exhaustive rankings of <= 6 items")
def test_criterion_1_metric_oracles():
    start = time.time()
    checked = 0
    for n in range(1, 7):
        universe = [f"c{i}" for i in range(n)]
        extended = universe + ["phantom"]  # relevant item never retrieved
        subsets = [
            set(combo)
            for r in range(len(extended) + 1)
            for combo in itertools.combinations(extended, r)
        ]
        for perm in itertools.permutations(universe):
            ids = list(perm)
            ranking = [(cid, 1.0 - i * 0.001) for i, cid in enumerate(ids)]
            for relevant in subsets:
                for k in (1, (n // 2) + 1, n):
                    assert abs(
                        recall_at_k(relevant, ranking, k) - oracle_recall(relevant, ids, k)
                    ) <= TOL
                assert abs(reciprocal_rank(relevant, ranking) - oracle_rr(relevant, ids)) <= TOL
                assert abs(average_precision(relevant, ranking) - oracle_ap(relevant, ids)) <= TOL
                checked += 1
    elapsed = time.time() - start
    assert checked > 100_000
    assert elapsed < 10.0, f"exhaustive oracle check took {elapsed:.1f}s"


# --------------------------------------------------------------------------
# 2. Attribution partition + cascade order at the stated thresholds


@criterion(2, "attribution 9-fixture suite at thresholds 0.7/0.7/1.0 + label partition")
def test_criterion_2_attribution():
    from test_attribution import JUDGE, fixture_suite

    policy = AttributionPolicy()
    assert (policy.rerank_range_threshold, policy.context_threshold, policy.fp4_threshold) == (
        0.7, 0.7, 1.0,
    )
    for record, question, expected in fixture_suite():
        assert attribute(record, question, policy, JUDGE) is expected, question.question_id
    for seed in range(10):
        records = random_mini_run(seed)
        histogram = label_histogram(records)
        non_error = [r for r in records if r.error is None]
        assert sum(histogram.values()) == len(non_error), "labels must partition |Q|"


# --------------------------------------------------------------------------
# 3. Transition-matrix algebra


@criterion(3, "transition-matrix marginals on 1000 random label assignments")
def test_criterion_3_transition_algebra():
    rng = random.Random(42)
    for trial in range(1000):
        n = rng.randint(1, 25)
        qids = [f"q{i}" for i in range(n)]
        ra = [make_record("a", q, rng.choice(OUTCOME_ORDER)) for q in qids]
        rb = [make_record("b", q, rng.choice(OUTCOME_ORDER)) for q in qids]
        matrix = transition_matrix(ra, rb)
        assert matrix.row_sums() == label_histogram(ra)
        assert matrix.col_sums() == label_histogram(rb)
        assert matrix.total() == n
    records = [make_record("a", f"q{i}", rng.choice(OUTCOME_ORDER)) for i in range(40)]
    identity = transition_matrix(records, records)
    histogram = label_histogram(records)
    for la in OUTCOME_ORDER:
        for lb in OUTCOME_ORDER:
            assert identity.count(la, lb) == (histogram[la] if la is lb else 0)


# --------------------------------------------------------------------------
# 4. Word-set Jaccard properties + hand-computed pairing


@criterion(4, "jaccard properties over 10,000 random pairs + pairing table at 0.3")
def test_criterion_4_jaccard():
    rng = random.Random(2024)
    vocab = [f"w{i}" for i in range(15)]
    for _ in range(10_000):
        a = " ".join(rng.choices(vocab, k=rng.randint(0, 10)))
        b = " ".join(rng.choices(vocab, k=rng.randint(0, 10)))
        j = jaccard_words(a, b)
        assert j == jaccard_words(b, a)
        assert 0.0 <= j <= 1.0
        assert (j == 1.0) == (set(tokenize(a)) == set(tokenize(b)))
    chunks_a = [
        Chunk.make("a1", "sun moon tide", 0, 13),
        Chunk.make("a2", "rock fern", 0, 9),
        Chunk.make("a3", "mist dune coal", 0, 14),
    ]
    chunks_b = [
        Chunk.make("b1", "sun moon tide", 0, 13),
        Chunk.make("b2", "sun moon rock", 0, 13),
        Chunk.make("b3", "fern rock", 0, 9),
    ]
    pairing = match_chunks(chunks_a, chunks_b, 0.3)
    assert pairing.pairs == (
        ("a1:0", "b1:0", 1.0),
        ("a2:0", "b3:0", 1.0),
        ("a1:0", "b2:0", 0.5),
    )


# --------------------------------------------------------------------------
# 5 + 6. Sweep determinism and resumability on the 8-config fixture


def store_files(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@criterion(5, "8-config sweep byte-identical across 1 vs 8 workers, < 60 s")
def test_criterion_5_sweep_determinism(
    tmp_path, fixture_docs, fixture_questions, fixture_space, fixture_registry
):
    start = time.time()
    solo = tmp_path / "workers1"
    pooled = tmp_path / "workers8"
    r1 = execute(solo, fixture_space, fixture_docs, fixture_questions, fixture_registry, workers=1)
    r8 = execute(pooled, fixture_space, fixture_docs, fixture_questions, fixture_registry, workers=8)
    elapsed = time.time() - start
    assert len(r1.manifest.config_ids) == 8
    assert r1.manifest.n_runs == 8 * len(fixture_questions)
    runs1 = (r1.sweep_dir / "runs.jsonl").read_bytes()
    runs8 = (r8.sweep_dir / "runs.jsonl").read_bytes()
    assert runs1 == runs8, "canonical runs.jsonl must not depend on worker count"
    assert store_files(solo) == store_files(pooled)
    assert elapsed < 60.0, f"two full sweeps took {elapsed:.1f}s"


@criterion(6, "interrupt at ~50% then resume -> store byte-identical to a clean run")
def test_criterion_6_resumability(
    tmp_path, fixture_docs, fixture_questions, fixture_space, fixture_registry
):
    total = 8 * len(fixture_questions)
    interrupted = tmp_path / "interrupted"
    reference = tmp_path / "reference"
    partial = execute(
        interrupted, fixture_space, fixture_docs, fixture_questions, fixture_registry,
        workers=4, max_new_runs=total // 2,
    )
    assert not partial.finished and partial.new_runs == total // 2
    resumed = execute(
        interrupted, fixture_space, fixture_docs, fixture_questions, fixture_registry,
        workers=4,
    )
    assert resumed.finished
    execute(
        reference, fixture_space, fixture_docs, fixture_questions, fixture_registry, workers=4
    )
    assert store_files(interrupted) == store_files(reference)


# --------------------------------------------------------------------------
# 7. Perturbation causality


@criterion(7, "distractor removal flips incorrect->correct; identity reproduces raw bytes")
def test_criterion_7_perturbation_causality(tmp_path):
    good = Chunk.make("d1", "The Zephyr array was built by Heliodyne for the coast.", 0, 55)
    distractor = Chunk.make("d2", "The Zephyr array brochure was printed by Granite Press.", 0, 56)
    filler = Chunk.make("d3", "Nothing about wind farms lives in this sentence at all.", 0, 56)
    question = Question(
        "q1", "Who built the Zephyr array?", "Heliodyne",
        (EvidenceRef("d1", "The Zephyr array was built by Heliodyne"),),
    )
    chunks = [good, distractor, filler]
    embedder = ProviderSpec("embed", "emb", "mock_lexical", dimension=128)
    index = build_index(chunks, embedder)
    [qv] = embed_texts(embedder, [question.text])
    context_ids = take_top_k(knn_search(index, qv, 3), 2)
    wrong = json.dumps({"supporting_sentences": [], "final_answer": "Granite Press"})
    right = json.dumps({"supporting_sentences": [], "final_answer": "Heliodyne"})
    fixture = tmp_path / "scripted.json"
    fixture.write_text(
        json.dumps({
            scripted_key("q1", context_ids): wrong,
            scripted_key("q1", [good.chunk_id]): right,
        }),
        encoding="utf-8",
    )
    generator = ProviderSpec("generate", "gen", "mock_scripted", fixture_path=str(fixture))
    judge = ProviderSpec("judge", "jd", "mock_lexical")
    ctx = RunContext(chunks=chunks, index=index, embedder=embedder, reranker=None,
                     generator=generator, judge=judge)
    config = RagConfig("emb", None, "gen", 100, 0, 3, 2)
    base = run_question(config, question, ctx)
    assert base.judge_verdict.correct is False

    resolver = {c.chunk_id: c for c in chunks}
    identity = perturb_and_regenerate(
        PerturbationRequest(base.config_id, "q1", tuple(context_ids)),
        base, question, resolver, generator, judge,
    )
    assert identity.raw_pert == base.response.raw, "identity must reproduce raw bytes"
    flipped = perturb_and_regenerate(
        PerturbationRequest(base.config_id, "q1", (good.chunk_id,)),
        base, question, resolver, generator, judge,
    )
    assert (flipped.verdict_orig, flipped.verdict_pert) == (False, True)


# --------------------------------------------------------------------------
# 8. Lenient parser tiers


@criterion(8, "four-tier parser fixtures exact; incorrect garbage attributed FP5")
def test_criterion_8_parser_tiers():
    strict = parse_response_lenient('{"supporting_sentences":["s"],"final_answer":"Paris"}')
    assert (strict.strict_parse_ok, strict.final_answer, strict.supporting_sentences) == (
        True, "Paris", ("s",),
    )
    prefixed = parse_response_lenient('Sure! {"supporting_sentences":[],"final_answer":"Paris"}')
    assert (prefixed.strict_parse_ok, prefixed.final_answer) == (False, "Paris")
    scanned = parse_response_lenient(
        'broken "supporting_sentences": ["s1", "s2" then "final_answer": "Paris" trailing'
    )
    assert (scanned.strict_parse_ok, scanned.final_answer, scanned.supporting_sentences) == (
        False, "Paris", ("s1", "s2"),
    )
    garbage = parse_response_lenient("I cannot answer.")
    assert (garbage.strict_parse_ok, garbage.final_answer, garbage.supporting_sentences) == (
        False, "", (),
    )

    from test_attribution import JUDGE

    record = make_record(
        "c", "q", OutcomeLabel.UNKNOWN, correct=False, strict=False, answer="",
        coverage=(2, 2, 2),
    )
    question = Question("q", "what?", "Paris", (EvidenceRef("d", "x y z"),))
    assert attribute(record, question, AttributionPolicy(), JUDGE) is OutcomeLabel.FP5_WRONG_FORMAT


# --------------------------------------------------------------------------
# 9. Component aggregates vs brute-force group-by


@criterion(9, "component aggregates equal brute-force group-by on the 8-config sweep")
def test_criterion_9_component_aggregates(fixture_sweep):
    manifest = fixture_sweep.manifest
    assert len(manifest.config_ids) == 8
    for metric in ("accuracy", "recall", "mrr", "map"):
        groups: dict[tuple[str, str], list[float]] = {}
        for cid in manifest.config_ids:
            for field, option in manifest.configs[cid].options().items():
                groups.setdefault((field, option), []).append(
                    manifest.reports[cid].value(metric)
                )
        got = {
            (a.component_field, a.option_value): (a.mean_metric, a.n_configs)
            for a in component_aggregates(manifest, metric)
        }
        want = {key: (sum(v) / len(v), len(v)) for key, v in groups.items()}
        assert got == want


# --------------------------------------------------------------------------
# 10. Coverage monotonicity invariant


@criterion(10, "coverage monotonicity (context <= rerank range <= total) on all records")
def test_criterion_10_coverage_monotonicity(fixture_sweep):
    from ragscope.sweep import load_runs

    checked = 0
    for record in load_runs(fixture_sweep.sweep_dir):
        c = record.coverage
        assert 0 <= c.evidence_in_context <= c.evidence_in_rerank_range <= c.evidence_total
        checked += 1
    for seed in range(12):
        for record in random_mini_run(seed):
            c = record.coverage
            assert 0 <= c.evidence_in_context <= c.evidence_in_rerank_range <= c.evidence_total
            checked += 1
    assert checked > 240
