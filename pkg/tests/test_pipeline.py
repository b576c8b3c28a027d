"""Prompt assembly, the four-tier lenient parser, and run_question composition."""

import json
from pathlib import Path

from ragscope.attribution import AttributionPolicy
from ragscope.domain import Chunk, EvidenceRef, OutcomeLabel, Question, RagConfig
from ragscope.pipeline import RunContext, assemble_prompt, parse_response_lenient, run_question
from ragscope.prompting import EMPTY_CONTEXT_MARKER, parse_prompt, scripted_key
from ragscope.providers import ProviderSpec, embed_texts
from ragscope.retrieval import build_index, knn_search, take_top_k

GOLDEN = Path(__file__).parent / "fixtures" / "golden"


def golden_question() -> Question:
    return Question(
        "q42",
        "Who built the Zephyr array?",
        "Heliodyne",
        (EvidenceRef("energy-01", "The Zephyr array was built by Heliodyne."),),
    )


def golden_chunks() -> list[Chunk]:
    return [
        Chunk.make("energy-01", "The Zephyr array was built by Heliodyne. Its turbines hum.", 0, 58),
        Chunk.make("energy-02", "Ground broke on the Boreal solar plant.", 120, 159),
    ]


class TestAssemblePrompt:
    def test_deterministic(self):
        a = assemble_prompt(golden_question(), golden_chunks())
        b = assemble_prompt(golden_question(), golden_chunks())
        assert a == b

    def test_empty_context_marker(self):
        bundle = assemble_prompt(golden_question(), [])
        assert EMPTY_CONTEXT_MARKER in bundle.user_payload

    def test_golden_snapshot(self):
        bundle = assemble_prompt(golden_question(), golden_chunks())
        assert bundle.flatten() == (GOLDEN / "prompt_2chunk.txt").read_text()

    def test_chunks_keep_ranking_order_with_ids(self):
        bundle = assemble_prompt(golden_question(), golden_chunks())
        assert bundle.user_payload.index("[1] (chunk energy-01:0)") < bundle.user_payload.index(
            "[2] (chunk energy-02:120)"
        )

    def test_prompt_round_trips_through_parse(self):
        bundle = assemble_prompt(golden_question(), golden_chunks())
        fields = parse_prompt(bundle.flatten())
        assert fields.question_id == "q42"
        assert [cid for cid, _ in fields.chunks] == ["energy-01:0", "energy-02:120"]

    def test_instructions_mandate_contract(self):
        bundle = assemble_prompt(golden_question(), [])
        for needle in ("supporting_sentences", "final_answer", "three words", "insufficient information"):
            assert needle in bundle.system_instructions


class TestLenientParser:
    def test_tier1_strict(self):
        parsed = parse_response_lenient('{"supporting_sentences":["s"],"final_answer":"Paris"}')
        assert parsed.strict_parse_ok
        assert parsed.final_answer == "Paris"
        assert parsed.supporting_sentences == ("s",)

    def test_tier2_prefixed_json(self):
        parsed = parse_response_lenient('Sure! {"supporting_sentences":[],"final_answer":"Paris"}')
        assert not parsed.strict_parse_ok
        assert parsed.final_answer == "Paris"

    def test_tier2_respects_braces_in_strings(self):
        raw = 'x {"supporting_sentences":["a { b"],"final_answer":"Paris"} y'
        parsed = parse_response_lenient(raw)
        assert parsed.final_answer == "Paris"
        assert parsed.supporting_sentences == ("a { b",)

    def test_tier3_key_scan(self):
        raw = 'no braces here "supporting_sentences": ["s1", "s2" and "final_answer": "Paris"'
        parsed = parse_response_lenient(raw)
        assert not parsed.strict_parse_ok
        assert parsed.final_answer == "Paris"
        assert parsed.supporting_sentences == ("s1", "s2")

    def test_tier4_garbage(self):
        parsed = parse_response_lenient("I cannot answer.")
        assert parsed == parse_response_lenient("I cannot answer.")
        assert not parsed.strict_parse_ok
        assert parsed.final_answer == ""
        assert parsed.supporting_sentences == ()

    def test_strict_json_missing_keys_degrades(self):
        parsed = parse_response_lenient('{"final_answer":"Paris"}')
        assert not parsed.strict_parse_ok  # both mandatory keys required for tier 1
        assert parsed.final_answer == "Paris"  # recovered by the key scan

    def test_total_function_on_weird_inputs(self):
        for raw in ["", "{", "{{{", '"final_answer": 3', "null", "[1,2]"]:
            parsed = parse_response_lenient(raw)
            assert parsed.raw == raw

    def test_raw_always_preserved(self):
        raw = 'Sure! {"supporting_sentences":[],"final_answer":"Paris"}'
        assert parse_response_lenient(raw).raw == raw


def mini_world(scripted: dict[str, str], tmp_path) -> tuple[RagConfig, Question, RunContext]:
    docs_chunks = [
        Chunk.make("d1", "The Zephyr array was built by Heliodyne. Extra words pad this.", 0, 63),
        Chunk.make("d2", "Totally unrelated filler about gardens and soil quality here.", 0, 62),
        Chunk.make("d3", "More filler that shares the word array with the query text.", 0, 60),
    ]
    question = Question(
        "q1",
        "Who built the Zephyr array?",
        "Heliodyne",
        (EvidenceRef("d1", "The Zephyr array was built by Heliodyne."),),
    )
    fixture = tmp_path / "scripted.json"
    fixture.write_text(json.dumps(scripted), encoding="utf-8")
    embedder = ProviderSpec("embed", "emb", "mock_lexical", dimension=128)
    ctx = RunContext(
        chunks=docs_chunks,
        index=build_index(docs_chunks, embedder),
        embedder=embedder,
        reranker=None,
        generator=ProviderSpec("generate", "gen", "mock_scripted", fixture_path=str(fixture)),
        judge=ProviderSpec("judge", "jd", "mock_lexical"),
        policy=AttributionPolicy(),
    )
    config = RagConfig("emb", None, "gen", 100, 0, 3, 2)
    return config, question, ctx


def context_ids_for(ctx: RunContext, question: Question, depth: int, k: int) -> list[str]:
    [qv] = embed_texts(ctx.embedder, [question.text])
    return take_top_k(knn_search(ctx.index, qv, depth), k)


class TestRunQuestion:
    def test_scripted_correct_outcome(self, tmp_path):
        config, question, ctx = mini_world({}, tmp_path)
        ids = context_ids_for(ctx, question, config.retrieval_depth, config.top_k)
        raw = json.dumps({"supporting_sentences": [], "final_answer": "Heliodyne"})
        fixture = Path(ctx.generator.fixture_path)
        fixture.write_text(json.dumps({scripted_key("q1", ids): raw}), encoding="utf-8")
        record = run_question(config, question, ctx)
        assert record.outcome is OutcomeLabel.CORRECT
        assert record.error is None

    def test_rerun_byte_identical(self, tmp_path):
        config, question, ctx = mini_world({}, tmp_path)
        ids = context_ids_for(ctx, question, config.retrieval_depth, config.top_k)
        raw = json.dumps({"supporting_sentences": [], "final_answer": "Heliodyne"})
        Path(ctx.generator.fixture_path).write_text(
            json.dumps({scripted_key("q1", ids): raw}), encoding="utf-8"
        )
        first = run_question(config, question, ctx)
        second = run_question(config, question, ctx)
        assert first.to_dict() == second.to_dict()

    def test_evidence_outside_depth_zero_range_coverage(self, tmp_path):
        config, question, ctx = mini_world({}, tmp_path)
        # depth 1 over a query that ranks the filler chunk d3 above d1 would be
        # contrived; instead mask the evidence chunk out of the index entirely.
        no_evidence_chunks = [c for c in ctx.chunks if c.doc_id != "d1"]
        ctx2 = RunContext(
            chunks=no_evidence_chunks,
            index=build_index(no_evidence_chunks, ctx.embedder),
            embedder=ctx.embedder,
            reranker=None,
            generator=ctx.generator,
            judge=ctx.judge,
            policy=ctx.policy,
        )
        ids = context_ids_for(ctx2, question, config.retrieval_depth, config.top_k)
        raw = json.dumps({"supporting_sentences": [], "final_answer": "nobody knows"})
        Path(ctx2.generator.fixture_path).write_text(
            json.dumps({scripted_key("q1", ids): raw}), encoding="utf-8"
        )
        record = run_question(config, question, ctx2)
        assert record.coverage.evidence_in_rerank_range == 0
        assert record.outcome is OutcomeLabel.FP2_MISSED_TOP_RANKED

    def test_provider_error_yields_error_record(self, tmp_path, monkeypatch):
        import ragscope.pipeline as pipeline_mod
        from ragscope.providers import ProviderError

        config, question, ctx = mini_world({}, tmp_path)

        def boom(spec, texts, client=None):
            raise ProviderError("down")

        monkeypatch.setattr(pipeline_mod, "embed_texts", boom)
        record = run_question(config, question, ctx)
        assert record.error is not None
        assert record.retrieved == ()

    def test_context_is_prefix_of_ranking(self, tmp_path):
        config, question, ctx = mini_world({}, tmp_path)
        ids = context_ids_for(ctx, question, config.retrieval_depth, config.top_k)
        raw = json.dumps({"supporting_sentences": [], "final_answer": "Heliodyne"})
        Path(ctx.generator.fixture_path).write_text(
            json.dumps({scripted_key("q1", ids): raw}), encoding="utf-8"
        )
        record = run_question(config, question, ctx)
        final_ids = [cid for cid, _ in record.final_ranking()]
        assert list(record.context_chunk_ids) == final_ids[: config.top_k]
        assert record.coverage.evidence_in_context <= record.coverage.evidence_in_rerank_range
