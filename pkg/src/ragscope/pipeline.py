"""End-to-end execution of one question through one configuration.

Composes embed -> search -> rerank -> top-k -> prompt -> generate -> parse
-> judge -> coverage -> attribution into a fully populated RunRecord. Also
home of the lenient structured-output parser: the pipeline records what the
generator actually emitted and never truncates or repairs answers.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from ragscope.attribution import AttributionPolicy, attribute
from ragscope.corpus import EvidenceLocations, evidence_locations
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
from ragscope.prompting import PromptBundle, assemble_prompt  # noqa: F401  (re-export)
from ragscope.providers import ProviderError, ProviderSpec, embed_texts, generate, judge
from ragscope.retrieval import VectorIndex, apply_rerank, knn_search, take_top_k

_KEY_SUPPORT = "supporting_sentences"
_KEY_ANSWER = "final_answer"

_ANSWER_RE = re.compile(r'"final_answer"\s*:\s*("(?:\\.|[^"\\])*")')
_SUPPORT_RE = re.compile(r'"supporting_sentences"\s*:\s*\[')
_QUOTED_RE = re.compile(r'"(?:\\.|[^"\\])*"')


def _coerce_fields(obj: object) -> tuple[list[str], str] | None:
    """Pull the two mandatory keys out of a parsed JSON object, or None."""
    if not isinstance(obj, dict) or _KEY_SUPPORT not in obj or _KEY_ANSWER not in obj:
        return None
    raw_support = obj[_KEY_SUPPORT]
    support = [str(s) for s in raw_support] if isinstance(raw_support, list) else []
    answer = obj[_KEY_ANSWER]
    return support, answer if isinstance(answer, str) else json.dumps(answer)


def _first_balanced_block(raw: str) -> str | None:
    """The first balanced {...} block, brace-counting outside string literals."""
    for start, ch in enumerate(raw):
        if ch != "{":
            continue
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(raw)):
            c = raw[i]
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
                    return raw[start : i + 1]
        # unbalanced from this opening brace; try the next one
    return None


def _scan_support_sentences(raw: str) -> list[str]:
    m = _SUPPORT_RE.search(raw)
    if m is None:
        return []
    out: list[str] = []
    pos = m.end()
    while pos < len(raw):
        c = raw[pos]
        if c == "]":
            break
        if c == '"':
            q = _QUOTED_RE.match(raw, pos)
            if q is None:
                break
            try:
                out.append(json.loads(q.group(0)))
            except json.JSONDecodeError:
                break
            pos = q.end()
            continue
        if c not in " \t\r\n,":
            break
        pos += 1
    return out


def parse_response_lenient(raw: str) -> ParsedResponse:
    """Parse a generator reply, degrading through four tiers.

    1. strict JSON with both mandatory keys (only tier with strict_parse_ok);
    2. first balanced {...} block, strict-parsed;
    3. quoted-string scan after the literal key names;
    4. empty answer and no supporting sentences.
    """
    try:
        fields = _coerce_fields(json.loads(raw))
    except json.JSONDecodeError:
        fields = None
    if fields is not None:
        return ParsedResponse(tuple(fields[0]), fields[1], True, raw)

    block = _first_balanced_block(raw)
    if block is not None:
        try:
            fields = _coerce_fields(json.loads(block))
        except json.JSONDecodeError:
            fields = None
        if fields is not None:
            return ParsedResponse(tuple(fields[0]), fields[1], False, raw)

    m = _ANSWER_RE.search(raw)
    if m is not None:
        try:
            answer = json.loads(m.group(1))
        except json.JSONDecodeError:
            answer = None
        if isinstance(answer, str):
            return ParsedResponse(tuple(_scan_support_sentences(raw)), answer, False, raw)

    return ParsedResponse((), "", False, raw)


@dataclass
class RunContext:
    """Everything run_question needs for one (chunking, embedder) combination."""

    chunks: Sequence[Chunk]
    index: VectorIndex
    embedder: ProviderSpec
    reranker: ProviderSpec | None
    generator: ProviderSpec
    judge: ProviderSpec
    policy: AttributionPolicy = field(default_factory=AttributionPolicy)
    chunks_by_id: Mapping[str, Chunk] = field(default_factory=dict)
    evidence_cache: dict[str, EvidenceLocations] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.chunks_by_id:
            self.chunks_by_id = {c.chunk_id: c for c in self.chunks}

    def locations_for(self, question: Question) -> EvidenceLocations:
        # cached per (question, chunk store); contexts are per chunking+embedder
        found = self.evidence_cache.get(question.question_id)
        if found is None:
            found = evidence_locations(question, self.chunks)
            self.evidence_cache[question.question_id] = found
        return found


def _error_record(config_id: str, question: Question, error: str) -> RunRecord:
    return RunRecord(
        config_id=config_id,
        question_id=question.question_id,
        retrieved=(),
        reranked=None,
        context_chunk_ids=(),
        response=ParsedResponse((), "", False, ""),
        judge_verdict=JudgeDecision(False, "not judged: provider error"),
        outcome=OutcomeLabel.UNKNOWN,
        coverage=CoverageStats.from_counts(len(question.evidence), 0, 0),
        relevant_chunk_ids=(),
        error=error,
    )


def run_question(config: RagConfig, question: Question, ctx: RunContext) -> RunRecord:
    """Execute one question under one configuration and record the full trace.

    Provider failures yield a record with an error marker (excluded from
    metrics); a missing scripted fixture is a test bug and propagates.
    """
    config_id = canonical_config_id(config)
    locations = ctx.locations_for(question)
    try:
        query_vector = embed_texts(ctx.embedder, [question.text])[0]
        retrieved = knn_search(ctx.index, query_vector, config.retrieval_depth)
        reranked = apply_rerank(question.text, retrieved, ctx.reranker, ctx.chunks_by_id)
        context_ids = take_top_k(reranked, config.top_k)
        context = [ctx.chunks_by_id[cid] for cid in context_ids]
        bundle = assemble_prompt(question, context)
        raw = generate(ctx.generator, bundle.flatten())
        response = parse_response_lenient(raw)
        verdict = judge(
            ctx.judge,
            question.text,
            question.ground_truth,
            response.final_answer,
            response.raw,
            adjudicate=False,
        )
    except ProviderError as exc:
        return _error_record(config_id, question, f"{type(exc).__name__}: {exc}")

    coverage = CoverageStats.from_counts(
        evidence_total=len(question.evidence),
        evidence_in_rerank_range=locations.count_covered(reranked.chunk_ids()),
        evidence_in_context=locations.count_covered(context_ids),
        used_corpus_fallback=locations.used_corpus_fallback,
    )
    record = RunRecord(
        config_id=config_id,
        question_id=question.question_id,
        retrieved=retrieved.items,
        reranked=reranked.items,
        context_chunk_ids=tuple(context_ids),
        response=response,
        judge_verdict=JudgeDecision(verdict.correct, verdict.rationale),
        outcome=OutcomeLabel.UNKNOWN,
        coverage=coverage,
        relevant_chunk_ids=tuple(sorted(locations.relevant())),
    )
    outcome = attribute(record, question, ctx.policy, ctx.judge)
    return replace(record, outcome=outcome)
