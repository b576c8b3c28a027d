"""Shared value types: corpus records, pipeline configurations, and run traces.

Everything here is an immutable value with a JSON round-trip (``to_dict`` /
``from_dict``), so records can be shipped between workers and persisted to
the plain-file run store without extra machinery.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Any, Mapping

# Ground truth marking a question as unanswerable. Compared case-insensitively
# after trimming; answers are tested against it with the same normalization.
UNANSWERABLE_SENTINEL = "insufficient information"


def is_unanswerable(ground_truth: str) -> bool:
    return ground_truth.strip().casefold() == UNANSWERABLE_SENTINEL


class OutcomeLabel(Enum):
    """Exactly one outcome per run; declaration order is the display order."""

    CORRECT = "Correct"
    FP1_MISSING_CONTENT = "FP1_MissingContent"
    FP2_MISSED_TOP_RANKED = "FP2_MissedTopRanked"
    FP3_NOT_IN_CONTEXT = "FP3_NotInContext"
    FP4_NOT_EXTRACTED = "FP4_NotExtracted"
    FP5_WRONG_FORMAT = "FP5_WrongFormat"
    FP6_INCORRECT_SPECIFICITY = "FP6_IncorrectSpecificity"
    FP7_INCOMPLETE = "FP7_Incomplete"
    UNKNOWN = "Unknown"


OUTCOME_ORDER: tuple[OutcomeLabel, ...] = tuple(OutcomeLabel)


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    body: str
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")
        if not self.body:
            raise ValueError(f"document {self.doc_id!r}: body must be non-empty")
        object.__setattr__(self, "metadata", dict(self.metadata))

    def to_dict(self) -> dict[str, Any]:
        return {
            "doc_id": self.doc_id,
            "title": self.title,
            "body": self.body,
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Document":
        return cls(
            doc_id=d["doc_id"],
            title=d.get("title", ""),
            body=d["body"],
            metadata=d.get("metadata", {}),
        )


@dataclass(frozen=True)
class Chunk:
    """A contiguous slice of one document; the retrieval unit.

    ``chunk_id`` embeds the character offset so identical text at different
    positions stays distinguishable.
    """

    chunk_id: str
    doc_id: str
    text: str
    char_start: int
    char_end: int

    def __post_init__(self) -> None:
        if self.char_start < 0 or self.char_end <= self.char_start:
            raise ValueError(
                f"chunk {self.chunk_id!r}: need 0 <= char_start < char_end, "
                f"got [{self.char_start}, {self.char_end})"
            )
        expected = f"{self.doc_id}:{self.char_start}"
        if self.chunk_id != expected:
            raise ValueError(f"chunk_id {self.chunk_id!r} != {expected!r}")

    @classmethod
    def make(cls, doc_id: str, text: str, char_start: int, char_end: int) -> "Chunk":
        return cls(f"{doc_id}:{char_start}", doc_id, text, char_start, char_end)

    def to_dict(self) -> dict[str, Any]:
        return {
            "chunk_id": self.chunk_id,
            "doc_id": self.doc_id,
            "text": self.text,
            "char_start": self.char_start,
            "char_end": self.char_end,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Chunk":
        return cls(d["chunk_id"], d["doc_id"], d["text"], d["char_start"], d["char_end"])


@dataclass(frozen=True)
class EvidenceRef:
    """One ground-truth evidence sentence; doc_id may be empty (corpus-wide search)."""

    doc_id: str
    sentence: str

    def __post_init__(self) -> None:
        if not self.sentence:
            raise ValueError("evidence sentence must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {"doc_id": self.doc_id, "sentence": self.sentence}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "EvidenceRef":
        return cls(d.get("doc_id", ""), d["sentence"])


@dataclass(frozen=True)
class Question:
    question_id: str
    text: str
    ground_truth: str
    evidence: tuple[EvidenceRef, ...] = ()

    def __post_init__(self) -> None:
        if not self.question_id:
            raise ValueError("question_id must be non-empty")
        object.__setattr__(self, "evidence", tuple(self.evidence))
        if not self.evidence and not is_unanswerable(self.ground_truth):
            raise ValueError(
                f"question {self.question_id!r}: evidence may be empty only when "
                f"ground_truth is the unanswerable sentinel"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "question_id": self.question_id,
            "text": self.text,
            "ground_truth": self.ground_truth,
            "evidence": [e.to_dict() for e in self.evidence],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Question":
        return cls(
            question_id=d["question_id"],
            text=d["text"],
            ground_truth=d["ground_truth"],
            evidence=tuple(EvidenceRef.from_dict(e) for e in d.get("evidence", [])),
        )


# RagConfig fields in canonical order; expansion, ids and option grouping all
# follow this order.
CONFIG_FIELDS: tuple[str, ...] = (
    "embedding_model",
    "rerank_model",
    "response_model",
    "chunk_size",
    "chunk_overlap",
    "retrieval_depth",
    "top_k",
)

# Accepted spelling of the "no reranker" option in space files.
NO_RERANKER = "none"


@dataclass(frozen=True)
class RagConfig:
    """One pipeline parameterization. Sizes and overlap are in characters."""

    embedding_model: str
    rerank_model: str | None
    response_model: str
    chunk_size: int
    chunk_overlap: int
    retrieval_depth: int
    top_k: int

    def __post_init__(self) -> None:
        if not self.embedding_model or not self.response_model:
            raise ValueError("embedding_model and response_model must be non-empty")
        if isinstance(self.rerank_model, str) and self.rerank_model.casefold() == NO_RERANKER:
            object.__setattr__(self, "rerank_model", None)
        if self.chunk_size <= 0:
            raise ValueError(f"chunk_size must be > 0, got {self.chunk_size}")
        if self.chunk_overlap < 0:
            raise ValueError(f"chunk_overlap must be >= 0, got {self.chunk_overlap}")
        if self.chunk_overlap >= self.chunk_size:
            raise ValueError(
                f"chunk_overlap={self.chunk_overlap} must be < chunk_size={self.chunk_size}"
            )
        if self.retrieval_depth <= 0:
            raise ValueError(f"retrieval_depth must be > 0, got {self.retrieval_depth}")
        if self.top_k <= 0:
            raise ValueError(f"top_k must be > 0, got {self.top_k}")
        if self.top_k > self.retrieval_depth:
            raise ValueError(
                f"top_k={self.top_k} must be <= retrieval_depth={self.retrieval_depth}"
            )

    def options(self) -> dict[str, str]:
        """Field -> option value as display strings (reranker None -> 'none')."""
        raw = self.to_dict()
        return {f: NO_RERANKER if raw[f] is None else str(raw[f]) for f in CONFIG_FIELDS}

    def to_dict(self) -> dict[str, Any]:
        return {f: getattr(self, f) for f in CONFIG_FIELDS}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RagConfig":
        return cls(**{f: d[f] for f in CONFIG_FIELDS})


def canonical_config_id(config: RagConfig) -> str:
    """Deterministic id for a config: field-ordered canonical string, hex digest.

    Stable across processes (no salted hashing) and distinct for distinct
    field tuples.
    """
    parts = []
    for f in CONFIG_FIELDS:
        value = getattr(config, f)
        parts.append(f"{f}={NO_RERANKER if value is None else value}")
    canonical = "|".join(parts)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


@dataclass(frozen=True)
class ConfigSpace:
    """User-selected candidate values, one list per RagConfig field."""

    embedding_model: tuple[str, ...]
    rerank_model: tuple[str | None, ...]
    response_model: tuple[str, ...]
    chunk_size: tuple[int, ...]
    chunk_overlap: tuple[int, ...]
    retrieval_depth: tuple[int, ...]
    top_k: tuple[int, ...]

    def __post_init__(self) -> None:
        for f in CONFIG_FIELDS:
            object.__setattr__(self, f, tuple(getattr(self, f)))
        # Normalize the "none" reranker spelling but keep it a visible option.
        rerank = tuple(
            None if v is None or (isinstance(v, str) and v.casefold() == NO_RERANKER) else v
            for v in self.rerank_model
        )
        object.__setattr__(self, "rerank_model", rerank)

    def field_options(self) -> list[tuple[str, tuple[Any, ...]]]:
        return [(f, getattr(self, f)) for f in CONFIG_FIELDS]

    def to_dict(self) -> dict[str, Any]:
        return {f: list(getattr(self, f)) for f in CONFIG_FIELDS}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ConfigSpace":
        return cls(**{f: tuple(d[f]) for f in CONFIG_FIELDS})


def validate_config_space(space: ConfigSpace) -> list[str]:
    """Check that every Cartesian combination yields a valid RagConfig.

    Returns one message per offending value or interacting-value pair, not one
    per full combination, so a bad overlap is reported once regardless of how
    many models it is crossed with.
    """
    violations: list[str] = []
    for f in CONFIG_FIELDS:
        if not getattr(space, f):
            violations.append(f"{f}: option list must be non-empty")
    for value in space.chunk_size:
        if value <= 0:
            violations.append(f"chunk_size={value} must be > 0")
    for value in space.chunk_overlap:
        if value < 0:
            violations.append(f"chunk_overlap={value} must be >= 0")
    for value in space.retrieval_depth:
        if value <= 0:
            violations.append(f"retrieval_depth={value} must be > 0")
    for value in space.top_k:
        if value <= 0:
            violations.append(f"top_k={value} must be > 0")
    for size, overlap in product(space.chunk_size, space.chunk_overlap):
        if size > 0 and overlap >= 0 and overlap >= size:
            violations.append(f"chunk_overlap={overlap} must be < chunk_size={size}")
    for depth, k in product(space.retrieval_depth, space.top_k):
        if depth > 0 and k > 0 and k > depth:
            violations.append(f"top_k={k} must be <= retrieval_depth={depth}")
    return violations


@dataclass(frozen=True)
class ParsedResponse:
    """Generator output after the lenient parse.

    ``strict_parse_ok`` is true only when the raw string was well-formed JSON
    carrying both mandatory keys (tier 1); recovered answers keep it false.
    """

    supporting_sentences: tuple[str, ...]
    final_answer: str
    strict_parse_ok: bool
    raw: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "supporting_sentences", tuple(self.supporting_sentences))

    def to_dict(self) -> dict[str, Any]:
        return {
            "supporting_sentences": list(self.supporting_sentences),
            "final_answer": self.final_answer,
            "strict_parse_ok": self.strict_parse_ok,
            "raw": self.raw,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ParsedResponse":
        return cls(
            supporting_sentences=tuple(d["supporting_sentences"]),
            final_answer=d["final_answer"],
            strict_parse_ok=d["strict_parse_ok"],
            raw=d["raw"],
        )


@dataclass(frozen=True)
class CoverageStats:
    """Where a question's evidence landed for one run.

    ``used_corpus_fallback`` records that at least one evidence sentence had
    no doc_id and was matched corpus-wide.
    """

    evidence_total: int
    evidence_in_rerank_range: int
    evidence_in_context: int
    glyph_fraction: float
    used_corpus_fallback: bool = False

    def __post_init__(self) -> None:
        ok = 0 <= self.evidence_in_context <= self.evidence_in_rerank_range <= self.evidence_total
        if not ok:
            raise ValueError(
                "coverage counts must satisfy 0 <= context <= rerank range <= total, got "
                f"{self.evidence_in_context}/{self.evidence_in_rerank_range}/{self.evidence_total}"
            )

    @classmethod
    def from_counts(
        cls,
        evidence_total: int,
        evidence_in_rerank_range: int,
        evidence_in_context: int,
        used_corpus_fallback: bool = False,
    ) -> "CoverageStats":
        glyph = (
            evidence_in_rerank_range / evidence_total if evidence_total > 0 else 1.0
        )
        return cls(
            evidence_total=evidence_total,
            evidence_in_rerank_range=evidence_in_rerank_range,
            evidence_in_context=evidence_in_context,
            glyph_fraction=glyph,
            used_corpus_fallback=used_corpus_fallback,
        )

    def range_fraction(self) -> float:
        return self.evidence_in_rerank_range / self.evidence_total if self.evidence_total else 1.0

    def context_fraction(self) -> float:
        return self.evidence_in_context / self.evidence_total if self.evidence_total else 1.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "evidence_total": self.evidence_total,
            "evidence_in_rerank_range": self.evidence_in_rerank_range,
            "evidence_in_context": self.evidence_in_context,
            "glyph_fraction": self.glyph_fraction,
            "used_corpus_fallback": self.used_corpus_fallback,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "CoverageStats":
        return cls(
            evidence_total=d["evidence_total"],
            evidence_in_rerank_range=d["evidence_in_rerank_range"],
            evidence_in_context=d["evidence_in_context"],
            glyph_fraction=d["glyph_fraction"],
            used_corpus_fallback=d.get("used_corpus_fallback", False),
        )


@dataclass(frozen=True)
class JudgeDecision:
    """Correctness verdict attached to every run record."""

    correct: bool
    rationale: str

    def to_dict(self) -> dict[str, Any]:
        return {"correct": self.correct, "rationale": self.rationale}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "JudgeDecision":
        return cls(d["correct"], d.get("rationale", ""))


Ranking = tuple[tuple[str, float], ...]


def _ranking_to_json(items: Ranking) -> list[list[Any]]:
    return [[cid, score] for cid, score in items]


def _ranking_from_json(items: Any) -> Ranking:
    return tuple((cid, float(score)) for cid, score in items)


@dataclass(frozen=True)
class RunRecord:
    """The full trace of one (config, question) execution.

    ``relevant_chunk_ids`` is the set of index chunks containing at least one
    evidence sentence, frozen at run time so metrics can be recomputed from
    the record alone. ``error`` marks provider failures; error records carry
    empty rankings and are excluded from metrics and comparisons.
    """

    config_id: str
    question_id: str
    retrieved: Ranking
    reranked: Ranking | None
    context_chunk_ids: tuple[str, ...]
    response: ParsedResponse
    judge_verdict: JudgeDecision
    outcome: OutcomeLabel
    coverage: CoverageStats
    relevant_chunk_ids: tuple[str, ...] = ()
    error: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "retrieved", tuple(tuple(p) for p in self.retrieved))
        if self.reranked is not None:
            object.__setattr__(self, "reranked", tuple(tuple(p) for p in self.reranked))
        object.__setattr__(self, "context_chunk_ids", tuple(self.context_chunk_ids))
        object.__setattr__(self, "relevant_chunk_ids", tuple(self.relevant_chunk_ids))
        final = self.reranked if self.reranked is not None else self.retrieved
        prefix = tuple(cid for cid, _ in final[: len(self.context_chunk_ids)])
        if self.error is None and self.context_chunk_ids != prefix:
            raise ValueError(
                f"context_chunk_ids must be a prefix of the final ranking "
                f"({self.config_id}/{self.question_id})"
            )

    def final_ranking(self) -> Ranking:
        return self.reranked if self.reranked is not None else self.retrieved

    def to_dict(self) -> dict[str, Any]:
        return {
            "config_id": self.config_id,
            "question_id": self.question_id,
            "retrieved": _ranking_to_json(self.retrieved),
            "reranked": None if self.reranked is None else _ranking_to_json(self.reranked),
            "context_chunk_ids": list(self.context_chunk_ids),
            "response": self.response.to_dict(),
            "judge_verdict": self.judge_verdict.to_dict(),
            "outcome": self.outcome.value,
            "coverage": self.coverage.to_dict(),
            "relevant_chunk_ids": list(self.relevant_chunk_ids),
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RunRecord":
        return cls(
            config_id=d["config_id"],
            question_id=d["question_id"],
            retrieved=_ranking_from_json(d["retrieved"]),
            reranked=None if d.get("reranked") is None else _ranking_from_json(d["reranked"]),
            context_chunk_ids=tuple(d["context_chunk_ids"]),
            response=ParsedResponse.from_dict(d["response"]),
            judge_verdict=JudgeDecision.from_dict(d["judge_verdict"]),
            outcome=OutcomeLabel(d["outcome"]),
            coverage=CoverageStats.from_dict(d["coverage"]),
            relevant_chunk_ids=tuple(d.get("relevant_chunk_ids", ())),
            error=d.get("error"),
        )
