"""Comparative causal verification by context perturbation.

Rebuild a curated context (chunks removed, kept, reordered, or substituted
from the other compared configuration), regenerate, re-judge, and report the
verdict delta against the untouched base record. Retrieval is bypassed, so
perturbed runs are labeled from the restricted set {Correct, FP1, FP4, FP5,
FP6, FP7, Unknown}; FP2/FP3 cannot apply.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from ragscope.attribution import (
    AttributionPolicy,
    adjudicate,
    answer_matches_sentinel,
)
from ragscope.corpus import evidence_locations
from ragscope.domain import (
    Chunk,
    OutcomeLabel,
    ParsedResponse,
    Question,
    RunRecord,
    is_unanswerable,
)
from ragscope.pipeline import assemble_prompt, parse_response_lenient
from ragscope.providers import ProviderSpec, generate, judge
from ragscope.store import canonical_json, digest12


class UnresolvableChunkError(KeyError):
    """A curated context names a chunk id absent from every chunk store."""

    def __init__(self, chunk_id: str):
        super().__init__(chunk_id)
        self.chunk_id = chunk_id

    def __str__(self) -> str:
        return f"unresolvable chunk id {self.chunk_id!r}"


@dataclass(frozen=True)
class PerturbationRequest:
    """A curated context for one base run; ids may come from either config's store."""

    config_id: str
    question_id: str
    context_chunk_ids: tuple[str, ...]
    note: str = ""
    allow_empty_context: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "context_chunk_ids", tuple(self.context_chunk_ids))
        if not self.context_chunk_ids and not self.allow_empty_context:
            raise ValueError(
                "curated context is empty; set allow_empty_context for an "
                "empty-context experiment"
            )

    def stored_id(self) -> str:
        return digest12(
            canonical_json(
                {
                    "config_id": self.config_id,
                    "question_id": self.question_id,
                    "context_chunk_ids": list(self.context_chunk_ids),
                }
            )
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "config_id": self.config_id,
            "question_id": self.question_id,
            "context_chunk_ids": list(self.context_chunk_ids),
            "note": self.note,
            "allow_empty_context": self.allow_empty_context,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PerturbationRequest":
        return cls(
            config_id=d["config_id"],
            question_id=d["question_id"],
            context_chunk_ids=tuple(d["context_chunk_ids"]),
            note=d.get("note", ""),
            allow_empty_context=d.get("allow_empty_context", False),
        )


@dataclass(frozen=True)
class PerturbationResult:
    """Outcome of one regeneration; the base record is never recomputed."""

    answer_orig: str
    answer_pert: str
    verdict_orig: bool
    verdict_pert: bool
    context_label: OutcomeLabel
    stored_id: str
    raw_pert: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "answer_orig": self.answer_orig,
            "answer_pert": self.answer_pert,
            "verdict_orig": self.verdict_orig,
            "verdict_pert": self.verdict_pert,
            "context_label": self.context_label.value,
            "stored_id": self.stored_id,
            "raw_pert": self.raw_pert,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PerturbationResult":
        return cls(
            answer_orig=d["answer_orig"],
            answer_pert=d["answer_pert"],
            verdict_orig=d["verdict_orig"],
            verdict_pert=d["verdict_pert"],
            context_label=OutcomeLabel(d["context_label"]),
            stored_id=d["stored_id"],
            raw_pert=d.get("raw_pert", ""),
        )


def _context_stage_label(
    response: ParsedResponse,
    verdict_correct: bool,
    question: Question,
    context: Sequence[Chunk],
    policy: AttributionPolicy,
    judge_spec: ProviderSpec,
) -> OutcomeLabel:
    """Restricted cascade over context-stage facts only (retrieval bypassed)."""
    if verdict_correct:
        return OutcomeLabel.CORRECT
    if is_unanswerable(question.ground_truth) and not answer_matches_sentinel(
        response.final_answer, policy.unanswerable_sentinel
    ):
        return OutcomeLabel.FP1_MISSING_CONTENT
    if not response.strict_parse_ok:
        return OutcomeLabel.FP5_WRONG_FORMAT
    total = len(question.evidence)
    if total == 0:
        f_context = 1.0
    else:
        f_context = evidence_locations(question, context).count_covered(
            [c.chunk_id for c in context]
        ) / total
    if f_context >= policy.fp4_threshold:
        return OutcomeLabel.FP4_NOT_EXTRACTED
    return adjudicate(response, question, judge_spec)


def perturb_and_regenerate(
    req: PerturbationRequest,
    base: RunRecord,
    question: Question,
    resolver: Mapping[str, Chunk],
    generator: ProviderSpec,
    judge_spec: ProviderSpec,
    policy: AttributionPolicy | None = None,
) -> PerturbationResult:
    """Regenerate with a curated context and compare against the base run.

    The prompt is assembled exactly as the pipeline assembles it; the base
    record is read, never recomputed.
    """
    if base.config_id != req.config_id or base.question_id != req.question_id:
        raise ValueError("request does not match the base record")
    policy = policy or AttributionPolicy()
    context: list[Chunk] = []
    for cid in req.context_chunk_ids:
        chunk = resolver.get(cid)
        if chunk is None:
            raise UnresolvableChunkError(cid)
        context.append(chunk)
    bundle = assemble_prompt(question, context)
    raw = generate(generator, bundle.flatten())
    response = parse_response_lenient(raw)
    verdict = judge(
        judge_spec,
        question.text,
        question.ground_truth,
        response.final_answer,
        response.raw,
        adjudicate=False,
    )
    label = _context_stage_label(
        response, verdict.correct, question, context, policy, judge_spec
    )
    return PerturbationResult(
        answer_orig=base.response.final_answer,
        answer_pert=response.final_answer,
        verdict_orig=base.judge_verdict.correct,
        verdict_pert=verdict.correct,
        context_label=label,
        stored_id=req.stored_id(),
        raw_pert=raw,
    )


def append_perturbation(
    log_path: Path, req: PerturbationRequest, result: PerturbationResult
) -> dict[str, Any]:
    """Append one perturbation to the append-only JSONL log; returns the row."""
    row = {"request": req.to_dict(), "result": result.to_dict(), "stored_id": result.stored_id}
    log_path = Path(log_path)
    log_path.parent.mkdir(parents=True, exist_ok=True)
    with open(log_path, "a", encoding="utf-8") as fh:
        fh.write(canonical_json(row) + "\n")
    return row


def read_perturbation_log(log_path: Path) -> list[dict[str, Any]]:
    log_path = Path(log_path)
    if not log_path.exists():
        return []
    from ragscope.store import read_jsonl

    return read_jsonl(log_path, skip_bad_tail=True)
