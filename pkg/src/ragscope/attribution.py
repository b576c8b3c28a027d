"""Hierarchical failure attribution: one outcome label per run.

Incorrect answers fall through a prioritized cascade of checks, first match
wins: unanswerable mishandled (FP1), malformed output (FP5), evidence missing
from the rerank range (FP2), evidence missing from the final context (FP3),
evidence fully present yet unused (FP4), then an adjudicator splits the rest
into wrong specificity (FP6), incomplete answers (FP7), or Unknown.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ragscope.corpus import evidence_locations, tokenize
from ragscope.domain import (
    Chunk,
    OutcomeLabel,
    ParsedResponse,
    Question,
    RunRecord,
    UNANSWERABLE_SENTINEL,
    is_unanswerable,
)
from ragscope.providers import JudgeError, ProviderError, ProviderSpec, judge

# Thresholds: an answer can be right on partial evidence, so the range and
# context checks trip below 70% coverage; FP4 demands the full evidence.
DEFAULT_RANGE_THRESHOLD = 0.7
DEFAULT_CONTEXT_THRESHOLD = 0.7
FP4_THRESHOLD = 1.0


@dataclass(frozen=True)
class AttributionPolicy:
    rerank_range_threshold: float = DEFAULT_RANGE_THRESHOLD
    context_threshold: float = DEFAULT_CONTEXT_THRESHOLD
    fp4_threshold: float = FP4_THRESHOLD
    unanswerable_sentinel: str = UNANSWERABLE_SENTINEL

    def __post_init__(self) -> None:
        for name in ("rerank_range_threshold", "context_threshold"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {value}")
        if self.fp4_threshold != 1.0:
            raise ValueError("fp4_threshold is fixed at 1.0")


def coverage_fractions(
    question: Question,
    rerank_range_ids: Sequence[str],
    context_ids: Sequence[str],
    chunks: Sequence[Chunk],
) -> tuple[float, float]:
    """Fraction of evidence sentences found in the rerank range and context.

    An evidence sentence counts once if found in any chunk of the set; with
    no evidence both fractions are 1.0.
    """
    total = len(question.evidence)
    if total == 0:
        return 1.0, 1.0
    locations = evidence_locations(question, chunks)
    in_range = locations.count_covered(rerank_range_ids)
    in_context = locations.count_covered(context_ids)
    return in_range / total, in_context / total


def answer_matches_sentinel(answer: str, sentinel: str = UNANSWERABLE_SENTINEL) -> bool:
    """Case-folded containment of the sentinel phrase in the answer."""
    needle = tokenize(sentinel)
    haystack = tokenize(answer)
    if not needle:
        return False
    n = len(needle)
    return any(haystack[i : i + n] == needle for i in range(len(haystack) - n + 1))


_CATEGORY_LABELS = {
    "FP6": OutcomeLabel.FP6_INCORRECT_SPECIFICITY,
    "FP7": OutcomeLabel.FP7_INCOMPLETE,
    "Unknown": OutcomeLabel.UNKNOWN,
}


def adjudicate(
    response: ParsedResponse, question: Question, judge_spec: ProviderSpec
) -> OutcomeLabel:
    """Final cascade stage: ask the judge to classify a nuanced failure."""
    try:
        verdict = judge(
            judge_spec,
            question.text,
            question.ground_truth,
            response.final_answer,
            response.raw,
            adjudicate=True,
        )
    except (JudgeError, ProviderError):
        return OutcomeLabel.UNKNOWN  # rationale: judge_error
    if verdict.correct:
        return OutcomeLabel.UNKNOWN  # adjudicator disagreed with the verdict
    return _CATEGORY_LABELS.get(verdict.category or "Unknown", OutcomeLabel.UNKNOWN)


def attribute(
    record: RunRecord,
    question: Question,
    policy: AttributionPolicy,
    judge_spec: ProviderSpec,
) -> OutcomeLabel:
    """Assign the single primary outcome label for one run.

    Checks run strictly in order; the judge is only consulted when every
    mechanical check has passed. Coverage fractions come from the record's
    CoverageStats, which the pipeline froze at run time.
    """
    if record.judge_verdict.correct:
        return OutcomeLabel.CORRECT
    if is_unanswerable(question.ground_truth) and not answer_matches_sentinel(
        record.response.final_answer, policy.unanswerable_sentinel
    ):
        return OutcomeLabel.FP1_MISSING_CONTENT
    if not record.response.strict_parse_ok:
        return OutcomeLabel.FP5_WRONG_FORMAT
    f_range = record.coverage.range_fraction()
    f_context = record.coverage.context_fraction()
    if f_range < policy.rerank_range_threshold:
        return OutcomeLabel.FP2_MISSED_TOP_RANKED
    if f_context < policy.context_threshold:
        return OutcomeLabel.FP3_NOT_IN_CONTEXT
    if f_context >= policy.fp4_threshold:
        return OutcomeLabel.FP4_NOT_EXTRACTED
    # Residual band: enough context to have answered, but not all of it.
    return adjudicate(record.response, question, judge_spec)
