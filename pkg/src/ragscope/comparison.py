"""Pairwise configuration diagnostics.

Outcome-transition matrices between two configurations, cross-config chunk
correspondence by word-set Jaccard similarity, per-option metric aggregates,
and the dual-track instance payload the text views consume.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Iterable, Mapping, Sequence

from ragscope.corpus import evidence_matches, find_evidence_in_chunk, tokenize
from ragscope.domain import (
    CONFIG_FIELDS,
    Chunk,
    EvidenceRef,
    OUTCOME_ORDER,
    OutcomeLabel,
    Question,
    RunRecord,
)

if TYPE_CHECKING:
    from ragscope.sweep import SweepManifest

DEFAULT_JACCARD_THRESHOLD = 0.3


def jaccard_words(a: str, b: str) -> float:
    """Unique-word-set intersection over union; two empty sets count as 1.0."""
    wa, wb = set(tokenize(a)), set(tokenize(b))
    union = wa | wb
    if not union:
        return 1.0
    return len(wa & wb) / len(union)


@dataclass(frozen=True)
class ChunkPairing:
    """All cross-config chunk pairs at or above the similarity threshold."""

    pairs: tuple[tuple[str, str, float], ...]
    threshold: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "threshold": self.threshold,
            "pairs": [[a, b, j] for a, b, j in self.pairs],
        }


def match_chunks(
    chunks_a: Sequence[Chunk], chunks_b: Sequence[Chunk], threshold: float
) -> ChunkPairing:
    """Pair chunks across two configurations by word-level Jaccard similarity.

    The full cross product is scored; pairs below ``threshold`` are dropped
    and the rest sorted by similarity descending, then by (id_a, id_b).
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    pairs = []
    tokens_b = [(c.chunk_id, set(tokenize(c.text))) for c in chunks_b]
    for ca in chunks_a:
        wa = set(tokenize(ca.text))
        for cid_b, wb in tokens_b:
            union = wa | wb
            j = 1.0 if not union else len(wa & wb) / len(union)
            if j >= threshold:
                pairs.append((ca.chunk_id, cid_b, j))
    pairs.sort(key=lambda p: (-p[2], p[0], p[1]))
    return ChunkPairing(tuple(pairs), threshold)


@dataclass(frozen=True)
class TransitionMatrix:
    """Counts of questions moving between outcome labels across two configs.

    All nine labels are present in both dimensions even at count zero, so
    node ordering is stable for the UI.
    """

    config_a: str
    config_b: str
    counts: tuple[tuple[int, ...], ...]  # [label_a index][label_b index]
    question_ids: Mapping[tuple[OutcomeLabel, OutcomeLabel], tuple[str, ...]]

    def count(self, label_a: OutcomeLabel, label_b: OutcomeLabel) -> int:
        return self.counts[OUTCOME_ORDER.index(label_a)][OUTCOME_ORDER.index(label_b)]

    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def row_sums(self) -> dict[OutcomeLabel, int]:
        return {label: sum(row) for label, row in zip(OUTCOME_ORDER, self.counts)}

    def col_sums(self) -> dict[OutcomeLabel, int]:
        return {
            label: sum(row[j] for row in self.counts)
            for j, label in enumerate(OUTCOME_ORDER)
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            "config_a": self.config_a,
            "config_b": self.config_b,
            "labels": [label.value for label in OUTCOME_ORDER],
            "counts": [list(row) for row in self.counts],
            "question_ids": {
                f"{a.value}->{b.value}": list(qids)
                for (a, b), qids in sorted(
                    self.question_ids.items(),
                    key=lambda kv: (OUTCOME_ORDER.index(kv[0][0]), OUTCOME_ORDER.index(kv[0][1])),
                )
            },
        }


def transition_matrix(
    records_a: Sequence[RunRecord], records_b: Sequence[RunRecord]
) -> TransitionMatrix:
    """Build the 9x9 outcome-transition grid over questions run under both configs.

    Only questions with non-error records on both sides are counted.
    """
    by_q_a = {r.question_id: r for r in records_a if r.error is None}
    by_q_b = {r.question_id: r for r in records_b if r.error is None}
    common = sorted(set(by_q_a) & set(by_q_b))
    if not common:
        raise ValueError("the two record sets share no evaluated questions")
    index = {label: i for i, label in enumerate(OUTCOME_ORDER)}
    counts = [[0] * len(OUTCOME_ORDER) for _ in OUTCOME_ORDER]
    qids: dict[tuple[OutcomeLabel, OutcomeLabel], list[str]] = {}
    for qid in common:
        la, lb = by_q_a[qid].outcome, by_q_b[qid].outcome
        counts[index[la]][index[lb]] += 1
        qids.setdefault((la, lb), []).append(qid)
    config_a = records_a[0].config_id if records_a else ""
    config_b = records_b[0].config_id if records_b else ""
    return TransitionMatrix(
        config_a,
        config_b,
        tuple(tuple(row) for row in counts),
        {k: tuple(sorted(v)) for k, v in qids.items()},
    )


def label_histogram(records: Iterable[RunRecord]) -> dict[OutcomeLabel, int]:
    """Outcome counts over non-error records."""
    out = {label: 0 for label in OUTCOME_ORDER}
    for r in records:
        if r.error is None:
            out[r.outcome] += 1
    return out


@dataclass(frozen=True)
class ComponentAggregate:
    """Mean metric over every configuration containing one option value."""

    component_field: str
    option_value: str
    mean_metric: float
    n_configs: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "component_field": self.component_field,
            "option_value": self.option_value,
            "mean_metric": self.mean_metric,
            "n_configs": self.n_configs,
        }


def component_aggregates(manifest: "SweepManifest", metric: str) -> list[ComponentAggregate]:
    """Average a metric over all configs sharing each component option."""
    groups: dict[tuple[str, str], list[float]] = {}
    for config_id in manifest.config_ids:
        config = manifest.configs[config_id]
        report = manifest.reports[config_id]
        value = report.value(metric)
        for field_name, option in config.options().items():
            groups.setdefault((field_name, option), []).append(value)
    out = []
    for field_name in CONFIG_FIELDS:
        options = sorted({opt for f, opt in groups if f == field_name})
        for option in options:
            values = groups[(field_name, option)]
            out.append(
                ComponentAggregate(field_name, option, sum(values) / len(values), len(values))
            )
    return out


def _span_list(spans: Iterable[tuple[int, int]]) -> list[list[int]]:
    return [[s, e] for s, e in sorted(set(spans))]


def _track_entries(
    record: RunRecord, question: Question, chunks_by_id: Mapping[str, Chunk]
) -> list[dict[str, Any]]:
    ranking = record.final_ranking()
    in_context = set(record.context_chunk_ids)
    entries = []
    for rank, (chunk_id, score) in enumerate(ranking, start=1):
        chunk = chunks_by_id[chunk_id]
        evidence_spans = [(m.char_start, m.char_end) for m in evidence_matches(question, chunk)]
        support_spans = []
        for sentence in record.response.supporting_sentences:
            if not sentence.strip():
                continue
            span = find_evidence_in_chunk(EvidenceRef("", sentence), chunk)
            if span is not None:
                support_spans.append(span)
        entries.append(
            {
                "chunk_id": chunk_id,
                "rank": rank,
                "score": score,
                "in_top_k": chunk_id in in_context,
                "text": chunk.text,
                "evidence_spans": _span_list(evidence_spans),
                "support_spans": _span_list(support_spans),
            }
        )
    return entries


def dual_track_payload(
    record_a: RunRecord,
    record_b: RunRecord,
    threshold: float,
    question: Question,
    chunks_a: Mapping[str, Chunk],
    chunks_b: Mapping[str, Chunk],
) -> dict[str, Any]:
    """Side-by-side rerank-range tracks plus cross-links for one question.

    Each track lists the rerank-range chunks with score, rank and top-k
    membership, evidence spans (orange) and supporting-sentence spans (blue);
    links pair textually similar chunks across the two ranges.
    """
    if record_a.question_id != record_b.question_id:
        raise ValueError("dual-track payload requires records for the same question")
    range_a = [chunks_a[cid] for cid, _ in record_a.final_ranking()]
    range_b = [chunks_b[cid] for cid, _ in record_b.final_ranking()]
    pairing = match_chunks(range_a, range_b, threshold)
    return {
        "question_id": question.question_id,
        "threshold": threshold,
        "a": {
            "config_id": record_a.config_id,
            "outcome": record_a.outcome.value,
            "final_answer": record_a.response.final_answer,
            "glyph_fraction": record_a.coverage.glyph_fraction,
            "track": _track_entries(record_a, question, chunks_a),
        },
        "b": {
            "config_id": record_b.config_id,
            "outcome": record_b.outcome.value,
            "final_answer": record_b.response.final_answer,
            "glyph_fraction": record_b.coverage.glyph_fraction,
            "track": _track_entries(record_b, question, chunks_b),
        },
        "links": [{"a": a, "b": b, "jaccard": j} for a, b, j in pairing.pairs],
    }
