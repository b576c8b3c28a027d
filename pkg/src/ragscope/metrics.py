"""Retrieval- and generation-stage metrics, per run and per configuration.

A chunk is relevant when it contains at least one of the question's evidence
sentences; the denominator counts relevant chunks across the whole index for
the configuration. Questions without evidence score 1.0 on recall and AP
(vacuous success) so unanswerable questions do not deflate retrieval scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

from ragscope.domain import RunRecord

METRIC_NAMES = ("accuracy", "recall", "mrr", "map")


@dataclass(frozen=True)
class MetricReport:
    """Aggregated quality of one configuration over a question set."""

    config_id: str
    accuracy: float
    recall_at_k: float
    mrr: float
    map: float
    n_questions: int
    n_errors: int

    def value(self, metric: str) -> float:
        if metric == "accuracy":
            return self.accuracy
        if metric == "recall":
            return self.recall_at_k
        if metric == "mrr":
            return self.mrr
        if metric == "map":
            return self.map
        raise KeyError(f"unknown metric {metric!r}; expected one of {METRIC_NAMES}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "config_id": self.config_id,
            "accuracy": self.accuracy,
            "recall_at_k": self.recall_at_k,
            "mrr": self.mrr,
            "map": self.map,
            "n_questions": self.n_questions,
            "n_errors": self.n_errors,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "MetricReport":
        return cls(
            config_id=d["config_id"],
            accuracy=d["accuracy"],
            recall_at_k=d["recall_at_k"],
            mrr=d["mrr"],
            map=d["map"],
            n_questions=d["n_questions"],
            n_errors=d["n_errors"],
        )


Ranking = Sequence[tuple[str, float]]


def recall_at_k(relevant: set[str], ranking: Ranking, k: int) -> float:
    """|relevant ∩ top-k| / |relevant|; 1.0 when nothing is relevant."""
    if not relevant:
        return 1.0
    top = {cid for cid, _ in ranking[:k]}
    return len(relevant & top) / len(relevant)


def reciprocal_rank(relevant: set[str], ranking: Ranking) -> float:
    """1 / rank of the first relevant item; 0 when none is retrieved."""
    for i, (cid, _) in enumerate(ranking, start=1):
        if cid in relevant:
            return 1.0 / i
    return 0.0


def average_precision(relevant: set[str], ranking: Ranking) -> float:
    """Mean of Precision@p over retrieved relevant positions p.

    Relevant items missing from the ranking contribute zero; an empty
    relevant set scores 1.0.
    """
    if not relevant:
        return 1.0
    hits = 0
    precision_sum = 0.0
    for i, (cid, _) in enumerate(ranking, start=1):
        if cid in relevant:
            hits += 1
            precision_sum += hits / i
    return precision_sum / len(relevant)


def aggregate(records: Sequence[RunRecord], k: int, pre_rerank: bool = False) -> MetricReport:
    """Aggregate per-question metrics into one report for a configuration.

    Retrieval metrics are computed on the post-rerank ranking unless
    ``pre_rerank`` asks for the raw retrieval. Error records are excluded
    from every mean; if all records errored, the metrics are reported as 0.
    """
    if not records:
        raise ValueError("cannot aggregate zero records")
    config_ids = {r.config_id for r in records}
    if len(config_ids) != 1:
        raise ValueError(f"records span several configs: {sorted(config_ids)}")
    ok = [r for r in sorted(records, key=lambda r: r.question_id) if r.error is None]
    n_errors = len(records) - len(ok)
    if not ok:
        return MetricReport(records[0].config_id, 0.0, 0.0, 0.0, 0.0, len(records), n_errors)
    recalls, rrs, aps = [], [], []
    correct = 0
    for r in ok:
        relevant = set(r.relevant_chunk_ids)
        ranking = r.retrieved if pre_rerank else r.final_ranking()
        recalls.append(recall_at_k(relevant, ranking, k))
        rrs.append(reciprocal_rank(relevant, ranking))
        aps.append(average_precision(relevant, ranking))
        if r.judge_verdict.correct:
            correct += 1
    n = len(ok)
    return MetricReport(
        config_id=records[0].config_id,
        accuracy=correct / n,
        recall_at_k=sum(recalls) / n,
        mrr=sum(rrs) / n,
        map=sum(aps) / n,
        n_questions=len(records),
        n_errors=n_errors,
    )


def report_rows(reports: Iterable[MetricReport]) -> list[dict[str, Any]]:
    """CSV-friendly rows, one per configuration."""
    return [r.to_dict() for r in reports]
