#!/usr/bin/env python3
"""Convert the MultiHop-RAG dataset files into ragscope's JSONL inputs.

Usage:
    python scripts/convert_multihop.py --corpus corpus.json \
        --questions MultiHopRAG.json --out data/

See docs/multihop_mapping.md for the field mapping.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def convert_corpus(rows: list[dict]) -> tuple[list[dict], dict[str, str]]:
    docs = []
    url_to_id: dict[str, str] = {}
    seen: set[str] = set()
    for i, row in enumerate(rows):
        doc_id = row.get("url") or f"doc-{i}"
        if doc_id in seen:
            doc_id = f"{doc_id}#{i}"
        seen.add(doc_id)
        if row.get("url"):
            url_to_id[row["url"]] = doc_id
        body = (row.get("body") or "").strip()
        if not body:
            continue
        metadata = {
            k: str(row[k]) for k in ("source", "category", "published_at") if row.get(k)
        }
        docs.append(
            {
                "doc_id": doc_id,
                "title": row.get("title", ""),
                "body": body,
                "metadata": metadata,
            }
        )
    return docs, url_to_id


def convert_questions(rows: list[dict], url_to_id: dict[str, str]) -> list[dict]:
    questions = []
    for i, row in enumerate(rows):
        answer = (row.get("answer") or "").strip()
        if answer.casefold() == "insufficient information":
            answer = "insufficient information"
        evidence = []
        for item in row.get("evidence_list") or []:
            fact = (item.get("fact") or "").strip()
            if not fact:
                continue
            evidence.append(
                {"doc_id": url_to_id.get(item.get("url") or "", ""), "sentence": fact}
            )
        if not evidence and answer != "insufficient information":
            # unanswerable is the only shape allowed to ship without evidence
            continue
        questions.append(
            {
                "question_id": f"q{i}",
                "text": row.get("query", ""),
                "ground_truth": answer,
                "evidence": evidence,
            }
        )
    return questions


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", required=True, help="MultiHop-RAG corpus.json")
    parser.add_argument("--questions", required=True, help="MultiHopRAG.json")
    parser.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args()

    corpus_rows = json.loads(Path(args.corpus).read_text(encoding="utf-8"))
    question_rows = json.loads(Path(args.questions).read_text(encoding="utf-8"))
    docs, url_to_id = convert_corpus(corpus_rows)
    questions = convert_questions(question_rows, url_to_id)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "corpus.jsonl").write_text(
        "".join(canonical(d) + "\n" for d in docs), encoding="utf-8"
    )
    (out / "questions.jsonl").write_text(
        "".join(canonical(q) + "\n" for q in questions), encoding="utf-8"
    )
    print(f"docs={len(docs)} questions={len(questions)} -> {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
