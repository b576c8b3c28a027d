"""Corpus loading, deterministic chunking, and evidence location.

One normalization rule is used everywhere text is compared: Unicode
case-fold, tokens are maximal alphanumeric runs, and a match is a contiguous
token subsequence. This keeps evidence matching robust to whitespace and
punctuation drift without any sentence segmentation.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from ragscope.domain import Chunk, Document, EvidenceRef, Question
from ragscope.store import canonical_json, digest12, read_jsonl, write_jsonl

# Maximal runs of Unicode alphanumerics ([^\W_] = \w minus underscore).
_TOKEN_RE = re.compile(r"[^\W_]+")

# Forward scan window for snap_to_whitespace.
_SNAP_WINDOW = 50


class EmptyDocumentError(ValueError):
    """Raised when asked to chunk a document with an empty body."""


class CorpusLoadError(ValueError):
    """A malformed corpus or question file; carries the offending line number."""

    def __init__(self, path: Path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = Path(path)
        self.line = line


def tokenize(text: str) -> list[str]:
    """Case-folded alphanumeric tokens of ``text``."""
    return [m.group(0).casefold() for m in _TOKEN_RE.finditer(text)]


def token_spans(text: str) -> list[tuple[str, int, int]]:
    """Tokens with their original (start, end) character offsets."""
    return [(m.group(0).casefold(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def contains_token_seq(haystack: str, needle: str) -> bool:
    """True when the token sequence of needle occurs contiguously in haystack."""
    return _find_token_seq(token_spans(haystack), tokenize(needle)) is not None


def _find_token_seq(
    spans: Sequence[tuple[str, int, int]], needle: Sequence[str]
) -> tuple[int, int] | None:
    if not needle or len(needle) > len(spans):
        return None
    tokens = [t for t, _, _ in spans]
    first = needle[0]
    for i in range(len(tokens) - len(needle) + 1):
        if tokens[i] == first and tokens[i : i + len(needle)] == list(needle):
            return spans[i][1], spans[i + len(needle) - 1][2]
    return None


@dataclass(frozen=True)
class ChunkingParams:
    """Sliding-window chunking in characters; stride is size - overlap."""

    chunk_size: int
    chunk_overlap: int
    snap_to_whitespace: bool = False

    def __post_init__(self) -> None:
        if self.chunk_size <= 0:
            raise ValueError(f"chunk_size must be > 0, got {self.chunk_size}")
        if not 0 <= self.chunk_overlap < self.chunk_size:
            raise ValueError(
                f"need 0 <= overlap < size, got overlap={self.chunk_overlap} "
                f"size={self.chunk_size}"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "chunk_size": self.chunk_size,
            "chunk_overlap": self.chunk_overlap,
            "snap_to_whitespace": self.snap_to_whitespace,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ChunkingParams":
        return cls(d["chunk_size"], d["chunk_overlap"], d.get("snap_to_whitespace", False))


@dataclass(frozen=True)
class EvidenceMatch:
    """Where one evidence sentence sits inside a chunk (chunk-relative span)."""

    evidence_index: int
    chunk_id: str
    char_start: int
    char_end: int


def chunk_document(doc: Document, params: ChunkingParams) -> list[Chunk]:
    """Split a document body into overlapping chunks.

    With snapping off, chunk i starts at i * (size - overlap); every chunk
    except the last has exactly ``chunk_size`` characters and every body
    character belongs to at least one chunk. With snapping on, chunk ends are
    extended forward to the next whitespace within 50 characters (hard cut if
    none), so chunks can exceed ``chunk_size`` by up to that window.
    """
    if not doc.body:
        raise EmptyDocumentError(f"document {doc.doc_id!r} has an empty body")
    size, overlap = params.chunk_size, params.chunk_overlap
    stride = size - overlap
    n = len(doc.body)
    chunks: list[Chunk] = []
    start = 0
    while True:
        end = min(start + size, n)
        if params.snap_to_whitespace and end < n:
            window = doc.body[end : end + _SNAP_WINDOW]
            ws = re.search(r"\s", window)
            if ws is not None:
                end += ws.start()
        chunks.append(Chunk.make(doc.doc_id, doc.body[start:end], start, end))
        if start + size >= n:
            break
        start += stride
    return chunks


def chunk_corpus(docs: Iterable[Document], params: ChunkingParams) -> list[Chunk]:
    chunks: list[Chunk] = []
    for doc in docs:
        chunks.extend(chunk_document(doc, params))
    return chunks


def find_evidence_in_chunk(evidence: EvidenceRef, chunk: Chunk) -> tuple[int, int] | None:
    """Locate an evidence sentence inside a chunk.

    Returns the chunk-relative (char_start, char_end) of the span whose
    normalized token sequence equals the evidence's, or None. Evidence split
    across a chunk boundary is not found in either chunk (contiguity).
    """
    return _find_token_seq(token_spans(chunk.text), tokenize(evidence.sentence))


@dataclass(frozen=True)
class EvidenceLocations:
    """Per-evidence sets of chunk ids containing the sentence, for one chunking."""

    per_evidence: tuple[frozenset[str], ...]
    used_corpus_fallback: bool

    def relevant(self) -> frozenset[str]:
        out: set[str] = set()
        for found in self.per_evidence:
            out |= found
        return frozenset(out)

    def count_covered(self, chunk_ids: Iterable[str]) -> int:
        """Evidence sentences found in at least one of the given chunks."""
        ids = set(chunk_ids)
        return sum(1 for found in self.per_evidence if found & ids)


def evidence_locations(question: Question, chunks: Sequence[Chunk]) -> EvidenceLocations:
    """Scan a chunk set for every evidence sentence of a question.

    Evidence with a doc_id is matched only against that document's chunks;
    evidence without one falls back to a corpus-wide search, which is flagged.
    """
    by_doc: dict[str, list[Chunk]] = {}
    for ch in chunks:
        by_doc.setdefault(ch.doc_id, []).append(ch)
    per_evidence: list[frozenset[str]] = []
    fallback = False
    for ev in question.evidence:
        if ev.doc_id:
            candidates: Sequence[Chunk] = by_doc.get(ev.doc_id, ())
        else:
            candidates = chunks
            fallback = True
        needle = tokenize(ev.sentence)
        found = frozenset(
            ch.chunk_id
            for ch in candidates
            if _find_token_seq(token_spans(ch.text), needle) is not None
        )
        per_evidence.append(found)
    return EvidenceLocations(tuple(per_evidence), fallback)


def relevant_chunks(question: Question, chunks: Sequence[Chunk]) -> set[str]:
    """Chunk ids containing at least one evidence sentence of the question."""
    return set(evidence_locations(question, chunks).relevant())


def evidence_matches(question: Question, chunk: Chunk) -> list[EvidenceMatch]:
    """All evidence spans inside one chunk, for highlighting."""
    out: list[EvidenceMatch] = []
    for i, ev in enumerate(question.evidence):
        if ev.doc_id and ev.doc_id != chunk.doc_id:
            continue
        span = find_evidence_in_chunk(ev, chunk)
        if span is not None:
            out.append(EvidenceMatch(i, chunk.chunk_id, span[0], span[1]))
    return out


def chunking_digest(params: ChunkingParams, corpus_digest: str) -> str:
    """Key of the chunk-store file for one (corpus, chunking-params) pair."""
    return digest12(canonical_json({"corpus": corpus_digest, "params": params.to_dict()}))


def write_chunk_store(path: Path, chunks: Sequence[Chunk]) -> None:
    write_jsonl(path, (c.to_dict() for c in chunks))


def read_chunk_store(path: Path) -> list[Chunk]:
    return [Chunk.from_dict(d) for d in read_jsonl(path)]


def _load_records(path: Path, kind: str) -> list[dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        raise CorpusLoadError(path, 0, f"{kind} file does not exist")
    rows: list[dict[str, Any]] = []
    lines = path.read_text(encoding="utf-8").splitlines()
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusLoadError(path, i, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(row, dict):
            raise CorpusLoadError(path, i, "expected a JSON object per line")
        row["_line"] = i
        rows.append(row)
    if not rows:
        raise CorpusLoadError(path, 0, f"{kind} file is empty")
    return rows


def load_corpus(path: Path) -> list[Document]:
    """Load a JSONL corpus ({doc_id, title, body, metadata} per line)."""
    docs: list[Document] = []
    seen: set[str] = set()
    for row in _load_records(path, "corpus"):
        line = row.pop("_line")
        try:
            doc = Document.from_dict(row)
        except (KeyError, ValueError, TypeError) as exc:
            raise CorpusLoadError(Path(path), line, str(exc)) from exc
        if doc.doc_id in seen:
            raise CorpusLoadError(Path(path), line, f"duplicate doc_id {doc.doc_id!r}")
        seen.add(doc.doc_id)
        docs.append(doc)
    return docs


def load_questions(path: Path) -> list[Question]:
    """Load a JSONL question set ({question_id, text, ground_truth, evidence})."""
    questions: list[Question] = []
    seen: set[str] = set()
    for row in _load_records(path, "questions"):
        line = row.pop("_line")
        try:
            q = Question.from_dict(row)
        except (KeyError, ValueError, TypeError) as exc:
            raise CorpusLoadError(Path(path), line, str(exc)) from exc
        if q.question_id in seen:
            raise CorpusLoadError(Path(path), line, f"duplicate question_id {q.question_id!r}")
        seen.add(q.question_id)
        questions.append(q)
    return questions
