"""The generation prompt contract.

The rendered prompt is the only thing a generator sees, so the question id
and the ordered chunk ids are embedded in it; that keeps every mock generator
a pure function of (provider, prompt). Chunk text is flattened to one line so
the chunk listing stays machine-parseable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from ragscope.domain import Chunk, Question, UNANSWERABLE_SENTINEL
from ragscope.store import digest12

SYSTEM_INSTRUCTIONS = (
    "You are a question answering assistant. Answer using only the numbered "
    "context chunks below.\n"
    "Respond with a single JSON object containing exactly two keys:\n"
    '  "supporting_sentences": an array of the exact sentences copied from the '
    "context that support your answer\n"
    '  "final_answer": a concise answer of at most three words\n'
    "If the context does not contain the information needed to answer, "
    f'"final_answer" must be exactly "{UNANSWERABLE_SENTINEL}".'
)

EMPTY_CONTEXT_MARKER = "(no context retrieved)"

_QUESTION_LINE_RE = re.compile(r"^Question \(id (?P<qid>\S+)\): (?P<text>.*)$")
_CHUNK_LINE_RE = re.compile(r"^\[(?P<idx>\d+)\] \(chunk (?P<cid>\S+)\) (?P<text>.*)$")


@dataclass(frozen=True)
class PromptBundle:
    system_instructions: str
    user_payload: str

    def flatten(self) -> str:
        return f"{self.system_instructions}\n\n{self.user_payload}"


def _flatten_ws(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def assemble_prompt(question: Question, context: Sequence[Chunk]) -> PromptBundle:
    """Render the deterministic prompt for a question and its ranked context.

    Chunks appear in ranking order, each prefixed with its 1-based index and
    chunk id; an empty context is marked explicitly.
    """
    lines = [f"Question (id {question.question_id}): {_flatten_ws(question.text)}", ""]
    lines.append("Context chunks:")
    if context:
        for i, chunk in enumerate(context, start=1):
            lines.append(f"[{i}] (chunk {chunk.chunk_id}) {_flatten_ws(chunk.text)}")
    else:
        lines.append(EMPTY_CONTEXT_MARKER)
    return PromptBundle(SYSTEM_INSTRUCTIONS, "\n".join(lines))


def context_digest(chunk_ids: Sequence[str]) -> str:
    """Digest of an ordered context, used to key scripted generator fixtures."""
    return digest12("\n".join(chunk_ids))


def scripted_key(question_id: str, chunk_ids: Sequence[str]) -> str:
    return f"{question_id}|{context_digest(chunk_ids)}"


@dataclass(frozen=True)
class PromptFields:
    """What a mock generator recovers from a rendered prompt."""

    question_id: str
    question_text: str
    chunks: tuple[tuple[str, str], ...]  # (chunk_id, flattened text), in order


def parse_prompt(prompt: str) -> PromptFields:
    """Recover question id/text and the ordered chunk listing from a prompt.

    Only prompts rendered by ``assemble_prompt`` are supported; anything else
    raises ValueError.
    """
    question_id = None
    question_text = ""
    chunks: list[tuple[str, str]] = []
    for line in prompt.splitlines():
        m = _QUESTION_LINE_RE.match(line)
        if m and question_id is None:
            question_id = m.group("qid")
            question_text = m.group("text")
            continue
        m = _CHUNK_LINE_RE.match(line)
        if m and int(m.group("idx")) == len(chunks) + 1:
            chunks.append((m.group("cid"), m.group("text")))
    if question_id is None:
        raise ValueError("prompt does not follow the rendered prompt format")
    return PromptFields(question_id, question_text, tuple(chunks))
