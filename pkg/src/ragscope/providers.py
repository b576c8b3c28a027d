"""Embedding, reranking, generation and judging backends behind one interface.

Three modes per provider:

* ``http`` — OpenAI-compatible endpoints (embeddings / chat completions /
  rerank scoring), with bounded retries and a per-provider in-flight cap.
* ``mock_lexical`` — deterministic token-hash / token-overlap stand-ins, pure
  functions of their inputs, so the whole test suite runs offline.
* ``mock_scripted`` — generator responses looked up from a fixture file keyed
  by (question id, digest of the ordered context chunk ids), giving tests
  exact control over every failure class.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import httpx
import numpy as np

from ragscope.comparison import jaccard_words
from ragscope.corpus import tokenize
from ragscope.domain import Chunk
from ragscope.prompting import parse_prompt, scripted_key

KINDS = frozenset({"embed", "rerank", "generate", "judge"})
MODES = frozenset({"http", "mock_lexical", "mock_scripted"})

RETRY_ATTEMPTS = 3
BACKOFF_BASE_SECONDS = 0.5
DEFAULT_MAX_IN_FLIGHT = 4
HTTP_TIMEOUT_SECONDS = 60.0

# Default semantic-field table for the mock adjudicator: (answer, ground truth)
# pairs where the answer is a less specific cover of the truth. Judge specs can
# extend it via their fixture file.
_DEFAULT_SPECIFICITY_PAIRS = frozenset({("france", "paris")})

_STOPWORDS = frozenset(
    "a an and are as at by for in is it its of on or that the this to was were with".split()
)

JUDGE_SYSTEM_PROMPT = """You grade question-answering outputs.
Given a question, the reference answer, the model's final answer and the model's raw response, decide:
1. "correct": whether the final answer is semantically equivalent to the reference answer.
2. Only if not correct and adjudication is requested, classify the failure:
   - "FP6": the answer is less specific than the reference requires.
   - "FP7": the answer is incomplete, missing part of a multi-part reference answer.
   - "Unknown": ambiguous or not classifiable.
Respond with only a JSON object: {"correct": <bool>, "category": "FP6"|"FP7"|"Unknown"|null, "rationale": <string>}"""


class ProviderError(RuntimeError):
    """A backend call failed after bounded retries; carries the attempt log."""

    def __init__(self, message: str, attempts: Sequence[str] = ()):
        super().__init__(message)
        self.attempts = list(attempts)


class FixtureMissError(LookupError):
    """A scripted fixture has no entry for the requested key (a test bug)."""


class JudgeError(RuntimeError):
    """The judge reply could not be parsed into a verdict."""


@dataclass(frozen=True)
class ProviderSpec:
    kind: str
    name: str
    mode: str
    endpoint: str | None = None
    auth_env_var: str | None = None
    dimension: int | None = None
    fixture_path: str | None = None
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown provider mode {self.mode!r}")
        if self.mode == "http" and not self.endpoint:
            raise ValueError(f"provider {self.name!r}: http mode requires an endpoint")
        if self.mode == "mock_scripted" and not self.fixture_path:
            raise ValueError(f"provider {self.name!r}: mock_scripted requires fixture_path")
        if self.kind == "embed" and self.mode == "mock_lexical" and not self.dimension:
            raise ValueError(f"provider {self.name!r}: lexical embedder requires dimension")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "name": self.name,
            "mode": self.mode,
            "endpoint": self.endpoint,
            "auth_env_var": self.auth_env_var,
            "dimension": self.dimension,
            "fixture_path": self.fixture_path,
            "max_in_flight": self.max_in_flight,
        }

    @classmethod
    def from_dict(cls, name: str, d: Mapping[str, Any]) -> "ProviderSpec":
        return cls(
            kind=d["kind"],
            name=d.get("name", name),
            mode=d["mode"],
            endpoint=d.get("endpoint"),
            auth_env_var=d.get("auth_env_var"),
            dimension=d.get("dimension"),
            fixture_path=d.get("fixture_path"),
            max_in_flight=d.get("max_in_flight", DEFAULT_MAX_IN_FLIGHT),
        )


@dataclass(frozen=True)
class JudgeVerdict:
    correct: bool
    category: str | None  # FP6 | FP7 | Unknown, only from adjudication
    rationale: str

    def __post_init__(self) -> None:
        if self.category is not None and self.correct:
            raise ValueError("category is only meaningful for incorrect verdicts")
        if self.category not in (None, "FP6", "FP7", "Unknown"):
            raise ValueError(f"bad adjudication category {self.category!r}")


def load_registry(path: Path) -> dict[str, ProviderSpec]:
    """Load the provider registry: JSON mapping names to specs.

    Relative fixture paths are resolved against the registry file's directory.
    """
    path = Path(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    registry: dict[str, ProviderSpec] = {}
    for name, entry in raw.items():
        spec = ProviderSpec.from_dict(name, entry)
        if spec.fixture_path and not Path(spec.fixture_path).is_absolute():
            spec = ProviderSpec.from_dict(
                name, {**spec.to_dict(), "fixture_path": str(path.parent / spec.fixture_path)}
            )
        registry[name] = spec
    return registry


def lookup(registry: Mapping[str, ProviderSpec], name: str, kind: str) -> ProviderSpec:
    spec = registry.get(name)
    if spec is None:
        raise KeyError(f"provider {name!r} not in registry")
    if spec.kind != kind:
        raise ValueError(f"provider {name!r} has kind {spec.kind!r}, expected {kind!r}")
    return spec


# ---------------------------------------------------------------------------
# HTTP plumbing

_semaphores: dict[str, threading.BoundedSemaphore] = {}
_semaphores_lock = threading.Lock()


def _semaphore_for(spec: ProviderSpec) -> threading.BoundedSemaphore:
    with _semaphores_lock:
        sem = _semaphores.get(spec.name)
        if sem is None:
            sem = threading.BoundedSemaphore(spec.max_in_flight)
            _semaphores[spec.name] = sem
        return sem


def _auth_headers(spec: ProviderSpec) -> dict[str, str]:
    if not spec.auth_env_var:
        return {}
    token = os.environ.get(spec.auth_env_var)
    if not token:
        raise ProviderError(
            f"provider {spec.name!r}: environment variable {spec.auth_env_var} is not set"
        )
    return {"Authorization": f"Bearer {token}"}


def _post_json(
    spec: ProviderSpec,
    path: str,
    payload: dict[str, Any],
    client: httpx.Client | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> dict[str, Any]:
    """POST with 3 attempts and exponential backoff (base 500 ms)."""
    url = (spec.endpoint or "").rstrip("/") + path
    headers = _auth_headers(spec)
    attempts: list[str] = []
    own_client = client is None
    http = client or httpx.Client(timeout=HTTP_TIMEOUT_SECONDS)
    try:
        for attempt in range(1, RETRY_ATTEMPTS + 1):
            try:
                with _semaphore_for(spec):
                    response = http.post(url, json=payload, headers=headers)
            except httpx.HTTPError as exc:
                attempts.append(f"attempt {attempt}: {type(exc).__name__}: {exc}")
            else:
                if response.status_code == 200:
                    return response.json()
                attempts.append(f"attempt {attempt}: HTTP {response.status_code}")
                if response.status_code not in (429,) and response.status_code < 500:
                    break  # non-retryable client error
            if attempt < RETRY_ATTEMPTS:
                sleep(BACKOFF_BASE_SECONDS * 2 ** (attempt - 1))
        raise ProviderError(f"provider {spec.name!r}: {url} failed", attempts)
    finally:
        if own_client:
            http.close()


# ---------------------------------------------------------------------------
# Embedding

def _bucket(token: str, dimension: int) -> int:
    # crc32 is stable across processes, unlike hash().
    return zlib.crc32(token.encode("utf-8")) % dimension


def _lexical_embed(text: str, dimension: int) -> np.ndarray:
    counts = np.zeros(dimension, dtype=np.float64)
    for token in tokenize(text) or [""]:
        counts[_bucket(token, dimension)] += 1.0
    return counts / np.linalg.norm(counts)


def embed_texts(
    spec: ProviderSpec, texts: Sequence[str], client: httpx.Client | None = None
) -> list[np.ndarray]:
    """Embed texts into unit-norm vectors, one per input, fixed dimension."""
    if spec.kind != "embed":
        raise ValueError(f"provider {spec.name!r} is not an embedder")
    if spec.mode == "mock_lexical":
        assert spec.dimension is not None
        return [_lexical_embed(t, spec.dimension) for t in texts]
    if spec.mode == "mock_scripted":
        raise ValueError("scripted mode is only defined for generators")
    body = _post_json(spec, "/embeddings", {"model": spec.name, "input": list(texts)}, client)
    vectors = []
    for item in body["data"]:
        v = np.asarray(item["embedding"], dtype=np.float64)
        if spec.dimension is not None and v.shape[0] != spec.dimension:
            raise ProviderError(
                f"provider {spec.name!r}: expected dimension {spec.dimension}, got {v.shape[0]}"
            )
        norm = np.linalg.norm(v)
        vectors.append(v / norm if norm > 0 else v)
    if len(vectors) != len(texts):
        raise ProviderError(f"provider {spec.name!r}: embedding count mismatch")
    return vectors


# ---------------------------------------------------------------------------
# Reranking

def rerank(
    spec: ProviderSpec,
    query: str,
    chunks: Sequence[Chunk],
    client: httpx.Client | None = None,
) -> list[tuple[str, float]]:
    """Score chunks against a query; descending score, ties by chunk_id."""
    if spec.kind != "rerank":
        raise ValueError(f"provider {spec.name!r} is not a reranker")
    if spec.mode == "mock_lexical":
        scored = [(c.chunk_id, jaccard_words(query, c.text)) for c in chunks]
    elif spec.mode == "http":
        body = _post_json(
            spec,
            "/rerank",
            {"model": spec.name, "query": query, "documents": [c.text for c in chunks]},
            client,
        )
        scored = [
            (chunks[r["index"]].chunk_id, float(r["relevance_score"])) for r in body["results"]
        ]
        if len(scored) != len(chunks):
            raise ProviderError(f"provider {spec.name!r}: rerank result count mismatch")
    else:
        raise ValueError("scripted mode is only defined for generators")
    return sorted(scored, key=lambda pair: (-pair[1], pair[0]))


# ---------------------------------------------------------------------------
# Generation

def _load_fixture(path: str) -> dict[str, str]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


def _lexical_generate(prompt: str) -> str:
    """Deterministic extractive stand-in for a generator.

    Picks the two context sentences with the highest token overlap with the
    question as supporting sentences; the answer is the first up-to-three
    content tokens after the last question token of the best sentence.
    """
    fields = parse_prompt(prompt)
    question_tokens = set(tokenize(fields.question_text))
    sentences: list[str] = []
    for _, text in fields.chunks:
        sentences.extend(s for s in _SENTENCE_SPLIT.split(text) if s.strip())
    if not sentences:
        return json.dumps({"supporting_sentences": [], "final_answer": "unknown"})
    ranked = sorted(
        range(len(sentences)),
        key=lambda i: (-len(set(tokenize(sentences[i])) & question_tokens), i),
    )
    supporting = [sentences[i] for i in sorted(ranked[:2])]
    best = sentences[ranked[0]]
    best_tokens = tokenize(best)
    last_hit = max((i for i, t in enumerate(best_tokens) if t in question_tokens), default=-1)

    def content(tokens: Sequence[str]) -> list[str]:
        return [t for t in tokens if t not in _STOPWORDS]

    answer_tokens = content(best_tokens[last_hit + 1 :])[:3] or content(best_tokens)[:3]
    final_answer = " ".join(answer_tokens) if answer_tokens else "unknown"
    return json.dumps({"supporting_sentences": supporting, "final_answer": final_answer})


def generate(spec: ProviderSpec, prompt: str, client: httpx.Client | None = None) -> str:
    """Produce the raw generator response for a rendered prompt."""
    if spec.kind != "generate":
        raise ValueError(f"provider {spec.name!r} is not a generator")
    if spec.mode == "mock_scripted":
        fields = parse_prompt(prompt)
        key = scripted_key(fields.question_id, [cid for cid, _ in fields.chunks])
        fixture = _load_fixture(spec.fixture_path or "")
        if key not in fixture:
            raise FixtureMissError(
                f"scripted generator {spec.name!r} has no entry for {key!r}"
            )
        return fixture[key]
    if spec.mode == "mock_lexical":
        return _lexical_generate(prompt)
    body = _post_json(
        spec,
        "/chat/completions",
        {
            "model": spec.name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        },
        client,
    )
    return body["choices"][0]["message"]["content"]


# ---------------------------------------------------------------------------
# Judging

def _norm_phrase(text: str) -> str:
    return " ".join(tokenize(text))


def _contains_tokens(haystack: Sequence[str], needle: Sequence[str]) -> bool:
    if not needle:
        return True
    n = len(needle)
    return any(list(haystack[i : i + n]) == list(needle) for i in range(len(haystack) - n + 1))


def _specificity_pairs(spec: ProviderSpec) -> frozenset[tuple[str, str]]:
    if not spec.fixture_path:
        return _DEFAULT_SPECIFICITY_PAIRS
    table = json.loads(Path(spec.fixture_path).read_text(encoding="utf-8"))
    pairs = {(_norm_phrase(a), _norm_phrase(g)) for a, g in table.get("specificity", [])}
    return _DEFAULT_SPECIFICITY_PAIRS | frozenset(pairs)


def _mock_judge(
    spec: ProviderSpec,
    ground_truth: str,
    final_answer: str,
    adjudicate: bool,
) -> JudgeVerdict:
    answer_tokens = tokenize(final_answer)
    truth_tokens = tokenize(ground_truth)
    correct = bool(truth_tokens) and _contains_tokens(answer_tokens, truth_tokens)
    if correct:
        return JudgeVerdict(True, None, "answer contains the reference answer")
    if not adjudicate:
        return JudgeVerdict(False, None, "answer does not match the reference answer")
    if (_norm_phrase(final_answer), _norm_phrase(ground_truth)) in _specificity_pairs(spec):
        return JudgeVerdict(False, "FP6", "answer is a less specific cover of the reference")
    if answer_tokens and set(answer_tokens) < set(truth_tokens):
        return JudgeVerdict(False, "FP7", "answer is a strict subset of the reference")
    return JudgeVerdict(False, "Unknown", "not classifiable by the lexical rules")


def judge(
    spec: ProviderSpec,
    question: str,
    ground_truth: str,
    final_answer: str,
    raw_response: str,
    adjudicate: bool = False,
    client: httpx.Client | None = None,
) -> JudgeVerdict:
    """Grade an answer; with ``adjudicate``, also classify the failure kind."""
    if spec.kind != "judge":
        raise ValueError(f"provider {spec.name!r} is not a judge")
    if spec.mode == "mock_lexical":
        return _mock_judge(spec, ground_truth, final_answer, adjudicate)
    if spec.mode == "mock_scripted":
        raise ValueError("scripted mode is only defined for generators")
    user_payload = json.dumps(
        {
            "question": question,
            "ground_truth": ground_truth,
            "final_answer": final_answer,
            "raw_response": raw_response,
            "adjudicate": adjudicate,
        }
    )
    body = _post_json(
        spec,
        "/chat/completions",
        {
            "model": spec.name,
            "messages": [
                {"role": "system", "content": JUDGE_SYSTEM_PROMPT},
                {"role": "user", "content": user_payload},
            ],
            "temperature": 0,
        },
        client,
    )
    content = body["choices"][0]["message"]["content"]
    try:
        verdict = json.loads(content)
        correct = bool(verdict["correct"])
        category = verdict.get("category")
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise JudgeError(f"unparseable judge reply: {content!r}") from exc
    if correct or not adjudicate:
        category = None
    elif category not in ("FP6", "FP7", "Unknown"):
        category = "Unknown"
    return JudgeVerdict(correct, category, str(verdict.get("rationale", "")))
