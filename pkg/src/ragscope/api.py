"""Read-mostly HTTP service over a sweep store.

Every GET is a pure read of the store files; the one mutating endpoint,
POST /api/sweeps/{id}/perturb, appends to the perturbation log. Error bodies
are machine-readable: {"status", "code", "message"} with codes from a closed
set (see docs/api.md).
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ragscope.comparison import (
    DEFAULT_JACCARD_THRESHOLD,
    component_aggregates,
    dual_track_payload,
    transition_matrix,
)
from ragscope.domain import Chunk, OutcomeLabel, Question, RunRecord
from ragscope.metrics import METRIC_NAMES
from ragscope.perturbation import (
    PerturbationRequest,
    UnresolvableChunkError,
    append_perturbation,
    perturb_and_regenerate,
    read_perturbation_log,
)
from ragscope.providers import FixtureMissError, ProviderError, lookup
from ragscope.store import SweepPaths, read_jsonl, store_sweeps_dir
from ragscope.sweep import SweepManifest, load_manifest, load_runs, load_store_registry

DEFAULT_PORT = 7341
DEFAULT_PAGE_LIMIT = 100


class ApiError(Exception):
    """HTTP error with a machine-readable code from the documented closed set."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message

    def to_dict(self) -> dict[str, Any]:
        return {"status": self.status, "code": self.code, "message": self.message}


class _SweepState:
    """Lazily loaded, mtime-invalidated view of one sweep directory."""

    def __init__(self, sweep_dir: Path):
        self.paths = SweepPaths(sweep_dir)
        self._lock = threading.Lock()
        self._runs_mtime: float | None = None
        self._records: dict[str, dict[str, RunRecord]] = {}
        self._chunks: dict[str, Chunk] | None = None
        self.manifest: SweepManifest = load_manifest(sweep_dir)
        self.perturb_lock = threading.Lock()

    def records(self) -> dict[str, dict[str, RunRecord]]:
        """config_id -> question_id -> record."""
        with self._lock:
            mtime = self.paths.runs.stat().st_mtime if self.paths.runs.exists() else None
            if mtime != self._runs_mtime:
                grouped: dict[str, dict[str, RunRecord]] = {}
                for record in load_runs(self.paths.root):
                    grouped.setdefault(record.config_id, {})[record.question_id] = record
                self._records = grouped
                self._runs_mtime = mtime
            return self._records

    def chunks(self) -> dict[str, Chunk]:
        """Union of every chunk store in the sweep, in digest order."""
        with self._lock:
            if self._chunks is None:
                merged: dict[str, Chunk] = {}
                for path in sorted(self.paths.chunks_dir.glob("*.jsonl")):
                    for row in read_jsonl(path):
                        chunk = Chunk.from_dict(row)
                        merged[chunk.chunk_id] = chunk
                self._chunks = merged
            return self._chunks

    def resolver_for(self, config_id: str) -> dict[str, Chunk]:
        """All chunks, with the base config's store winning id collisions.

        Chunk ids embed only (doc, offset), so two chunkings can both produce
        e.g. doc:0 with different extents; a perturbation against a config
        must resolve such ids from that config's own store.
        """
        return {**self.chunks(), **self.config_chunks(config_id)}

    def config_chunks(self, config_id: str) -> dict[str, Chunk]:
        """Chunks of the store belonging to one config's chunking params."""
        from ragscope.corpus import ChunkingParams, chunking_digest

        config = self.manifest.configs[config_id]
        digest = chunking_digest(
            ChunkingParams(config.chunk_size, config.chunk_overlap),
            self.manifest.corpus_digest,
        )
        path = self.paths.chunk_store(digest)
        return {c.chunk_id: c for c in (Chunk.from_dict(r) for r in read_jsonl(path))}


def _load_questions_file(store_root: Path) -> dict[str, Question]:
    from ragscope.corpus import load_questions

    path = Path(store_root) / "questions.jsonl"
    if not path.exists():
        return {}
    return {q.question_id: q for q in load_questions(path)}


def create_app(store_root: Path, ui_dir: Path | None = None) -> FastAPI:
    """Build the service over a store root (the `--out` directory of a sweep)."""
    store_root = Path(store_root)
    app = FastAPI(title="ragscope", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    states: dict[str, _SweepState] = {}
    questions = _load_questions_file(store_root)

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(status_code=exc.status, content=exc.to_dict())

    def state_for(sweep_id: str) -> _SweepState:
        sweeps = store_sweeps_dir(store_root)
        sweep_dir = sweeps / sweep_id
        if not (sweep_dir / "manifest.json").exists():
            raise ApiError(404, "sweep_not_found", f"no sweep {sweep_id!r}")
        state = states.get(sweep_id)
        if state is None:
            state = _SweepState(sweep_dir)
            states[sweep_id] = state
        return state

    def config_records(state: _SweepState, config_id: str) -> dict[str, RunRecord]:
        if config_id not in state.manifest.configs:
            raise ApiError(404, "config_not_found", f"no config {config_id!r}")
        return state.records().get(config_id, {})

    def parse_label(name: str) -> OutcomeLabel:
        try:
            return OutcomeLabel(name)
        except ValueError:
            raise ApiError(400, "invalid_label", f"unknown outcome label {name!r}")

    def manifest_summary(manifest: SweepManifest) -> dict[str, Any]:
        return {
            "sweep_id": manifest.sweep_id,
            "status": manifest.status,
            "n_configs": len(manifest.config_ids),
            "n_runs": manifest.n_runs,
            "n_errors": manifest.n_errors,
        }

    @app.get("/api/sweeps")
    def list_sweeps() -> list[dict[str, Any]]:
        sweeps = store_sweeps_dir(store_root)
        if not sweeps.is_dir():
            return []
        out = []
        for path in sorted(sweeps.iterdir()):
            if (path / "manifest.json").exists():
                out.append(manifest_summary(state_for(path.name).manifest))
        return out

    @app.get("/api/sweeps/{sweep_id}")
    def sweep_detail(sweep_id: str) -> dict[str, Any]:
        return state_for(sweep_id).manifest.to_dict()

    @app.get("/api/sweeps/{sweep_id}/overview")
    def overview(sweep_id: str, metric: str = "accuracy") -> dict[str, Any]:
        if metric not in METRIC_NAMES:
            raise ApiError(400, "invalid_metric", f"metric must be one of {METRIC_NAMES}")
        state = state_for(sweep_id)
        manifest = state.manifest
        ordered = sorted(
            manifest.config_ids,
            key=lambda cid: (-manifest.reports[cid].value(metric), cid),
        )
        return {
            "sweep_id": sweep_id,
            "metric": metric,
            "configs": [
                {
                    "config_id": cid,
                    "options": manifest.configs[cid].options(),
                    "metrics": manifest.reports[cid].to_dict(),
                    "histogram": manifest.histograms.get(cid, {}),
                }
                for cid in ordered
            ],
            "aggregates": [a.to_dict() for a in component_aggregates(manifest, metric)],
        }

    @app.get("/api/sweeps/{sweep_id}/compare")
    def compare(sweep_id: str, a: str = "", b: str = "") -> dict[str, Any]:
        if not a or not b:
            raise ApiError(400, "missing_param", "query params a and b are required")
        state = state_for(sweep_id)
        records_a = list(config_records(state, a).values())
        records_b = list(config_records(state, b).values())
        try:
            matrix = transition_matrix(records_a, records_b)
        except ValueError as exc:
            raise ApiError(400, "empty_intersection", str(exc))
        return matrix.to_dict()

    @app.get("/api/sweeps/{sweep_id}/compare/instances")
    def compare_instances(
        sweep_id: str,
        a: str = "",
        b: str = "",
        from_label: str | None = Query(default=None, alias="from"),
        to_label: str | None = Query(default=None, alias="to"),
        limit: int = DEFAULT_PAGE_LIMIT,
        offset: int = 0,
    ) -> dict[str, Any]:
        if not a or not b:
            raise ApiError(400, "missing_param", "query params a and b are required")
        state = state_for(sweep_id)
        recs_a = config_records(state, a)
        recs_b = config_records(state, b)
        label_from = parse_label(from_label) if from_label is not None else None
        label_to = parse_label(to_label) if to_label is not None else None
        common = sorted(
            qid
            for qid in set(recs_a) & set(recs_b)
            if recs_a[qid].error is None and recs_b[qid].error is None
        )
        rows = []
        for qid in common:
            ra, rb = recs_a[qid], recs_b[qid]
            if label_from is not None and ra.outcome != label_from:
                continue
            if label_to is not None and rb.outcome != label_to:
                continue
            rows.append(
                {
                    "question_id": qid,
                    "text": questions[qid].text if qid in questions else "",
                    "label_a": ra.outcome.value,
                    "label_b": rb.outcome.value,
                    "glyph_a": ra.coverage.glyph_fraction,
                    "glyph_b": rb.coverage.glyph_fraction,
                }
            )
        return {
            "total": len(rows),
            "limit": limit,
            "offset": offset,
            "questions": rows[offset : offset + limit],
        }

    @app.get("/api/sweeps/{sweep_id}/instance")
    def instance(
        sweep_id: str,
        a: str = "",
        b: str = "",
        qid: str = "",
        threshold: float = DEFAULT_JACCARD_THRESHOLD,
    ) -> dict[str, Any]:
        if not a or not b or not qid:
            raise ApiError(400, "missing_param", "query params a, b and qid are required")
        if not 0 < threshold <= 1:
            raise ApiError(400, "invalid_param", "threshold must be in (0, 1]")
        state = state_for(sweep_id)
        recs_a = config_records(state, a)
        recs_b = config_records(state, b)
        if qid not in recs_a or qid not in recs_b:
            raise ApiError(404, "question_not_found", f"no record for question {qid!r}")
        if qid not in questions:
            raise ApiError(404, "question_not_found", f"question {qid!r} not in store")
        payload = dual_track_payload(
            recs_a[qid],
            recs_b[qid],
            threshold,
            questions[qid],
            state.config_chunks(a),
            state.config_chunks(b),
        )
        payload["question"] = questions[qid].to_dict()
        payload["history"] = [
            row
            for row in read_perturbation_log(state.paths.perturbations)
            if row["request"]["question_id"] == qid
        ]
        return payload

    @app.post("/api/sweeps/{sweep_id}/perturb")
    def perturb(sweep_id: str, body: dict[str, Any]) -> dict[str, Any]:
        state = state_for(sweep_id)
        try:
            req = PerturbationRequest.from_dict(body)
        except (KeyError, ValueError) as exc:
            raise ApiError(422, "invalid_request", str(exc))
        records = config_records(state, req.config_id)
        base = records.get(req.question_id)
        if base is None or base.error is not None:
            raise ApiError(404, "question_not_found", f"no base run for {req.question_id!r}")
        if req.question_id not in questions:
            raise ApiError(404, "question_not_found", f"question {req.question_id!r} not in store")
        registry = load_store_registry(state.paths.root)
        config = state.manifest.configs[req.config_id]
        generator = lookup(registry, config.response_model, "generate")
        judges = [s for s in registry.values() if s.kind == "judge"]
        if not judges:
            raise ApiError(500, "store_invalid", "no judge provider in the store registry")
        try:
            with state.perturb_lock:
                result = perturb_and_regenerate(
                    req,
                    base,
                    questions[req.question_id],
                    state.resolver_for(req.config_id),
                    generator,
                    judges[0],
                )
                append_perturbation(state.paths.perturbations, req, result)
        except UnresolvableChunkError as exc:
            raise ApiError(422, "unresolvable_chunk", str(exc))
        except FixtureMissError as exc:
            raise ApiError(422, "fixture_miss", str(exc))
        except ProviderError as exc:
            raise ApiError(502, "provider_error", str(exc))
        return result.to_dict()

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
