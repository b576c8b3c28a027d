"""Plain-file run store: canonical JSON, digests, JSONL IO, sweep layout.

Every file the lab writes goes through ``canonical_json`` so that reruns and
resumed runs produce byte-identical stores.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from pathlib import Path
from typing import Any, Iterable, Iterator


def canonical_json(obj: Any) -> str:
    """Deterministic single-line JSON: sorted keys, tight separators."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest12(data: str | bytes) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()[:12]


def file_digest(path: Path) -> str:
    return digest12(Path(path).read_bytes())


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_jsonl(path: Path, rows: Iterable[dict[str, Any]]) -> None:
    atomic_write_text(Path(path), "".join(canonical_json(r) + "\n" for r in rows))


def read_jsonl(path: Path, skip_bad_tail: bool = False) -> list[dict[str, Any]]:
    """Read a JSONL file.

    With ``skip_bad_tail`` a truncated final line (killed writer) is dropped
    instead of raising; corruption anywhere else still raises.
    """
    rows: list[dict[str, Any]] = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError:
            if skip_bad_tail and i == len(lines) - 1:
                break
            raise
    return rows


def iter_jsonl(path: Path) -> Iterator[dict[str, Any]]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


class SweepPaths:
    """File layout of one sweep directory."""

    def __init__(self, root: Path):
        self.root = Path(root)

    @property
    def manifest(self) -> Path:
        return self.root / "manifest.json"

    @property
    def runs(self) -> Path:
        return self.root / "runs.jsonl"

    @property
    def perturbations(self) -> Path:
        return self.root / "perturbations.jsonl"

    @property
    def providers(self) -> Path:
        return self.root / "providers.json"

    @property
    def chunks_dir(self) -> Path:
        return self.root / "chunks"

    @property
    def indexes_dir(self) -> Path:
        return self.root / "indexes"

    @property
    def fixtures_dir(self) -> Path:
        return self.root / "fixtures"

    def chunk_store(self, chunking_digest: str) -> Path:
        return self.chunks_dir / f"{chunking_digest}.jsonl"

    def index_file(self, chunking_digest: str, embedder_name: str) -> Path:
        safe = re.sub(r"[^A-Za-z0-9_-]", "-", embedder_name)
        return self.indexes_dir / f"{chunking_digest}__{safe}.jsonl"

    def ensure_dirs(self) -> None:
        self.chunks_dir.mkdir(parents=True, exist_ok=True)
        self.indexes_dir.mkdir(parents=True, exist_ok=True)
        self.fixtures_dir.mkdir(parents=True, exist_ok=True)


def store_sweeps_dir(store_root: Path) -> Path:
    return Path(store_root) / "sweeps"


def resolve_sweep_dir(path: Path, sweep_id: str | None = None) -> Path:
    """Accept either a sweep directory or a store root holding sweeps/.

    A store root with several sweeps needs an explicit ``sweep_id``.
    """
    path = Path(path)
    if (path / "manifest.json").exists():
        return path
    sweeps = store_sweeps_dir(path)
    if sweep_id is not None:
        candidate = sweeps / sweep_id
        if not (candidate / "manifest.json").exists():
            raise FileNotFoundError(f"no sweep {sweep_id!r} under {path}")
        return candidate
    if sweeps.is_dir():
        found = sorted(p for p in sweeps.iterdir() if (p / "manifest.json").exists())
        if len(found) == 1:
            return found[0]
        if len(found) > 1:
            raise FileNotFoundError(
                f"{path} holds {len(found)} sweeps; pass an explicit sweep id"
            )
    raise FileNotFoundError(f"no sweep manifest found under {path}")
