"""Shared fixtures: the committed desk-scale corpus and a reference sweep."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from ragscope.corpus import load_corpus, load_questions
from ragscope.domain import ConfigSpace
from ragscope.providers import load_registry
from ragscope.sweep import execute

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_docs():
    return load_corpus(FIXTURES / "corpus.jsonl")


@pytest.fixture(scope="session")
def fixture_questions():
    return load_questions(FIXTURES / "questions.jsonl")


@pytest.fixture(scope="session")
def fixture_space():
    return ConfigSpace.from_dict(json.loads((FIXTURES / "space.json").read_text()))


@pytest.fixture(scope="session")
def fixture_registry():
    return load_registry(FIXTURES / "providers.json")


@pytest.fixture(scope="session")
def fixture_sweep(tmp_path_factory, fixture_docs, fixture_questions, fixture_space, fixture_registry):
    """One completed sweep over the committed fixture, shared by read-only tests."""
    root = tmp_path_factory.mktemp("store")
    result = execute(
        root, fixture_space, fixture_docs, fixture_questions, fixture_registry, workers=4
    )
    assert result.finished and result.manifest.status == "complete"
    return result
