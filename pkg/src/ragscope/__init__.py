"""ragscope: sweep, score, and diagnose RAG pipeline configurations."""

__version__ = "0.1.0"

from ragscope.domain import (  # noqa: F401
    Chunk,
    ConfigSpace,
    CoverageStats,
    Document,
    EvidenceRef,
    OutcomeLabel,
    ParsedResponse,
    Question,
    RagConfig,
    RunRecord,
    canonical_config_id,
    validate_config_space,
)
