from .coref import IdentityResolver, LLMResolver, Resolver, RuleResolver
from .extractors import Extractor, LLMExtractor, RuleExtractor, TupleCandidate
from .pipeline import (
    PipelineConfig,
    Transition,
    extract_tuples,
    ingest_documents,
    ingest_text,
    ingest_transition,
    resolve_coreferences,
    summarize_transition,
)

__all__ = [
    "Extractor", "IdentityResolver", "LLMExtractor", "LLMResolver", "PipelineConfig", "Resolver",
    "RuleExtractor", "RuleResolver", "Transition", "TupleCandidate", "extract_tuples", "ingest_documents",
    "ingest_text", "ingest_transition", "resolve_coreferences", "summarize_transition",
]
