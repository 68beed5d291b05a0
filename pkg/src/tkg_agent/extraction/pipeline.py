"""summarize -> resolve coreferences -> extract tuples -> insert into the graph."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

from ..kg_store import GraphError, TemporalGraph
from ..llm import LLMError, StructuredParseError
from .coref import IdentityResolver, Resolver
from .extractors import Extractor, RuleExtractor, TupleCandidate

if TYPE_CHECKING:
    from ..llm import Gateway

logger = logging.getLogger(__name__)

MAX_SUMMARY_WORDS = 120


@dataclass(frozen=True)
class Transition:
    o_t: str
    a_t: str
    o_next: str
    t: int
    episode: str = ""

    def __post_init__(self):
        if not (self.o_t.strip() and self.a_t.strip() and self.o_next.strip()):
            raise ValueError("transition texts must be non-empty")
        if self.t < 0:
            raise ValueError("transition timestamp must be >= 0")


@dataclass
class PipelineConfig:
    """How text becomes facts.

    With ``summarize`` off (or no model given) a transition is rendered as
    ``"Agent <action>. <observation after>"`` and fed to the extractor directly.
    """

    summarize: bool = True
    summarize_documents: bool = False
    resolver: Resolver = field(default_factory=IdentityResolver)
    extractor: Extractor = field(default_factory=RuleExtractor)


def summarize_transition(tr: Transition, lm: "Gateway") -> str:
    text = lm.ask("summarize", o_t=tr.o_t, a_t=tr.a_t, o_next=tr.o_next)
    words = text.split()
    if len(words) > MAX_SUMMARY_WORDS:
        logger.warning("summary truncated from %d to %d words", len(words), MAX_SUMMARY_WORDS)
        words = words[:MAX_SUMMARY_WORDS]
    return " ".join(words)


def resolve_coreferences(text: str, resolver: Resolver) -> str:
    try:
        return resolver.resolve(text)
    except (LLMError, ValueError, RuntimeError) as exc:
        logger.warning("coreference resolver failed (%s); using text unchanged", exc)
        return text


def extract_tuples(text: str, extractor: Extractor) -> list[TupleCandidate]:
    if not text or not text.strip():
        return []
    try:
        return list(extractor.extract(text))
    except (StructuredParseError, ValueError, KeyError, TypeError) as exc:
        logger.warning("tuple extraction failed (%s); no tuples from this text", exc)
        return []


def ingest_text(text: str, t: int, episode: str, graph: TemporalGraph, config: PipelineConfig) -> int:
    """Resolve, extract and insert; returns the number of new facts."""
    resolved = resolve_coreferences(text, config.resolver)
    before = len(graph)
    for tup in extract_tuples(resolved, config.extractor):
        try:
            s = graph.upsert_entity(tup.subject, tup.subject_type)
            o = graph.upsert_entity(tup.object, tup.object_type)
            graph.insert_fact(s, tup.predicate, o, t, episode)
        except GraphError as exc:
            logger.warning("skipped tuple %s: %s", (tup.subject, tup.predicate, tup.object), exc)
    return len(graph) - before


def transition_text(tr: Transition, config: PipelineConfig, lm: "Gateway | None") -> str:
    if config.summarize and lm is not None:
        return summarize_transition(tr, lm)
    return f"Agent {tr.a_t}. {tr.o_next}"


def ingest_transition(tr: Transition, graph: TemporalGraph, config: PipelineConfig,
                      lm: "Gateway | None" = None) -> int:
    return ingest_text(transition_text(tr, config, lm), tr.t, tr.episode, graph, config)


def ingest_documents(chunks: Sequence[str], graph: TemporalGraph, config: PipelineConfig,
                     lm: "Gateway | None" = None, corpus_id: str = "corpus") -> int:
    """Ingest chunk ``i`` as a pseudo-transition stamped ``t = i``."""
    if not chunks:
        raise ValueError("no chunks to ingest")
    added = 0
    for i, chunk in enumerate(chunks):
        if not chunk or not chunk.strip():
            logger.warning("skipping empty chunk %d of %s", i, corpus_id)
            continue
        text = chunk
        if config.summarize_documents and lm is not None:
            text = lm.ask("summarize_document", chunk=chunk)
        added += ingest_text(text, i, corpus_id, graph, config)
    return added
