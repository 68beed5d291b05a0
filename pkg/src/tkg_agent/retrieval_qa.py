"""Graph question answering and the bounded inner-monologue loop.

A question is answered in three moves: narrow the graph to relevant entity
types and two seed entities, grow the seeds into a maximal subgraph, then
hand the subgraph's facts to the model oldest-first to summarize or
extrapolate an answer.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Sequence

from .kg_store import ALL_TYPES, EntityType, TemporalGraph, canonical_name, temporal_order
from .llm import QueryOrAnswer, StructuredParseError, render
from .trace import Tracer

if TYPE_CHECKING:
    from .llm import Gateway

logger = logging.getLogger(__name__)

FACT_BUDGET = 200
MODULES = ("transition-model", "reward-model", "policy", "external-qa")
GROUNDED, EXTRAPOLATED, UNKNOWN = "grounded", "extrapolated", "unknown"

_TYPE_ALIASES = {
    "person": EntityType.PER, "people": EntityType.PER, "location": EntityType.LOC, "place": EntityType.LOC,
    "object": EntityType.OBJ, "action": EntityType.ACTION, "substance": EntityType.SUBSTANCE,
    "concept": EntityType.CONCEPT,
}


class UnknownEntityError(LookupError):
    pass


@dataclass(frozen=True)
class Query:
    text: str
    module: str = "external-qa"

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("query text is empty")
        if self.module not in MODULES:
            raise ValueError(f"unknown asking module {self.module!r}")


@dataclass(frozen=True)
class Answer:
    text: str
    supporting: tuple[int, ...] = ()
    confidence: str = UNKNOWN

    def __post_init__(self):
        if self.confidence == GROUNDED and not self.supporting:
            raise ValueError("grounded answers must cite a fact")
        if self.confidence == UNKNOWN and self.supporting:
            raise ValueError("unknown answers cite no facts")


@dataclass(frozen=True)
class MonologueEntry:
    query: Query
    answer: Answer
    turn: int


def _as_query(q: "Query | str", module: str = "external-qa") -> Query:
    return q if isinstance(q, Query) else Query(str(q), module)


def _tokens(text: str) -> set[str]:
    return set(re.findall(r"[a-z0-9]+", text.lower()))


def select_entity_types(q: "Query | str", lm: "Gateway", graph: TemporalGraph | None = None) -> set[EntityType]:
    """Ask the model which entity types matter; unparseable replies mean all types.

    Types of entities that the question names verbatim are always included.
    """
    q = _as_query(q)
    reply = lm.ask("select_types", query=q.text, types=", ".join(t.value for t in EntityType))
    chosen: set[EntityType] = set()
    for word in re.findall(r"[A-Za-z]+", reply):
        if word.upper() in EntityType.__members__:
            chosen.add(EntityType[word.upper()])
        elif word.lower() in _TYPE_ALIASES:
            chosen.add(_TYPE_ALIASES[word.lower()])
    if not chosen:
        logger.info("no entity types in reply %r; using the full taxonomy", reply[:80])
        return set(ALL_TYPES)
    if graph is not None:
        text = " " + canonical_name(re.sub(r"[^\w\s]", " ", q.text)) + " "
        for ent in graph.entities:
            if f" {ent.name} " in text:
                chosen.add(ent.etype)
    return chosen


def overlap_rank(text: str, candidates: Sequence[tuple[int, str]]) -> list[tuple[int, str]]:
    """Candidates ordered by shared-token count with ``text`` (ties by id)."""
    pool = _tokens(text)
    return sorted(candidates, key=lambda c: (-len(_tokens(c[1]) & pool), c[0]))


def select_seed_entities(q: "Query | str", candidates: Sequence[tuple[int, str]], lm: "Gateway") -> list[int]:
    """Pick the two most relevant candidates (one if only one exists).

    Names the model invents are replaced by the best lexical-overlap candidates.
    """
    q = _as_query(q)
    if not candidates:
        raise UnknownEntityError("no candidate entities to choose from")
    want = min(2, len(candidates))
    if len(candidates) == 1:
        return [candidates[0][0]]
    by_name = {name: eid for eid, name in candidates}
    listing = "\n".join(f"- {name}" for _, name in candidates)
    reply = lm.ask("select_seeds", query=q.text, candidates=listing)
    chosen: list[int] = []
    rejected: list[str] = []
    for piece in re.split(r"[\n,;]+", reply):
        name = canonical_name(re.sub(r"^\s*(?:[-*]|\d+[.)])\s*", "", piece).strip(" .\"'`"))
        if not name:
            continue
        eid = by_name.get(name)
        if eid is None:
            rejected.append(name)
        elif eid not in chosen:
            chosen.append(eid)
        if len(chosen) == want:
            break
    if len(chosen) < want:
        if rejected:
            logger.info("seed names %s not among candidates; using lexical overlap", rejected)
        for eid, _ in overlap_rank(q.text + " " + " ".join(rejected), candidates):
            if len(chosen) == want:
                break
            if eid not in chosen:
                chosen.append(eid)
    return chosen[:want]


def graph_qa(
    q: "Query | str",
    graph: TemporalGraph,
    lm: "Gateway",
    hop_limit: int | None = None,
    fact_budget: int = FACT_BUDGET,
    tracer: Tracer | None = None,
) -> Answer:
    q = _as_query(q)
    types: set[EntityType] = set()
    seeds: list[int] = []
    ordered = []
    truncated = False
    if graph.is_empty:
        answer = Answer("unknown", (), UNKNOWN)
    else:
        types = select_entity_types(q, lm, graph)
        candidates = graph.entities_of_types(types)
        if not candidates:
            answer = Answer("unknown", (), UNKNOWN)
        else:
            seeds = select_seed_entities(q, candidates, lm)
            sub = graph.expand_subgraph(seeds, max_hops=hop_limit)
            ordered = temporal_order(sub.facts)
            if len(ordered) > fact_budget:
                truncated = True
                ordered = ordered[-fact_budget:]
            if not ordered:
                answer = Answer("unknown", (), UNKNOWN)
            else:
                assert all(a.t <= b.t for a, b in zip(ordered, ordered[1:]))
                lines = "\n".join(graph.render_fact(f) for f in ordered)
                text = lm.ask("graph_answer", query=q.text, facts=lines).strip()
                if text.lower().strip(" .") in ("", "unknown"):
                    # the model declined to answer from these facts
                    answer = Answer("unknown", (), UNKNOWN)
                else:
                    answer = Answer(text, tuple(f.seq for f in ordered), EXTRAPOLATED if truncated else GROUNDED)
    if tracer is not None:
        tracer.emit("qa", query=q.text, module=q.module, types=sorted(t.value for t in types),
                    seeds=[graph.name(s) for s in seeds], facts=list(answer.supporting),
                    answer=answer.text, confidence=answer.confidence)
    return answer


class Monologue:
    """Running list of (query, answer) turns with a hard budget of ``k`` graph queries.

    A disabled monologue (no world-model graph) has zero budget and never
    touches the graph.
    """

    def __init__(self, graph: TemporalGraph | None, lm: "Gateway", k: int, hop_limit: int | None = None,
                 tracer: Tracer | None = None):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.graph = graph
        self.lm = lm
        self.k = k
        self.hop_limit = hop_limit
        self.tracer = tracer
        self.entries: list[MonologueEntry] = []

    @property
    def enabled(self) -> bool:
        return self.graph is not None

    @property
    def remaining(self) -> int:
        return self.k - len(self.entries) if self.enabled else 0

    def __len__(self) -> int:
        return len(self.entries)

    def ask(self, text: str, module: str = "external-qa") -> Answer:
        if self.remaining <= 0:
            raise RuntimeError("monologue budget exhausted")
        q = Query(text, module)
        answer = graph_qa(q, self.graph, self.lm, hop_limit=self.hop_limit, tracer=self.tracer)
        self.entries.append(MonologueEntry(q, answer, len(self.entries)))
        return answer

    def render(self) -> str:
        if not self.entries:
            return "(none)"
        return "\n".join(f"Q{e.turn + 1}: {e.query.text}\nA{e.turn + 1}: {e.answer.text}" for e in self.entries)

    def prompt_fields(self) -> dict:
        left = self.remaining
        force = "" if left > 0 else "No queries remain. You must answer now."
        return {"monologue": self.render(), "queries_left": left, "force": force}


Predictor = Callable[[str, Monologue], QueryOrAnswer]


def llm_predictor(lm: "Gateway") -> Predictor:
    def predict(question: str, mono: Monologue) -> QueryOrAnswer:
        prompt = render("monologue", question=question, **mono.prompt_fields())
        try:
            return lm.structured(prompt, "query_or_answer")
        except StructuredParseError as exc:
            return QueryOrAnswer(answer={"answer": exc.raw.strip()})

    return predict


def run_monologue(
    query: "Query | str",
    graph: TemporalGraph | None,
    lm: "Gateway",
    k: int = 5,
    predictor: Predictor | None = None,
    tracer: Tracer | None = None,
    hop_limit: int | None = None,
) -> tuple[Answer, list[MonologueEntry]]:
    """Let the predictor query the graph up to ``k`` times, then force an answer."""
    q = _as_query(query)
    mono = Monologue(graph, lm, k, hop_limit=hop_limit, tracer=tracer)
    predictor = predictor or llm_predictor(lm)
    while True:
        reply = predictor(q.text, mono)
        if reply.is_query and mono.remaining > 0:
            mono.ask(reply.query, q.module)
            continue
        break
    support = tuple(dict.fromkeys(s for e in mono.entries for s in e.answer.supporting))
    if reply.is_query:
        text = mono.entries[-1].answer.text if mono.entries else "unknown"
    else:
        value = reply.answer
        text = str(value.get("answer", next(iter(value.values())))) if isinstance(value, dict) else str(value)
    if support:
        confidence = EXTRAPOLATED if any(e.answer.confidence == EXTRAPOLATED for e in mono.entries) else GROUNDED
    else:
        confidence = UNKNOWN
    return Answer(text, support, confidence), list(mono.entries)
