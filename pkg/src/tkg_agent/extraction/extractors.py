"""Tuple extractors: a deterministic pattern-based one and an LLM-backed one."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Protocol

from ..kg_store import EntityType

if TYPE_CHECKING:
    from ..llm import Gateway

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TupleCandidate:
    subject: str
    predicate: str
    object: str
    subject_type: EntityType = EntityType.OBJ
    object_type: EntityType = EntityType.OBJ

    def __post_init__(self):
        for name in ("subject", "predicate", "object"):
            value = " ".join(str(getattr(self, name)).split())
            if not value:
                raise ValueError(f"tuple {name} is empty")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "subject_type", _coerce_type(self.subject_type))
        object.__setattr__(self, "object_type", _coerce_type(self.object_type))


def _coerce_type(value) -> EntityType:
    try:
        return EntityType.parse(value)
    except ValueError:
        return EntityType.OBJ


class Extractor(Protocol):
    def extract(self, text: str) -> list[TupleCandidate]: ...


DETERMINERS = {"the", "a", "an", "some"}
AGENT_WORDS = {"you", "agent", "i"}

# Commands an agent can take, longest first so "pick up" wins over "pick".
AGENT_VERBS = sorted([
    "go", "goes", "went", "move", "moves", "moved", "open", "opens", "opened", "close", "closes", "closed",
    "pick up", "picks up", "picked up", "put", "puts", "pour", "pours", "poured", "activate", "activates",
    "activated", "deactivate", "deactivates", "deactivated", "focus on", "focuses on", "focused on",
    "use", "uses", "used", "take", "takes", "took", "look at", "looks at", "looked at", "read", "reads",
    "move to", "moves to", "moved to", "enter", "enters", "entered", "mix", "mixes", "mixed",
], key=len, reverse=True)

# (surface phrase, stored predicate), checked in order.
RELATIONS: list[tuple[str, str]] = [
    ("was born in", "born in"),
    ("is located in", "is in"),
    ("is inside", "is in"),
    ("is in", "is in"),
    ("are in", "is in"),
    ("is on", "is on"),
    ("are on", "is on"),
    ("contains", "contains"),
    ("contain", "contains"),
    ("connects to", "connects to"),
    ("leads to", "leads to"),
    ("lives in", "lives in"),
    ("died in", "died in"),
    ("works for", "works for"),
    ("is married to", "married to"),
    ("was founded by", "founded by"),
    ("was written by", "written by"),
    ("was directed by", "directed by"),
    ("wrote", "wrote"),
    ("directed", "directed"),
    ("founded", "founded"),
    ("has", "has"),
]

PERSON_SUBJECT = {"born in", "lives in", "died in", "works for", "married to", "wrote", "directed", "founded"}
PERSON_OBJECT = {"married to", "founded by", "written by", "directed by"}
LOCATION_OBJECT = {"born in", "is in", "lives in", "died in", "connects to", "leads to"}

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?;])\s+|\n+")


def _clean(phrase: str) -> str:
    words = re.sub(r"[^\w\s'-]", " ", phrase.lower()).split()
    while words and words[0] in DETERMINERS:
        words = words[1:]
    return " ".join(words)


def _split_list(phrase: str) -> list[str]:
    parts = re.split(r",\s*|\s+and\s+", phrase)
    return [p for p in (_clean(x) for x in parts) if p]


@dataclass
class RuleExtractor:
    """Pattern-based extractor.

    Recognizes ``X is in Y``, ``X contains Y``, ``X is the R of Y``, ``X is Y``,
    ``agent VERB X`` and a small table of further relation phrases. Entity
    types come from ``lexicon`` when the name is known, otherwise from the
    relation the entity appears in.
    """

    lexicon: dict[str, EntityType] = field(default_factory=dict)

    def extract(self, text: str) -> list[TupleCandidate]:
        out: list[TupleCandidate] = []
        for raw in _SENTENCE_SPLIT.split(text or ""):
            sentence = raw.strip().rstrip(".!?;").strip()
            if not sentence:
                continue
            for tup in self._sentence(sentence):
                if tup not in out:
                    out.append(tup)
        return out

    def _sentence(self, sentence: str) -> list[TupleCandidate]:
        s = " ".join(sentence.lower().split())
        s = re.sub(r"^(?:then|now|and)\s+", "", s)
        s = re.sub(r"^(?:you|i) (?:are|am)\b", "agent is", s)
        s = re.sub(r"^(?:the )?agent (?:is|was) now\b", "agent is", s)

        m = re.match(r"^(?:the )?(?:agent|you|i) (?P<verb>%s)(?: (?P<rest>.+))?$"
                     % "|".join(map(re.escape, AGENT_VERBS)), s)
        if m and m.group("rest"):
            target = re.split(r"\s+(?:into|in|on|onto|to|with|from)\s+", m.group("rest"), maxsplit=1)[0]
            if m.group("verb").endswith((" to",)) or m.group("verb") in ("go", "goes", "went", "enter", "enters", "entered"):
                target = re.sub(r"^to\s+", "", m.group("rest"))
            return [self._make("agent", m.group("verb"), obj, "agent_action") for obj in _split_list(target)]

        m = re.match(r"^(?P<s>.+?) (?:is|was) the (?P<rel>[a-z][a-z ]*?) of (?P<o>.+)$", s)
        if m:
            return [self._make(m.group("s"), f"{m.group('rel')} of", o, "of") for o in _split_list(m.group("o"))]

        for phrase, pred in RELATIONS:
            m = re.match(r"^(?P<s>.+?) %s (?P<o>.+)$" % re.escape(phrase), s)
            if m:
                return [self._make(m.group("s"), pred, o, pred) for o in _split_list(m.group("o"))]

        m = re.match(r"^(?P<s>.+?) (?:is|are|was|were) (?:now )?(?P<o>.+)$", s)
        if m:
            return [self._make(m.group("s"), "is", o, "is") for o in _split_list(m.group("o"))]
        return []

    def _make(self, subject: str, predicate: str, obj: str, relation: str) -> TupleCandidate:
        subj = _clean(subject)
        if subj in AGENT_WORDS:
            subj = "agent"
        obj = _clean(obj)
        return TupleCandidate(subj, predicate, obj, self._type(subj, relation, "s"), self._type(obj, relation, "o"))

    def _type(self, name: str, relation: str, role: str) -> EntityType:
        if name in self.lexicon:
            return self.lexicon[name]
        if name == "agent":
            return EntityType.PER
        if relation == "agent_action":
            return EntityType.OBJ
        if relation == "of":
            return EntityType.LOC
        if relation == "is" and role == "o":
            return EntityType.CONCEPT
        if role == "s" and relation in PERSON_SUBJECT:
            return EntityType.PER
        if role == "o" and relation in PERSON_OBJECT:
            return EntityType.PER
        if role == "o" and relation in LOCATION_OBJECT:
            return EntityType.LOC
        return EntityType.OBJ


class LLMExtractor:
    def __init__(self, lm: "Gateway"):
        self.lm = lm

    def extract(self, text: str) -> list[TupleCandidate]:
        from ..llm import render

        return self.lm.structured(render("extract", text=text), "tuples")
