"""Append-only temporal knowledge graph.

Entities are canonicalized names with a type tag; facts are
``(subject, predicate, object, t)`` quads stamped with the environment step
at which they were observed. The graph only ever grows within a run.
"""

from __future__ import annotations

import json
import logging
import threading
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Iterable

logger = logging.getLogger(__name__)

REFLEXIVE_PREDICATES = frozenset({"is"})


class EntityType(str, Enum):
    PER = "PER"
    LOC = "LOC"
    OBJ = "OBJ"
    ACTION = "ACTION"
    SUBSTANCE = "SUBSTANCE"
    CONCEPT = "CONCEPT"

    @classmethod
    def parse(cls, value: "str | EntityType") -> "EntityType":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(f"unknown entity type {value!r}") from None


ALL_TYPES = frozenset(EntityType)


class GraphError(Exception):
    """Rejected graph mutation or query."""


class GraphParseError(GraphError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def canonical_name(name: str) -> str:
    return " ".join(str(name).split()).lower()


@dataclass(frozen=True)
class Entity:
    id: int
    name: str
    etype: EntityType


@dataclass(frozen=True)
class Fact:
    subject: int
    predicate: str
    object: int
    t: int
    episode: str
    seq: int

    @property
    def key(self) -> tuple[int, str, int, int]:
        return (self.subject, self.predicate, self.object, self.t)


@dataclass(frozen=True)
class Subgraph:
    entities: frozenset[int]
    facts: tuple[Fact, ...]


@dataclass
class TemporalGraph:
    """Entity table, fact list and incidence index.

    Many readers may share one instance; mutations take the writer lock.
    """

    entities: list[Entity] = field(default_factory=list)
    facts: list[Fact] = field(default_factory=list)
    _by_name: dict[str, int] = field(default_factory=dict, repr=False)
    _adjacency: dict[int, list[int]] = field(default_factory=dict, repr=False)
    _keys: dict[tuple[int, str, int, int], int] = field(default_factory=dict, repr=False)
    _next_seq: int = field(default=0, repr=False)
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False, compare=False)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TemporalGraph):
            return NotImplemented
        return self.entities == other.entities and self.facts == other.facts

    def __len__(self) -> int:
        return len(self.facts)

    @property
    def is_empty(self) -> bool:
        return not self.entities

    # -- mutation -----------------------------------------------------------

    def upsert_entity(self, name: str, etype: "EntityType | str") -> int:
        canon = canonical_name(name)
        if not canon:
            raise GraphError("entity name is empty")
        etype = EntityType.parse(etype)
        with self._lock:
            existing = self._by_name.get(canon)
            if existing is not None:
                current = self.entities[existing].etype
                if current is not etype:
                    logger.debug("entity %r keeps type %s (ignored %s)", canon, current.value, etype.value)
                return existing
            eid = len(self.entities)
            self.entities.append(Entity(eid, canon, etype))
            self._by_name[canon] = eid
            self._adjacency[eid] = []
            return eid

    def insert_fact(self, subject: int, predicate: str, object: int, t: int, episode: str = "") -> Fact:
        """Append a quad, returning the stored fact.

        Re-inserting an identical ``(s, p, o, t)`` returns the original fact
        and leaves the graph unchanged.
        """
        predicate = " ".join(str(predicate).split()).lower()
        if not predicate:
            raise GraphError("predicate is empty")
        if int(t) < 0:
            raise GraphError(f"negative timestamp {t}")
        with self._lock:
            for eid in (subject, object):
                if not 0 <= eid < len(self.entities):
                    raise GraphError(f"unknown entity id {eid}")
            if subject == object and predicate not in REFLEXIVE_PREDICATES:
                raise GraphError(f"self-loop on {self.entities[subject].name!r} via {predicate!r}")
            key = (subject, predicate, object, int(t))
            if key in self._keys:
                return self.facts[self._keys[key]]
            fact = Fact(subject, predicate, object, int(t), str(episode), self._next_seq)
            self._append(fact)
            return fact

    def _append(self, fact: Fact) -> None:
        idx = len(self.facts)
        self.facts.append(fact)
        self._keys[fact.key] = idx
        self._adjacency[fact.subject].append(idx)
        if fact.object != fact.subject:
            self._adjacency[fact.object].append(idx)
        self._next_seq = max(self._next_seq, fact.seq + 1)

    # -- queries ------------------------------------------------------------

    def entity_id(self, name: str) -> int | None:
        return self._by_name.get(canonical_name(name))

    def name(self, eid: int) -> str:
        return self.entities[eid].name

    def neighbors(self, eid: int) -> list[Fact]:
        """Facts incident to ``eid``, in insertion order."""
        self._check_entity(eid)
        return [self.facts[i] for i in self._adjacency[eid]]

    def entities_of_types(self, types: Iterable["EntityType | str"]) -> list[tuple[int, str]]:
        wanted = {EntityType.parse(t) for t in types}
        return [(e.id, e.name) for e in self.entities if e.etype in wanted]

    def expand_subgraph(self, seeds: Iterable[int], max_hops: int | None = None) -> Subgraph:
        """Grow the seed set by repeatedly pulling in incident facts.

        Each round adds every fact touching the current frontier and makes the
        newly reached endpoints the next frontier. ``max_hops=None`` runs to a
        fixpoint, which yields the union of components reachable from the seeds.
        """
        seeds = list(seeds)
        if not seeds:
            raise GraphError("expand_subgraph needs at least one seed")
        for eid in seeds:
            self._check_entity(eid)
        if max_hops is not None and max_hops < 0:
            raise GraphError("max_hops must be >= 0")
        with self._lock:
            reached = set(seeds)
            fact_idx: set[int] = set()
            frontier = deque(sorted(reached))
            hops = 0
            while frontier and (max_hops is None or hops < max_hops):
                nxt: list[int] = []
                for eid in frontier:
                    for i in self._adjacency[eid]:
                        fact_idx.add(i)
                        f = self.facts[i]
                        for other in (f.subject, f.object):
                            if other not in reached:
                                reached.add(other)
                                nxt.append(other)
                frontier = deque(nxt)
                hops += 1
            facts = tuple(self.facts[i] for i in sorted(fact_idx))
        return Subgraph(frozenset(reached), facts)

    def render_fact(self, fact: Fact) -> str:
        return f"t={fact.t}: {self.name(fact.subject)} --{fact.predicate}--> {self.name(fact.object)}"

    def check_integrity(self) -> None:
        """Raise GraphError if any stored fact or index entry is inconsistent."""
        n = len(self.entities)
        last_seq = -1
        for i, f in enumerate(self.facts):
            if not (0 <= f.subject < n and 0 <= f.object < n):
                raise GraphError(f"fact {f.seq} references a missing entity")
            if f.seq <= last_seq:
                raise GraphError(f"fact {f.seq} breaks sequence order")
            last_seq = f.seq
            if i not in self._adjacency[f.subject] or i not in self._adjacency[f.object]:
                raise GraphError(f"fact {f.seq} missing from adjacency index")
        if len(self._keys) != len(self.facts):
            raise GraphError("duplicate quads stored")

    def _check_entity(self, eid: int) -> None:
        if not 0 <= eid < len(self.entities):
            raise GraphError(f"unknown entity id {eid}")

    # -- persistence --------------------------------------------------------

    def dumps(self) -> str:
        lines = []
        for e in self.entities:
            lines.append(_dump({"kind": "entity", "id": e.id, "name": e.name, "etype": e.etype.value}))
        for f in self.facts:
            lines.append(_dump({"kind": "fact", "s": f.subject, "p": f.predicate, "o": f.object,
                                "t": f.t, "ep": f.episode, "seq": f.seq}))
        return "".join(line + "\n" for line in lines)

    def save(self, sink: "str | Path | IO[str]") -> None:
        text = self.dumps()
        if isinstance(sink, (str, Path)):
            path = Path(sink)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        else:
            sink.write(text)

    @classmethod
    def loads(cls, text: str) -> "TemporalGraph":
        graph = cls()
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise GraphParseError(lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise GraphParseError(lineno, "record is not an object")
            try:
                kind = rec["kind"]
                if kind == "entity":
                    if rec["id"] != len(graph.entities):
                        raise GraphParseError(lineno, f"entity id {rec['id']} out of order")
                    name = canonical_name(rec["name"])
                    if not name or name in graph._by_name:
                        raise GraphParseError(lineno, f"bad or duplicate entity name {rec['name']!r}")
                    ent = Entity(rec["id"], name, EntityType.parse(rec["etype"]))
                    graph.entities.append(ent)
                    graph._by_name[name] = ent.id
                    graph._adjacency[ent.id] = []
                elif kind == "fact":
                    fact = Fact(int(rec["s"]), str(rec["p"]), int(rec["o"]), int(rec["t"]),
                                str(rec["ep"]), int(rec["seq"]))
                    n = len(graph.entities)
                    if not (0 <= fact.subject < n and 0 <= fact.object < n):
                        raise GraphParseError(lineno, "fact references an entity not yet defined")
                    if fact.seq < graph._next_seq or fact.t < 0 or fact.key in graph._keys:
                        raise GraphParseError(lineno, "fact violates seq/timestamp/uniqueness rules")
                    graph._append(fact)
                else:
                    raise GraphParseError(lineno, f"unknown record kind {kind!r}")
            except GraphParseError:
                raise
            except (KeyError, TypeError, ValueError) as exc:
                raise GraphParseError(lineno, f"malformed record ({exc})") from None
        return graph

    @classmethod
    def load(cls, source: "str | Path | IO[str]") -> "TemporalGraph":
        if isinstance(source, (str, Path)):
            return cls.loads(Path(source).read_text(encoding="utf-8"))
        return cls.loads(source.read())


def temporal_order(facts: Iterable[Fact]) -> list[Fact]:
    """Sort facts by timestamp, ties broken by insertion sequence."""
    return sorted(facts, key=lambda f: (f.t, f.seq))


def _dump(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))
