"""In-memory event trace with an optional newline-delimited JSON sink."""

from __future__ import annotations

import json
import threading
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator


@dataclass
class Tracer:
    """Collects trace events; each gets a ``kind`` and a running ``seq``.

    ``counters`` tallies events by kind, which the ablation checks read.
    """

    path: Path | None = None
    events: list[dict] = field(default_factory=list)
    counters: Counter = field(default_factory=Counter)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.path is not None:
            self.path = Path(self.path)
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def emit(self, kind: str, **payload: Any) -> dict:
        with self._lock:
            event = {"kind": kind, "seq": len(self.events), **payload}
            self.events.append(event)
            self.counters[kind] += 1
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(dumps(event) + "\n")
        return event

    def count(self, kind: str) -> int:
        return self.counters[kind]

    def of_kind(self, kind: str) -> list[dict]:
        return [e for e in self.events if e["kind"] == kind]


def dumps(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def write_jsonl(path: "str | Path", records) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps(rec) + "\n")


def read_jsonl(path: "str | Path") -> Iterator[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)
