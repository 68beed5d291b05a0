"""Pull structured values (plans, tuples, verdicts, query-or-answer) out of model text."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any, Callable

FENCE = re.compile(r"```[a-zA-Z]*\s*\n(.*?)```", re.DOTALL)


class StructuredParseError(ValueError):
    def __init__(self, message: str, raw: str, shape: str = ""):
        super().__init__(message)
        self.raw = raw
        self.shape = shape


@dataclass(frozen=True)
class QueryOrAnswer:
    query: str | None = None
    answer: Any = None

    @property
    def is_query(self) -> bool:
        return bool(self.query)


def extract_json(text: str) -> Any:
    """Find the first JSON value in ``text``: a fenced block wins, else the first bare object/array."""
    for block in FENCE.findall(text):
        try:
            return json.loads(block.strip())
        except json.JSONDecodeError:
            continue
    decoder = json.JSONDecoder()
    for i, ch in enumerate(text):
        if ch in "[{":
            try:
                value, _ = decoder.raw_decode(text, i)
                return value
            except json.JSONDecodeError:
                continue
    raise ValueError("no JSON block found")


def _plan_steps(value: Any) -> list:
    from ..world_model import PlannedStep

    if isinstance(value, dict) and "steps" in value:
        value = value["steps"]
    if not isinstance(value, list) or not value:
        raise ValueError("expected a non-empty list of plan steps")
    steps = []
    for item in value:
        if isinstance(item, str):
            item = {"action": item}
        if not isinstance(item, dict) or not str(item.get("action", "")).strip():
            raise ValueError(f"plan step without action: {item!r}")
        steps.append(PlannedStep(
            o_pre=str(item.get("o_pre", item.get("observation_before", ""))),
            action=str(item["action"]).strip(),
            o_post=str(item.get("o_hat", item.get("observation", ""))),
            reward=clamp_reward(item.get("r_hat", item.get("reward", 0)))[0],
            rationale=str(item.get("rationale", "")),
        ))
    return steps


def _tuples(value: Any) -> list:
    from ..extraction.extractors import TupleCandidate

    if isinstance(value, dict) and "tuples" in value:
        value = value["tuples"]
    if not isinstance(value, list):
        raise ValueError("expected a list of tuples")
    out = []
    for item in value:
        if isinstance(item, (list, tuple)):
            if len(item) not in (3, 5):
                raise ValueError(f"tuple must have 3 or 5 fields: {item!r}")
            s, p, o, *types = item
            st, ot = types if types else ("OBJ", "OBJ")
        elif isinstance(item, dict):
            s, p, o = item["subject"], item["predicate"], item["object"]
            st, ot = item.get("subject_type", "OBJ"), item.get("object_type", "OBJ")
        else:
            raise ValueError(f"bad tuple {item!r}")
        out.append(TupleCandidate(str(s), str(p), str(o), st, ot))
    return out


VERDICT_LEVELS = ("match", "minor-deviation", "divergence")


def _verdict(value: Any) -> tuple[str, str]:
    if not isinstance(value, dict):
        raise ValueError("verdict must be an object")
    level = str(value.get("verdict", value.get("level", ""))).strip().lower().replace("_", "-").replace(" ", "-")
    if level not in VERDICT_LEVELS:
        raise ValueError(f"unknown verdict level {level!r}")
    return level, str(value.get("rationale", ""))


def _query_or_answer(value: Any) -> QueryOrAnswer:
    if not isinstance(value, dict):
        raise ValueError("expected an object with 'query' or an answer field")
    q = value.get("query")
    if isinstance(q, str) and q.strip():
        return QueryOrAnswer(query=q.strip())
    rest = {k: v for k, v in value.items() if k != "query"}
    if not rest:
        raise ValueError("object carries neither a query nor an answer")
    return QueryOrAnswer(answer=rest)


def _commands(value: Any) -> list[str]:
    if isinstance(value, dict) and "commands" in value:
        value = value["commands"]
    if not isinstance(value, list) or not all(isinstance(c, str) for c in value):
        raise ValueError("expected a list of command strings")
    return [c.strip() for c in value if c.strip()]


SHAPES: dict[str, Callable[[Any], Any]] = {
    "plan_steps": _plan_steps,
    "tuples": _tuples,
    "verdict": _verdict,
    "query_or_answer": _query_or_answer,
    "commands": _commands,
}

SHAPE_HINTS = {
    "plan_steps": '[{"action": "...", "o_hat": "...", "r_hat": 0}, ...]',
    "tuples": '[{"subject": "...", "predicate": "...", "object": "...", "subject_type": "OBJ", "object_type": "LOC"}]',
    "verdict": '{"verdict": "match|minor-deviation|divergence", "rationale": "..."}',
    "query_or_answer": '{"query": "..."} or {"answer": ...}',
    "commands": '["command", ...]',
}


def parse_structured(text: str, shape: str) -> Any:
    if shape not in SHAPES:
        raise KeyError(f"unregistered shape {shape!r}")
    try:
        value = extract_json(text)
        return SHAPES[shape](value)
    except (ValueError, KeyError, TypeError) as exc:
        raise StructuredParseError(f"could not parse {shape}: {exc}", raw=text, shape=shape) from None


def clamp_reward(value: Any) -> tuple[float, bool]:
    """Coerce a reward to [0, 100]; second item is False when the input was unusable."""
    try:
        if isinstance(value, str):
            m = re.search(r"-?\d+(?:\.\d+)?", value)
            if not m:
                return 0.0, False
            value = m.group(0)
        r = float(value)
    except (TypeError, ValueError):
        return 0.0, False
    if r != r:
        return 0.0, False
    return min(100.0, max(0.0, r)), True
