"""Deterministic backend that answers from an ordered list of match rules."""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .core import Completion, NoScriptedMatch, Prompt, count_tokens, substitute


@dataclass
class ScriptedRule:
    """One canned reply.

    ``match`` is a plain substring, ``pattern`` a regex searched over the
    rendered prompt (named groups may be echoed in ``response`` as ``{name}``).
    ``template`` restricts the rule to one prompt template; ``limit`` caps how
    many times the rule may fire.
    """

    response: str
    match: str | None = None
    pattern: str | None = None
    template: str | None = None
    limit: int | None = None
    _regex: re.Pattern | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not (self.match or self.pattern):
            raise ValueError("scripted rule needs a non-empty match or pattern")
        if self.pattern:
            self._regex = re.compile(self.pattern, re.DOTALL)
        if isinstance(self.response, (dict, list)):
            self.response = json.dumps(self.response)

    def apply(self, prompt: Prompt) -> str | None:
        if self.template and self.template != prompt.template:
            return None
        text = prompt.text
        if self.match and self.match not in text:
            return None
        if self._regex is not None:
            m = self._regex.search(text)
            if m is None:
                return None
            return substitute(self.response, {k: v for k, v in m.groupdict().items() if v is not None})
        return self.response

    @classmethod
    def from_record(cls, rec: dict) -> "ScriptedRule":
        return cls(response=rec["response"], match=rec.get("match"), pattern=rec.get("pattern"),
                   template=rec.get("template"), limit=rec.get("limit"))


class ScriptedBackend:
    name = "scripted"

    def __init__(self, rules: Iterable[ScriptedRule] = ()):
        self.rules = list(rules)
        self._fired = [0] * len(self.rules)
        self._lock = threading.Lock()

    def add(self, response, match=None, pattern=None, template=None, limit=None) -> "ScriptedBackend":
        with self._lock:
            self.rules.append(ScriptedRule(response, match, pattern, template, limit))
            self._fired.append(0)
        return self

    def extend(self, rules: Iterable[ScriptedRule]) -> "ScriptedBackend":
        for r in rules:
            self.add(r.response, r.match, r.pattern, r.template, r.limit)
        return self

    def fresh(self) -> "ScriptedBackend":
        """Copy with all match counters reset."""
        return ScriptedBackend(ScriptedRule(r.response, r.match, r.pattern, r.template, r.limit)
                               for r in self.rules)

    def complete(self, prompt: Prompt) -> Completion:
        with self._lock:
            for i, rule in enumerate(self.rules):
                if rule.limit is not None and self._fired[i] >= rule.limit:
                    continue
                reply = rule.apply(prompt)
                if reply is not None:
                    self._fired[i] += 1
                    return Completion(reply, count_tokens(prompt.text), count_tokens(reply), self.name, 0.0,
                                      {"rule": i})
        raise NoScriptedMatch(prompt.template)

    @classmethod
    def from_file(cls, path: "str | Path") -> "ScriptedBackend":
        return cls(load_rules(path))


def load_rules(path: "str | Path") -> list[ScriptedRule]:
    rules = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("//"):
            continue
        try:
            rules.append(ScriptedRule.from_record(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError, re.error) as exc:
            raise ValueError(f"{path}:{lineno}: bad scripted rule ({exc})") from None
    return rules
