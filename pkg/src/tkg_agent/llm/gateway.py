from __future__ import annotations

import json
import logging
import threading
from collections import Counter
from pathlib import Path
from typing import Any, Protocol

from .core import Completion, Message, Prompt, render
from .structured import SHAPE_HINTS, StructuredParseError, parse_structured

logger = logging.getLogger(__name__)

# Which pipeline stage each prompt template belongs to, for per-stage backend routing.
STAGES = {
    "summarize": "kg",
    "summarize_document": "kg",
    "coref": "kg",
    "extract": "kg",
    "select_types": "qa",
    "select_seeds": "qa",
    "graph_answer": "qa",
    "monologue": "qa",
}
DEFAULT_STAGE = "reasoning"


class Backend(Protocol):
    name: str

    def complete(self, prompt: Prompt) -> Completion: ...


class Gateway:
    """Routes prompts to backends and keeps per-template call accounting.

    ``log`` holds one record per completed call (the audit log); when
    ``audit_path`` is set the same records are appended there as JSON lines.
    """

    def __init__(
        self,
        backend: Backend,
        routes: dict[str, Backend] | None = None,
        audit_path: "str | Path | None" = None,
        max_in_flight: int = 4,
    ):
        self.default = backend
        self.routes = dict(routes or {})
        self.calls: Counter[str] = Counter()
        self.repairs = 0
        self.log: list[dict] = []
        self.audit_path = Path(audit_path) if audit_path else None
        self._sem = threading.BoundedSemaphore(max_in_flight)
        self._lock = threading.Lock()

    def backend_for(self, template: str) -> Backend:
        return self.routes.get(STAGES.get(template, DEFAULT_STAGE), self.default)

    def complete(self, prompt: Prompt) -> Completion:
        backend = self.backend_for(prompt.template)
        with self._sem:
            completion = backend.complete(prompt)
        record = {
            "template": prompt.template,
            "backend": completion.backend,
            "messages": prompt.as_payload(),
            "response": completion.text,
            "usage": {"prompt": completion.prompt_tokens, "completion": completion.completion_tokens},
        }
        with self._lock:
            self.calls[prompt.template] += 1
            self.log.append(record)
            if self.audit_path is not None:
                self.audit_path.parent.mkdir(parents=True, exist_ok=True)
                with self.audit_path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
        return completion

    def ask(self, template: str, **values) -> str:
        return self.complete(render(template, **values)).text

    def structured(self, prompt: Prompt, shape: str) -> Any:
        """Complete and parse; one repair round-trip before giving up."""
        text = self.complete(prompt).text
        try:
            return parse_structured(text, shape)
        except StructuredParseError as exc:
            logger.info("repairing unparseable %s reply for %s", shape, prompt.template)
            with self._lock:
                self.repairs += 1
            repair = render("repair", error=str(exc), raw=text, shape=shape, hint=SHAPE_HINTS[shape],
                            original=prompt.template)
            retry = Prompt("repair", prompt.messages + [Message("assistant", text)] + repair.messages,
                           temperature=prompt.temperature, max_tokens=prompt.max_tokens)
            text2 = self.complete(retry).text
            try:
                return parse_structured(text2, shape)
            except StructuredParseError as exc2:
                raise StructuredParseError(str(exc2), raw=text2, shape=shape) from None

    def prompts_for(self, template: str) -> list[str]:
        """Rendered prompt texts sent for ``template``, oldest first."""
        return ["\n".join(m["content"] for m in r["messages"]) for r in self.log if r["template"] == template]
