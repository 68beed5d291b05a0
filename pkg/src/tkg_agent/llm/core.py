from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources

_PLACEHOLDER = re.compile(r"\{(\w+)\}")


class LLMError(Exception):
    """Base class for backend failures."""


class BackendTimeout(LLMError):
    pass


class RateLimitExhausted(LLMError):
    pass


class AuthFailure(LLMError):
    pass


class BackendFailure(LLMError):
    """Non-retryable or exhausted transport/server failure."""


class NoScriptedMatch(LLMError):
    def __init__(self, template: str):
        super().__init__(f"no scripted rule matches prompt for template {template!r}")
        self.template = template


@dataclass(frozen=True)
class Message:
    role: str
    content: str


@dataclass
class Prompt:
    template: str
    messages: list[Message]
    temperature: float = 0.0
    max_tokens: int = 512

    def __post_init__(self):
        if not self.messages:
            raise ValueError("prompt needs at least one message")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        for m in self.messages:
            if m.role not in ("system", "user", "assistant"):
                raise ValueError(f"bad message role {m.role!r}")

    @property
    def text(self) -> str:
        """Flat rendering used for scripted matching and audits."""
        return "\n".join(m.content for m in self.messages)

    def as_payload(self) -> list[dict]:
        return [{"role": m.role, "content": m.content} for m in self.messages]


@dataclass
class Completion:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    backend: str = ""
    latency_ms: float = 0.0
    meta: dict = field(default_factory=dict)


def substitute(text: str, values: dict) -> str:
    """Replace ``{name}`` for every name present in ``values``; leave other braces alone."""

    def repl(m: re.Match) -> str:
        key = m.group(1)
        if key in values and values[key] is not None:
            return str(values[key])
        return m.group(0)

    return _PLACEHOLDER.sub(repl, text)


def load_template(name: str) -> list[tuple[str, str]]:
    """Read ``prompts/<name>.txt`` as (role, body) sections split on ``### role`` lines."""
    raw = resources.files("tkg_agent.prompts").joinpath(f"{name}.txt").read_text(encoding="utf-8")
    sections: list[tuple[str, list[str]]] = []
    for line in raw.splitlines():
        header = re.fullmatch(r"###\s*(system|user|assistant)\s*", line)
        if header:
            sections.append((header.group(1), []))
        elif sections:
            sections[-1][1].append(line)
        elif line.strip():
            sections.append(("user", [line]))
    return [(role, "\n".join(body).strip("\n")) for role, body in sections]


def render(name: str, temperature: float = 0.0, max_tokens: int = 512, **values) -> Prompt:
    messages = [Message(role, substitute(body, values)) for role, body in load_template(name)]
    return Prompt(name, messages, temperature=temperature, max_tokens=max_tokens)


def count_tokens(text: str) -> int:
    return len(text.split())
