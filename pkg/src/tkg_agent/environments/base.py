from __future__ import annotations

import re
from abc import ABC, abstractmethod
from dataclasses import dataclass


class EnvError(Exception):
    """Environment failure that ends the episode."""


class StepAfterDone(EnvError):
    pass


class UnknownVariation(EnvError):
    pass


class EnvConnectError(EnvError):
    pass


class EnvTimeout(EnvError):
    pass


class ProtocolViolation(EnvError):
    def __init__(self, line: str, reason: str = "malformed response"):
        super().__init__(f"{reason}: {line!r}")
        self.line = line


class ReplayDivergence(EnvError):
    def __init__(self, index: int, expected: str | None, got: str):
        super().__init__(f"replay diverged at step {index}: recorded {expected!r}, got {got!r}")
        self.index = index
        self.expected = expected
        self.got = got


@dataclass(frozen=True)
class StepResult:
    observation: str
    reward: float
    done: bool
    score: float


SLOT_STOPWORDS = frozenset({"the", "a", "an", "to", "some"})
_SLOT = re.compile(r"\{(\w+)\}")


class Grammar:
    """Command templates such as ``"pour {object} into {object}"``.

    A command is grammatical when it matches a template with every slot
    filled by lowercase words that are not articles.
    """

    def __init__(self, templates: list[str]):
        self.templates = list(templates)
        self._compiled = [(t, self._compile(t)) for t in self.templates]

    @staticmethod
    def _compile(template: str) -> re.Pattern:
        parts = []
        pos = 0
        for i, m in enumerate(_SLOT.finditer(template)):
            parts.append(re.escape(template[pos:m.start()]))
            parts.append(rf"(?P<s{i}>[a-z0-9][a-z0-9' -]*?)")
            pos = m.end()
        parts.append(re.escape(template[pos:]))
        return re.compile("^" + "".join(parts) + "$")

    def parse(self, command: str) -> tuple[str, tuple[str, ...]] | None:
        cmd = " ".join(command.split())
        for template, rx in self._compiled:
            m = rx.match(cmd)
            if not m:
                continue
            args = tuple(m.groupdict()[k] for k in sorted(m.groupdict(), key=lambda s: int(s[1:])))
            if any(tok in SLOT_STOPWORDS for a in args for tok in a.split()):
                continue
            return template, args
        return None

    def is_valid(self, command: str) -> bool:
        return self.parse(command) is not None

    def describe(self) -> str:
        return "\n".join(f"- {t}" for t in self.templates)


class TextEnv(ABC):
    """Contract every environment implements.

    ``done`` and ``score`` reflect the current episode after ``reset``.
    """

    done: bool = False
    score: float = 0.0

    @abstractmethod
    def reset(self, variation: int) -> tuple[str, str]:
        """Start an episode; returns (initial observation, task text)."""

    @abstractmethod
    def step(self, command: str) -> StepResult: ...

    @abstractmethod
    def action_grammar(self) -> Grammar: ...

    @abstractmethod
    def golden_trajectory(self, variation: int) -> list[str]: ...

    def close(self) -> None:
        pass
