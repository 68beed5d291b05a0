"""Deterministic replay of recorded episodes.

A transcript is JSONL: one ``header`` record followed by one ``step`` record
per command. ``RecordingEnv`` writes transcripts that ``ReplayEnv`` reads.
"""

from __future__ import annotations

import json
from pathlib import Path

from .base import Grammar, ReplayDivergence, StepAfterDone, StepResult, TextEnv, UnknownVariation


class RecordingEnv(TextEnv):
    def __init__(self, inner: TextEnv, task: str = ""):
        self.inner = inner
        self.task = task
        self.records: list[dict] = []

    @property
    def done(self):
        return self.inner.done

    @property
    def score(self):
        return self.inner.score

    def reset(self, variation: int) -> tuple[str, str]:
        obs, task_text = self.inner.reset(variation)
        self.records = [{"kind": "header", "task": self.task, "variation": variation, "obs": obs,
                         "task_text": task_text, "score": self.inner.score,
                         "grammar": self.inner.action_grammar().templates}]
        return obs, task_text

    def step(self, command: str) -> StepResult:
        res = self.inner.step(command)
        self.records.append({"kind": "step", "cmd": command, "obs": res.observation, "reward": res.reward,
                             "done": res.done, "score": res.score})
        return res

    def action_grammar(self) -> Grammar:
        return self.inner.action_grammar()

    def golden_trajectory(self, variation: int) -> list[str]:
        return self.inner.golden_trajectory(variation)

    def save(self, path: "str | Path") -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

    def close(self) -> None:
        self.inner.close()


class ReplayEnv(TextEnv):
    """Serves recorded responses while the incoming commands match the recording."""

    def __init__(self, records: list[dict]):
        if not records or records[0].get("kind") != "header":
            raise ValueError("transcript must start with a header record")
        self.header = records[0]
        self.steps = [r for r in records[1:] if r.get("kind") == "step"]
        self._grammar = Grammar(self.header.get("grammar") or [])
        self.done = True
        self.score = self.header.get("score", 0)
        self.index = 0

    @classmethod
    def load(cls, path: "str | Path") -> "ReplayEnv":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls([json.loads(line) for line in lines if line.strip()])

    def reset(self, variation: int) -> tuple[str, str]:
        recorded = self.header.get("variation")
        if recorded is not None and variation != recorded:
            raise UnknownVariation(f"transcript records variation {recorded}, not {variation}")
        self.index = 0
        self.score = self.header.get("score", 0)
        self.done = not self.steps
        return self.header["obs"], self.header.get("task_text", "")

    def step(self, command: str) -> StepResult:
        if self.done:
            raise StepAfterDone("replayed episode is over")
        if self.index >= len(self.steps):
            raise ReplayDivergence(self.index, None, command)
        rec = self.steps[self.index]
        if rec["cmd"] != command:
            raise ReplayDivergence(self.index, rec["cmd"], command)
        self.index += 1
        self.score = rec["score"]
        self.done = bool(rec["done"])
        return StepResult(rec["obs"], rec["reward"], self.done, self.score)

    def action_grammar(self) -> Grammar:
        return self._grammar

    def golden_trajectory(self, variation: int) -> list[str]:
        return [r["cmd"] for r in self.steps]
