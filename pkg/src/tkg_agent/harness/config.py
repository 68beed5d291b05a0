"""Run configuration: built-in defaults, overridden by a TOML file, overridden by CLI flags."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import tomli

from ..actor_critic import AgentConfig

BACKEND_STAGES = ("kg", "qa", "reasoning")
DEFAULT_BACKEND = "scripted:agent"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    L: int = 5
    k: int = 5
    max_steps: int = 100
    backend: str = DEFAULT_BACKEND
    routes: dict[str, str] = field(default_factory=dict)
    no_wm: bool = False
    no_actor: bool = False
    no_critic: bool = False
    graph: str = "graphs/{task}.jsonl"
    env: str = "microlab"
    world: str | None = None
    trace: str | None = None
    trace_llm: bool = False
    workers: int = 0
    window: int = 10
    hop_limit: int | None = None
    summarize: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("L", "k", "max_steps", "window"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {value!r}")
        if self.workers < 0:
            raise ConfigError("workers must be >= 0 (0 means one per core)")
        if not any(self.env.startswith(p) for p in ("microlab", "replay:", "remote:")):
            raise ConfigError(f"env must be microlab, replay:<path> or remote:<addr>, got {self.env!r}")
        unknown = set(self.routes) - set(BACKEND_STAGES)
        if unknown:
            raise ConfigError(f"unknown routing stages {sorted(unknown)}; expected {BACKEND_STAGES}")
        for spec in [self.backend, *self.routes.values()]:
            if not spec.startswith(("scripted:", "remote:")):
                raise ConfigError(f"backend must be scripted:<rules> or remote:<url>, got {spec!r}")

    @property
    def worker_count(self) -> int:
        return self.workers or os.cpu_count() or 1

    def agent(self) -> AgentConfig:
        return AgentConfig(L=self.L, k=self.k, max_steps=self.max_steps, no_wm=self.no_wm,
                           no_actor=self.no_actor, no_critic=self.no_critic, window=self.window,
                           hop_limit=self.hop_limit)

    def graph_path(self, task: str) -> Path:
        return Path(self.graph.replace("{task}", task))

    def as_dict(self) -> dict:
        return asdict(self)


FIELD_NAMES = {f.name for f in fields(RunConfig)}
# friendlier spellings accepted in config files
ALIASES = {"plan_len": "L", "plan_length": "L", "qa_turns": "k", "max_qa_turns": "k"}


def read_config_file(path: "str | Path") -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out: dict[str, Any] = {}
    ablations = data.pop("ablations", {})
    for key, value in {**data, **ablations}.items():
        key = ALIASES.get(key, key)
        if key not in FIELD_NAMES:
            raise ConfigError(f"{path}: unknown key {key!r}")
        out[key] = value
    return out


def build_config(file_values: dict[str, Any] | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Merge defaults < file < overrides; ``None`` overrides are ignored."""
    merged: dict[str, Any] = dict(file_values or {})
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("no_wm", "no_actor", "no_critic", "trace_llm") and value is False:
            continue  # an absent CLI switch must not clear a file setting
        merged[key] = value
    try:
        return RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
