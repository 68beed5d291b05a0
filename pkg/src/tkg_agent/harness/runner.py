"""Training, single runs, evaluation and QA scoring."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Sequence

from ..actor_critic import EpisodeResult, run_episode
from ..environments import EnvError, MicroLab, RemoteEnv, ReplayEnv, TextEnv, WorldDef, default_world
from ..extraction import PipelineConfig, RuleExtractor, RuleResolver, Transition, ingest_documents, ingest_transition
from ..kg_store import EntityType, TemporalGraph
from ..llm import Gateway, RemoteBackend, ScriptedBackend, load_rules
from ..retrieval_qa import UNKNOWN, graph_qa
from ..trace import Tracer, dumps
from .config import ConfigError, RunConfig
from .metrics import exact_match, f1_score, mean, sample_std

logger = logging.getLogger(__name__)


class FixtureError(EnvError):
    """A golden trajectory that does not finish its task."""


# -- construction helpers ---------------------------------------------------

def scenario_path(name: str) -> Path:
    return Path(str(resources.files("tkg_agent.scenarios").joinpath(name)))


@lru_cache(maxsize=32)
def _rules(source: str):
    path = Path(source)
    if not path.exists():
        packaged = scenario_path(f"{source}.jsonl")
        if not packaged.exists():
            raise ConfigError(f"scripted rules not found: {source}")
        path = packaged
    return tuple(load_rules(path))


def make_backend(spec: str):
    kind, _, rest = spec.partition(":")
    if kind == "scripted":
        return ScriptedBackend(_rules(rest))
    if kind == "remote":
        endpoint, _, model = rest.partition("#")
        return RemoteBackend(endpoint, model or "default")
    raise ConfigError(f"unknown backend spec {spec!r}")


def make_gateway(cfg: RunConfig, audit_path: "str | Path | None" = None) -> Gateway:
    """A gateway with fresh backends, so scripted rule counters start at zero."""
    routes = {stage: make_backend(spec) for stage, spec in cfg.routes.items()}
    return Gateway(make_backend(cfg.backend), routes=routes, audit_path=audit_path)


@lru_cache(maxsize=8)
def _world(path: str | None) -> WorldDef:
    return default_world() if path is None else WorldDef.load(path)


def load_world(cfg: RunConfig) -> WorldDef:
    try:
        return _world(cfg.world)
    except FileNotFoundError:
        raise ConfigError(f"world file not found: {cfg.world}") from None


def make_env(cfg: RunConfig, task: str) -> TextEnv:
    if cfg.env == "microlab":
        return MicroLab(load_world(cfg), task)
    kind, _, rest = cfg.env.partition(":")
    if kind == "replay":
        return ReplayEnv.load(rest)
    if kind == "remote":
        return RemoteEnv(rest, task=task)
    raise ConfigError(f"unknown env spec {cfg.env!r}")


def pipeline_config(cfg: RunConfig) -> PipelineConfig:
    lexicon = {name: EntityType.parse(tag) for name, tag in load_world(cfg).lexicon().items()}
    return PipelineConfig(summarize=cfg.summarize, extractor=RuleExtractor(lexicon))


def subject_of(cfg: RunConfig, task: str) -> str:
    try:
        return load_world(cfg).task(task).get("subject", "other")
    except ValueError:
        return "other"


# -- train --------------------------------------------------------------------

@dataclass
class TrainReport:
    graphs: dict[str, str]
    facts_per_episode: dict[str, int]


def train(tasks: Sequence[str], variations: dict[str, list[int]], cfg: RunConfig,
          lm: Gateway | None = None) -> TrainReport:
    """Run each golden trajectory and ingest every transition into the task's graph."""
    lm = lm if lm is not None else (make_gateway(cfg) if cfg.summarize else None)
    pipe = pipeline_config(cfg)
    graphs: dict[Path, TemporalGraph] = {}
    clocks: dict[Path, int] = {}
    per_episode: dict[str, int] = {}
    for task in tasks:
        path = cfg.graph_path(task)
        graph = graphs.setdefault(path, TemporalGraph())
        clocks.setdefault(path, 0)
        if not variations.get(task):
            logger.warning("no variations to train on for %s", task)
        for var in variations.get(task, []):
            env = make_env(cfg, task)
            try:
                obs, _ = env.reset(var)
                added = 0
                for cmd in env.golden_trajectory(var):
                    res = env.step(cmd)
                    clocks[path] += 1
                    tr = Transition(obs, cmd, res.observation, clocks[path], f"{task}/{var}")
                    added += ingest_transition(tr, graph, pipe, lm)
                    obs = res.observation
                if env.score != 100:
                    raise FixtureError(f"golden trajectory for {task}/{var} ends at score {env.score}")
            finally:
                env.close()
            per_episode[f"{task}/{var}"] = added
    out = {}
    for path, graph in graphs.items():
        graph.check_integrity()
        path.parent.mkdir(parents=True, exist_ok=True)
        graph.save(path)
    for task in tasks:
        out[task] = str(cfg.graph_path(task))
    return TrainReport(out, per_episode)


# -- run -----------------------------------------------------------------------

def load_graph(cfg: RunConfig, task: str) -> TemporalGraph | None:
    if cfg.no_wm:
        return None
    path = cfg.graph_path(task)
    if not path.exists():
        raise ConfigError(f"graph {path} not found; run `agent train` first or pass --no-wm")
    return TemporalGraph.load(path)


def _trace_path(cfg: RunConfig, task: str, variation: int) -> Path | None:
    if not cfg.trace:
        return None
    return Path(cfg.trace.replace("{task}", task).replace("{variation}", str(variation)))


def run(task: str, variation: int, cfg: RunConfig, *, graph: TemporalGraph | None = None,
        lm: Gateway | None = None, env: TextEnv | None = None) -> EpisodeResult:
    if graph is None and not cfg.no_wm:
        graph = load_graph(cfg, task)
    trace_path = _trace_path(cfg, task, variation)
    if trace_path is not None:
        trace_path.parent.mkdir(parents=True, exist_ok=True)
        header = {"kind": "header", "task": task, "variation": variation, "config": cfg.as_dict()}
        trace_path.write_text(dumps(header) + "\n", encoding="utf-8")
    if lm is None:
        audit = trace_path.with_suffix(".llm.jsonl") if (trace_path and cfg.trace_llm) else None
        if audit is not None and audit.exists():
            audit.unlink()
        lm = make_gateway(cfg, audit)
    env = env if env is not None else make_env(cfg, task)
    try:
        obs, task_text = env.reset(variation)
        tracer = Tracer(trace_path)
        return run_episode(task_text, env, graph, cfg.agent(), lm, observation=obs, tracer=tracer)
    finally:
        env.close()


def recompute_from_trace(events: Sequence[dict]) -> dict:
    """Episode metrics rebuilt from trace events alone."""
    steps = [e for e in events if e["kind"] == "step" and "error" not in e]
    replans = sum(1 for e in events if e["kind"] == "replan")
    score = steps[-1]["score"] if steps else 0
    return {"score": score, "steps": len(steps), "replans": replans,
            "steps_per_replan": len(steps) / max(1, replans)}


# -- eval ---------------------------------------------------------------------

@dataclass
class TaskRow:
    task: str
    subject: str
    variations: list[int]
    scores: list[float]
    mean: float
    std: float
    steps_per_replan: float
    replans: int
    steps: int


@dataclass
class EvalReport:
    rows: list[TaskRow]
    subjects: dict[str, float]
    overall: float
    episodes: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    def to_table(self) -> str:
        head = f"{'task':<24}{'subject':<16}{'n':>3}{'mean':>9}{'std':>9}{'steps/replan':>14}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(f"{r.task:<24}{r.subject:<16}{len(r.scores):>3}{r.mean:>9.2f}{r.std:>9.2f}"
                         f"{r.steps_per_replan:>14.2f}")
        lines.append("-" * len(head))
        for subject, value in sorted(self.subjects.items()):
            lines.append(f"{'subject: ' + subject:<40}{value:>12.2f}")
        lines.append(f"{'overall':<40}{self.overall:>12.2f}")
        return "\n".join(lines)


def _episode(task: str, variation: int, cfg: RunConfig, graph: TemporalGraph | None) -> dict:
    result = run(task, variation, cfg, graph=graph)
    return {"task": task, "variation": variation, **result.summary()}


def evaluate(tasks: Sequence[str], variations: dict[str, list[int]], cfg: RunConfig) -> EvalReport:
    pairs = [(t, v) for t in tasks for v in variations.get(t, [])]
    if not pairs:
        raise ConfigError("evaluation needs at least one (task, variation) pair")
    graphs = {t: load_graph(cfg, t) for t in tasks}
    with ThreadPoolExecutor(max_workers=min(cfg.worker_count, len(pairs))) as pool:
        futures = [pool.submit(_episode, t, v, cfg, graphs[t]) for t, v in pairs]
        episodes = [f.result() for f in futures]
    rows = []
    for task in tasks:
        eps = [e for e in episodes if e["task"] == task]
        if not eps:
            continue
        scores = [e["score"] for e in eps]
        rows.append(TaskRow(task, subject_of(cfg, task), [e["variation"] for e in eps], scores, mean(scores),
                            sample_std(scores), mean([e["steps_per_replan"] for e in eps]),
                            sum(e["replans"] for e in eps), sum(e["steps"] for e in eps)))
    by_subject: dict[str, list[float]] = {}
    for r in rows:
        by_subject.setdefault(r.subject, []).append(r.mean)
    subjects = {s: mean(v) for s, v in by_subject.items()}
    return EvalReport(rows, subjects, mean([r.mean for r in rows]), episodes)


# -- QA -----------------------------------------------------------------------

@dataclass
class QAItem:
    question: str
    gold: str
    prediction: str
    em: int
    f1: float
    grounded: bool


@dataclass
class QAReport:
    items: list[QAItem]
    em: float
    f1: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


def load_corpus(path: "str | Path") -> list[str]:
    """Chunks are separated by blank lines."""
    text = Path(path).read_text(encoding="utf-8")
    return [c.strip() for c in text.split("\n\n") if c.strip()]


def load_questions(path: "str | Path") -> list[dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [json.loads(line) for line in lines if line.strip()]


def qa_eval(chunks: Sequence[str], questions: Sequence[dict], cfg: RunConfig,
            lm: Gateway | None = None, pipeline: PipelineConfig | None = None) -> QAReport:
    lm = lm if lm is not None else make_gateway(cfg)
    pipe = pipeline or PipelineConfig(summarize=False, resolver=RuleResolver())
    graph = TemporalGraph()
    ingest_documents(chunks, graph, pipe, lm)
    items = []
    for q in questions:
        answer = graph_qa(q["question"], graph, lm, hop_limit=cfg.hop_limit)
        pred = "" if answer.confidence == UNKNOWN else answer.text
        items.append(QAItem(q["question"], q["answer"], pred, exact_match(pred, q["answer"]),
                            f1_score(pred, q["answer"]), answer.confidence != UNKNOWN))
    em = mean([i.em for i in items]) if items else 0.0
    f1 = mean([i.f1 for i in items]) if items else 0.0
    return QAReport(items, em, f1)
