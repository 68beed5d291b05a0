"""Plan execution: ground plan steps into commands, act, criticize, replan.

Each high-level step is grounded right before it runs so the actor sees the
live observation. After a step's commands execute, the critic compares the
predicted and actual outcome. A divergence records a reflection and triggers
a new plan for the rest of the task; the next plans see every reflection.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

from .environments import EnvError, Grammar, TextEnv
from .extraction import Transition
from .kg_store import TemporalGraph
from .llm import StructuredParseError, render
from .llm.core import Prompt
from .llm.structured import VERDICT_LEVELS
from .trace import Tracer
from .world_model import (
    BeliefState,
    PlannedStep,
    PlannedTrajectory,
    PlanningError,
    SafetyPredicate,
    estimate_state,
    plan,
)

if TYPE_CHECKING:
    from .llm import Gateway

logger = logging.getLogger(__name__)

MATCH, MINOR, DIVERGENCE = VERDICT_LEVELS
COMPLETED, STEP_LIMIT, PLANNING_ERROR = "completed", "step-limit", "planning-error"
TERMINATIONS = (COMPLETED, STEP_LIMIT, PLANNING_ERROR)
RECENT_COMMANDS = 5


class GroundingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExecutableAction:
    command: str
    step_index: int


@dataclass(frozen=True)
class Verdict:
    level: str
    rationale: str = ""

    def __post_init__(self):
        if self.level not in VERDICT_LEVELS:
            raise ValueError(f"unknown verdict level {self.level!r}")
        if self.level == DIVERGENCE and not self.rationale.strip():
            raise ValueError("a divergence verdict needs a rationale")


@dataclass(frozen=True)
class Reflection:
    observation: str
    expected: str
    verdict: Verdict
    step: int
    action: str = ""

    def __str__(self) -> str:
        return (f"After '{self.action}' (step {self.step}) you expected: {self.expected} "
                f"Actually observed: {self.observation} Critic: {self.verdict.rationale}")


@dataclass
class AgentConfig:
    L: int = 5
    k: int = 5
    max_steps: int = 100
    no_wm: bool = False
    no_actor: bool = False
    no_critic: bool = False
    window: int = 10
    hop_limit: int | None = None
    max_failed_replans: int = 3
    safety: tuple[SafetyPredicate, ...] = ()

    def __post_init__(self):
        if self.L < 1 or self.k < 1 or self.max_steps < 1:
            raise ValueError("L, k and max_steps must all be >= 1")


@dataclass
class EpisodeResult:
    score: float
    steps: int
    replans: int
    termination: str
    reflections: list[Reflection] = field(default_factory=list)
    trace: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.termination not in TERMINATIONS:
            raise ValueError(f"unknown termination {self.termination!r}")

    @property
    def steps_per_replan(self) -> float:
        return self.steps / max(1, self.replans)

    def summary(self) -> dict:
        return {"score": self.score, "steps": self.steps, "replans": self.replans,
                "steps_per_replan": self.steps_per_replan, "termination": self.termination,
                "reflections": len(self.reflections)}


def _normalize_command(cmd: str) -> str:
    return " ".join(cmd.strip().strip(".").lower().split())


def ground_step(
    step: PlannedStep,
    index: int,
    grammar: Grammar,
    lm: "Gateway",
    *,
    task: str = "",
    observation: str = "",
    recent: Sequence[str] = (),
) -> list[ExecutableAction]:
    """Commands for one plan step; invalid ones get one repair prompt, then are dropped."""
    prompt = render("ground", task=task, observation=observation or step.o_pre or "(unknown)",
                    recent=", ".join(recent[-RECENT_COMMANDS:]) or "(none)", grammar=grammar.describe(),
                    index=index + 1, action=step.action, expectation=step.o_post)
    try:
        raw = [_normalize_command(c) for c in lm.structured(prompt, "commands")]
    except StructuredParseError:
        raw = []
    invalid = [c for c in raw if not grammar.is_valid(c)]
    repaired: list[str] = []
    if invalid or not raw:
        fix = render("ground_repair", invalid=", ".join(invalid) or "(none)", grammar=grammar.describe(),
                     action=step.action)
        retry = Prompt("ground_repair", prompt.messages + fix.messages)
        try:
            candidates = [_normalize_command(c) for c in lm.structured(retry, "commands")]
        except StructuredParseError:
            candidates = []
        repaired = [c for c in candidates if grammar.is_valid(c)]
        still_bad = [c for c in candidates if not grammar.is_valid(c)]
        if still_bad or not repaired:
            logger.warning("dropping ungrammatical commands for %r: %s", step.action, invalid + still_bad)
    out: list[str] = []
    spliced = False
    for c in raw:
        if grammar.is_valid(c):
            out.append(c)
        elif not spliced:
            out.extend(repaired)
            spliced = True
    if not spliced:
        out.extend(repaired)
    if not out:
        raise GroundingError(f"no permissible command for plan step {index}: {step.action!r}")
    return [ExecutableAction(c, index) for c in out]


def ground_plan(
    trajectory: PlannedTrajectory,
    grammar: Grammar,
    lm: "Gateway",
    *,
    observation: str = "",
) -> list[ExecutableAction]:
    """Ground every step up front (the episode loop grounds lazily instead)."""
    out: list[ExecutableAction] = []
    for i, step in enumerate(trajectory.steps):
        out.extend(ground_step(step, i, grammar, lm, task=trajectory.task,
                               observation=observation if i == 0 else step.o_pre))
    return out


def execute_step(env: TextEnv, action: ExecutableAction, o_t: str = "") -> tuple[str, float, str, bool, float]:
    """Dispatch one command; returns (o_t, r_t, o_t+1, done, score)."""
    res = env.step(action.command)
    return o_t, res.reward, res.observation, res.done, res.score


def critique(
    predicted: tuple[str, float, str],
    actual: tuple[str, float, str],
    lm: "Gateway",
    *,
    action: str = "",
    command: str = "",
) -> Verdict:
    """Closed-set verdict on predicted vs actual; unreadable replies count as divergence."""
    (p0, pr, p1), (a0, ar, a1) = predicted, actual
    prompt = render("critic", action=action, command=command, pred_before=p0, pred_reward=pr, pred_after=p1,
                    act_before=a0, act_reward=ar, act_after=a1)
    try:
        level, rationale = lm.structured(prompt, "verdict")
    except StructuredParseError:
        return Verdict(DIVERGENCE, "unparseable critic output")
    if level == DIVERGENCE and not rationale.strip():
        rationale = "outcome diverged from the prediction"
    return Verdict(level, rationale)


@dataclass
class _Segment:
    """Outcome of executing one plan."""

    progressed: bool = False
    replan: str | None = None
    termination: str | None = None


class _Episode:
    def __init__(self, task, env, graph, config, lm, observation, tracer):
        self.task = task
        self.env = env
        self.graph = None if config.no_wm else graph
        self.cfg = config
        self.lm = lm
        self.tracer = tracer
        self.obs = observation
        self.grammar = env.action_grammar()
        self.hint = "" if not config.no_actor else "Use only permissible commands:\n" + self.grammar.describe()
        self.reflections: list[Reflection] = []
        self.history: list[Transition] = []
        self.recent: list[str] = []
        self.steps = 0
        self.replans = 0
        self.score = env.score

    def run(self) -> EpisodeResult:
        belief = estimate_state([], self.lm, task=self.task, observation=self.obs, window=self.cfg.window)
        termination = COMPLETED if self.env.done else None
        failures = 0
        while termination is None:
            if self.steps >= self.cfg.max_steps:
                termination = STEP_LIMIT
                break
            try:
                traj = plan(self.task, belief, self.lm, graph=self.graph, L=self.cfg.L, k=self.cfg.k,
                            reflections=self.reflections, safety=self.cfg.safety, tracer=self.tracer,
                            window=self.cfg.window, grammar_hint=self.hint, hop_limit=self.cfg.hop_limit)
            except PlanningError as exc:
                self.tracer.emit("plan", status="error", error=str(exc))
                termination = PLANNING_ERROR
                break
            self.tracer.emit("plan", status="ok", plan_id=traj.plan_id, actions=[s.action for s in traj.steps],
                             reflections=len(self.reflections))
            seg = self._execute(traj)
            if seg.termination:
                termination = seg.termination
                break
            failures = 0 if seg.progressed else failures + 1
            if failures > self.cfg.max_failed_replans:
                self.tracer.emit("plan", status="error", error=f"{failures} consecutive segments without progress")
                termination = PLANNING_ERROR
                break
            belief = estimate_state(self.history, self.lm, task=self.task, previous=belief,
                                    window=self.cfg.window, observation=self.obs)
        result = EpisodeResult(self.score, self.steps, self.replans, termination, list(self.reflections))
        self.tracer.emit("end", **result.summary())
        result.trace = list(self.tracer.events)
        return result

    def _replan(self, reason: str, seg: _Segment) -> _Segment:
        self.replans += 1
        self.tracer.emit("replan", reason=reason, count=self.replans, at_step=self.steps)
        seg.replan = reason
        return seg

    def _diverged(self, step: PlannedStep, verdict: Verdict, seg: _Segment) -> _Segment:
        refl = Reflection(self.obs, step.o_post, verdict, self.steps, step.action)
        self.reflections.append(refl)
        self.tracer.emit("reflect", step=self.steps, action=step.action, text=str(refl),
                         count=len(self.reflections))
        return self._replan("divergence", seg)

    def _commands(self, i: int, step: PlannedStep) -> list[ExecutableAction] | None:
        if self.cfg.no_actor:
            cmd = _normalize_command(step.action)
            return [ExecutableAction(cmd, i)] if self.grammar.is_valid(cmd) else None
        acts = ground_step(step, i, self.grammar, self.lm, task=self.task, observation=self.obs,
                           recent=self.recent)
        self.tracer.emit("ground", index=i, action=step.action, commands=[a.command for a in acts])
        return acts

    def _execute(self, traj: PlannedTrajectory) -> _Segment:
        seg = _Segment()
        start_score = self.score
        for i, step in enumerate(traj.steps):
            try:
                actions = self._commands(i, step)
            except GroundingError as exc:
                self.tracer.emit("ground", index=i, action=step.action, commands=[], error=str(exc))
                return self._replan("grounding-error", seg)
            if actions is None:
                self.tracer.emit("dispatch", index=i, action=step.action, valid=False)
                if self.cfg.no_critic:
                    return self._replan("grounding-error", seg)
                verdict = Verdict(DIVERGENCE, f"'{step.action}' is not a permissible command")
                self.tracer.emit("verdict", index=i, level=verdict.level, rationale=verdict.rationale)
                return self._diverged(step, verdict, seg)
            before, reward = self.obs, 0.0
            done = False
            for act in actions:
                if self.steps >= self.cfg.max_steps:
                    seg.termination = STEP_LIMIT
                    break
                o_t = self.obs
                try:
                    _, r, o_next, done, score = execute_step(self.env, act, o_t)
                except EnvError as exc:
                    self.tracer.emit("step", t=self.steps + 1, command=act.command, error=str(exc))
                    seg.termination = PLANNING_ERROR
                    seg.progressed = self.score > start_score
                    return seg
                self.steps += 1
                reward += r
                self.score = score
                self.obs = o_next
                self.recent.append(act.command)
                self.history.append(Transition(o_t, act.command, o_next, self.steps, "run"))
                self.tracer.emit("step", t=self.steps, index=i, command=act.command, observation=o_next,
                                 reward=r, score=score, done=done)
                if done:
                    break
            seg.progressed = self.score > start_score
            if done or self.score >= 100:
                seg.termination = COMPLETED
                return seg
            if seg.termination:
                return seg
            if self.cfg.no_critic:
                continue
            verdict = critique((step.o_pre or before, step.reward, step.o_post), (before, reward, self.obs),
                               self.lm, action=step.action, command="; ".join(a.command for a in actions))
            self.tracer.emit("verdict", index=i, level=verdict.level, rationale=verdict.rationale)
            if verdict.level == DIVERGENCE:
                return self._diverged(step, verdict, seg)
        return seg


def run_episode(
    task: str,
    env: TextEnv,
    graph: TemporalGraph | None,
    config: AgentConfig,
    lm: "Gateway",
    *,
    observation: str,
    tracer: Tracer | None = None,
) -> EpisodeResult:
    """Run one episode on an environment that was just reset.

    Reflections live only for this episode.
    """
    return _Episode(task, env, graph, config, lm, observation, tracer or Tracer()).run()


__all__ = [
    "AgentConfig", "BeliefState", "EpisodeResult", "ExecutableAction", "GroundingError", "Reflection",
    "Verdict", "critique", "execute_step", "ground_plan", "ground_step", "run_episode",
]
