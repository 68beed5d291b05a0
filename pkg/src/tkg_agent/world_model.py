"""Belief tracking and retrieval-augmented planning.

``plan`` rolls the model forward ``L`` steps: estimate the belief, propose a
high-level action, predict the observation and reward that follow, append,
and check safety predicates. Policy, transition and reward prompts for one
planned step share a single monologue and its ``k``-query budget.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

from .extraction import Transition
from .kg_store import TemporalGraph
from .llm import QueryOrAnswer, StructuredParseError, clamp_reward, render
from .retrieval_qa import Monologue, MonologueEntry
from .trace import Tracer

if TYPE_CHECKING:
    from .llm import Gateway

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 10
NO_PREDICTION = "(no prediction)"


class PlanningError(RuntimeError):
    pass


@dataclass(frozen=True)
class BeliefState:
    summary: str
    salient: tuple[str, ...] = ()
    as_of: int = 0
    window: tuple[int, int] = (0, 0)
    latest: str = ""

    def __post_init__(self):
        lo, hi = self.window
        if not lo <= hi <= self.as_of:
            raise ValueError(f"belief window {self.window} inconsistent with as_of={self.as_of}")


@dataclass(frozen=True)
class PlannedStep:
    o_pre: str
    action: str
    o_post: str
    reward: float = 0.0
    rationale: str = ""

    def __post_init__(self):
        if not self.action.strip():
            raise ValueError("planned action is empty")
        if not 0.0 <= self.reward <= 100.0:
            raise ValueError(f"expected reward {self.reward} outside [0, 100]")


@dataclass
class PlannedTrajectory:
    steps: list[PlannedStep]
    task: str
    plan_id: str = "plan-0"
    monologues: list[list[MonologueEntry]] = field(default_factory=list)
    violations: list[dict] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    def text(self) -> str:
        return "\n".join(f"{s.action} => {s.o_post}" for s in self.steps)


@dataclass(frozen=True)
class SafetyPredicate:
    """Flags a trajectory whose text matches any forbidden word or regex."""

    name: str
    forbid: tuple[str, ...]

    def check(self, trajectory: PlannedTrajectory) -> str | None:
        text = trajectory.text()
        for pat in self.forbid:
            if re.search(rf"\b{pat}\b", text, re.IGNORECASE):
                return f"matched {pat!r}"
        return None


def _render_transitions(transitions: Sequence[Transition]) -> str:
    if not transitions:
        return "(none)"
    return "\n".join(f"[t={tr.t}] before: {tr.o_t} | action: {tr.a_t} | after: {tr.o_next}" for tr in transitions)


def estimate_state(
    history: Sequence[Transition],
    lm: "Gateway",
    *,
    task: str,
    previous: BeliefState | None = None,
    window: int = DEFAULT_WINDOW,
    observation: str | None = None,
) -> BeliefState:
    """Fold transitions newer than ``previous`` (at most ``window`` of them) into a new belief."""
    if window < 1:
        raise ValueError("window must be >= 1")
    as_of = previous.as_of if previous else 0
    fresh = [tr for tr in history if previous is None or tr.t > previous.as_of][-window:]
    if fresh:
        latest = fresh[-1].o_next
        as_of = max(as_of, fresh[-1].t)
        span = (fresh[0].t, fresh[-1].t)
    else:
        latest = observation or (previous.latest if previous else "")
        span = (as_of, as_of)
    summary = lm.ask(
        "belief",
        task=task,
        previous=previous.summary if previous else "(none)",
        transitions=_render_transitions(fresh),
        latest=latest or "(none)",
    ).strip()
    salient = tuple(s.strip() for s in re.split(r"(?<=[.!?])\s+", latest) if s.strip())
    return BeliefState(summary, salient, as_of, span, latest)


def _answer_field(reply: QueryOrAnswer, *names: str):
    if not isinstance(reply.answer, dict):
        return None
    for name in names:
        if name in reply.answer:
            return reply.answer[name]
    return None


def _render_reflections(reflections: Sequence) -> str:
    if not reflections:
        return "(none)"
    return "\n".join(f"{i + 1}. {r}" for i, r in enumerate(reflections))


def propose_action(
    belief: BeliefState,
    task: str,
    mono: Monologue,
    lm: "Gateway",
    reflections: Sequence = (),
    planned: Sequence[PlannedStep] = (),
    grammar_hint: str = "",
) -> str | None:
    """Next high-level action, or None when the policy declares the task done."""
    planned_text = "\n".join(f"{i + 1}. {s.action}" for i, s in enumerate(planned)) or "(none)"
    while True:
        prompt = render(
            "policy", task=task, belief=belief.summary, reflections=_render_reflections(reflections),
            planned=planned_text, previous_action=planned[-1].action if planned else "none",
            grammar_hint=grammar_hint, **mono.prompt_fields(),
        )
        try:
            reply = lm.structured(prompt, "query_or_answer")
        except StructuredParseError as exc:
            raise PlanningError(f"unparseable policy reply: {exc}") from None
        if reply.is_query:
            if mono.remaining > 0:
                mono.ask(reply.query, "policy")
                continue
            raise PlanningError("policy kept querying after its budget was spent")
        if _answer_field(reply, "done") is True:
            return None
        action = _answer_field(reply, "action")
        if not isinstance(action, str) or not action.strip():
            raise PlanningError(f"policy reply carries no action: {reply.answer!r}")
        return action.strip()


def predict_transition(
    belief: BeliefState,
    action: str,
    mono: Monologue,
    lm: "Gateway",
    task: str = "",
) -> tuple[str, float]:
    """Predicted observation and reward for ``action``.

    Both predictors may spend the monologue's remaining queries; once the
    budget is gone they are told to answer. A reward that cannot be read as a
    number becomes 0.
    """
    o_hat: str | None = None
    while o_hat is None:
        prompt = render("transition", task=task, belief=belief.summary, action=action, **mono.prompt_fields())
        try:
            reply = lm.structured(prompt, "query_or_answer")
        except StructuredParseError as exc:
            logger.warning("unparseable transition prediction; keeping raw text")
            o_hat = exc.raw.strip() or NO_PREDICTION
            break
        if reply.is_query and mono.remaining > 0:
            mono.ask(reply.query, "transition-model")
            continue
        value = _answer_field(reply, "observation", "answer")
        o_hat = str(value).strip() if value else NO_PREDICTION

    while True:
        prompt = render("reward", task=task, belief=belief.summary, action=action, observation=o_hat,
                        **mono.prompt_fields())
        try:
            reply = lm.structured(prompt, "query_or_answer")
        except StructuredParseError:
            logger.warning("unparseable reward prediction; using 0")
            return o_hat, 0.0
        if reply.is_query and mono.remaining > 0:
            mono.ask(reply.query, "reward-model")
            continue
        r_hat, ok = clamp_reward(_answer_field(reply, "reward", "answer"))
        if not ok:
            logger.warning("reward prediction %r is not a number; using 0", reply.answer)
        return o_hat, r_hat


def plan(
    task: str,
    belief: BeliefState,
    lm: "Gateway",
    *,
    graph: TemporalGraph | None,
    L: int = 5,
    k: int = 5,
    reflections: Sequence = (),
    safety: Sequence[SafetyPredicate] = (),
    abort_on_violation: bool = True,
    tracer: Tracer | None = None,
    window: int = DEFAULT_WINDOW,
    grammar_hint: str = "",
    hop_limit: int | None = None,
) -> PlannedTrajectory:
    if L < 1:
        raise ValueError("L must be >= 1")
    tracer = tracer or Tracer()
    plan_id = f"plan-{tracer.count('plan_start')}"
    tracer.emit("plan_start", plan_id=plan_id, reflections=len(reflections), as_of=belief.as_of)
    traj = PlannedTrajectory([], task, plan_id)
    current = belief
    o_pre = belief.latest
    for i in range(L):
        if i > 0:
            prev = traj.steps[-1]
            step_tr = Transition(prev.o_pre or NO_PREDICTION, prev.action, prev.o_post or NO_PREDICTION,
                                 t=current.as_of + 1, episode=plan_id)
            current = estimate_state([step_tr], lm, task=task, previous=current, window=window)
        mono = Monologue(graph, lm, k, hop_limit=hop_limit, tracer=tracer)
        try:
            action = propose_action(current, task, mono, lm, reflections, traj.steps, grammar_hint)
        except PlanningError as exc:
            if not traj.steps:
                raise
            logger.info("plan %s truncated at step %d: %s", plan_id, i, exc)
            break
        if action is None:
            break
        o_hat, r_hat = predict_transition(current, action, mono, lm, task)
        step = PlannedStep(o_pre, action, o_hat, r_hat)
        traj.steps.append(step)
        traj.monologues.append(list(mono.entries))
        tracer.emit("plan_step", plan_id=plan_id, i=i, action=action, o_hat=o_hat, r_hat=r_hat,
                    monologue_turns=len(mono))
        violated = False
        for pred in safety:
            reason = pred.check(traj)
            if reason is not None:
                tracer.emit("safety_alert", predicate=pred.name, step=i, plan_id=plan_id, reason=reason)
                traj.violations.append({"predicate": pred.name, "step": i, "reason": reason})
                violated = True
        if violated and abort_on_violation:
            traj.steps.pop()
            traj.monologues.pop()
            break
        o_pre = o_hat
    if not traj.steps:
        raise PlanningError(f"{plan_id} produced no steps")
    return traj
