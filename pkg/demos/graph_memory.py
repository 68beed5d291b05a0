"""Peek inside the temporal knowledge graph the agent remembers with.

Plays the golden trajectory of one task, prints the timestamped facts it
leaves behind, then asks the graph a few questions through the graph QA pipeline.

    python demos/graph_memory.py
"""

from __future__ import annotations

from tkg_agent.environments import MicroLab, default_world
from tkg_agent.extraction import Transition, ingest_transition
from tkg_agent.harness.config import RunConfig
from tkg_agent.harness.runner import make_gateway, pipeline_config
from tkg_agent.kg_store import TemporalGraph
from tkg_agent.retrieval_qa import graph_qa

# The packaged scripted backend answers with the newest fact mentioning the
# question's last word, so phrase questions to end on the entity of interest.
QUESTIONS = [
    "What is inside the cupboard?",
    "Which room connects to the hallway?",
    "Is anything burning on the stove?",
]


def main() -> None:
    cfg = RunConfig()
    lm = make_gateway(cfg)
    graph = TemporalGraph()
    env = MicroLab(default_world(), "use-thermometer")
    obs, task = env.reset(1)
    print(task)
    for t, cmd in enumerate(env.golden_trajectory(1), start=1):
        res = env.step(cmd)
        added = ingest_transition(Transition(obs, cmd, res.observation, t, "use-thermometer/1"),
                                  graph, pipeline_config(cfg), lm)
        print(f"t={t:<2} {cmd:<30} +{added} facts")
        obs = res.observation

    print(f"\n{len(graph.entities)} entities, {len(graph)} facts:")
    for fact in graph.facts:
        print("  " + graph.render_fact(fact))

    print()
    for q in QUESTIONS:
        answer = graph_qa(q, graph, lm)
        print(f"Q: {q}\nA: {answer.text}  [{answer.confidence}, {len(answer.supporting)} supporting facts]")


if __name__ == "__main__":
    main()
