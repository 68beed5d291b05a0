"""Walk through one episode where the world does not behave as remembered.

The agent trains on five boil-water episodes where the stove works, then meets
a variation whose stove is broken. Watch the critic flag the surprise, the
reflection that gets written, and the plan that routes around it.

    python demos/broken_stove.py
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from tkg_agent.environments import default_world
from tkg_agent.harness.config import RunConfig
from tkg_agent.harness.runner import run, train


def main() -> None:
    world = default_world()
    with tempfile.TemporaryDirectory() as tmp:
        cfg = RunConfig(graph=str(Path(tmp) / "{task}.jsonl"))
        report = train(["boil-water"], {"boil-water": world.variation_ids("boil-water", "train")}, cfg)
        print(f"memory built from {len(report.facts_per_episode)} golden episodes, "
              f"{sum(report.facts_per_episode.values())} facts\n")

        result = run("boil-water", 8, cfg)
        for event in result.trace:
            kind = event["kind"]
            if kind == "plan" and event["status"] == "ok":
                print("PLAN   " + " -> ".join(event["actions"]))
            elif kind == "step" and "error" not in event:
                print(f"  act  {event['command']:<28} score {event['score']:>5}  | {event['observation']}")
            elif kind == "verdict" and event["level"] != "match":
                print(f"  critic says {event['level']}: {event['rationale']}")
            elif kind == "reflect":
                print(f"  reflection recorded: {event['text']}")
            elif kind == "replan":
                print(f"REPLAN ({event['reason']}) after {event['at_step']} steps")
        print(f"\nfinished with score {result.score} in {result.steps} steps, {result.replans} replan(s)")


if __name__ == "__main__":
    main()
