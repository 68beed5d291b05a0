"""Switch parts of the agent off and see what changes.

Runs the broken-stove episode under the full agent and each ablation, then
prints score, steps, replans and the LLM calls each stage made.

    python demos/ablations.py
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from tkg_agent.environments import default_world
from tkg_agent.harness.config import RunConfig, build_config
from tkg_agent.harness.runner import make_gateway, run, train

SETTINGS = {
    "full": {},
    "no world model": {"no_wm": True},
    "no actor": {"no_actor": True},
    "no critic": {"no_critic": True},
}


def main() -> None:
    world = default_world()
    with tempfile.TemporaryDirectory() as tmp:
        base = RunConfig(graph=str(Path(tmp) / "{task}.jsonl"))
        train(["boil-water"], {"boil-water": world.variation_ids("boil-water", "train")}, base)
        print(f"{'setting':<16}{'score':>6}{'steps':>7}{'replans':>9}{'steps/replan':>14}"
              f"{'graph QA':>10}{'ground':>8}{'critic':>8}")
        for name, flags in SETTINGS.items():
            cfg = build_config(base.as_dict(), flags)
            lm = make_gateway(cfg)
            r = run("boil-water", 8, cfg, lm=lm)
            print(f"{name:<16}{r.score:>6}{r.steps:>7}{r.replans:>9}{r.steps_per_replan:>14.2f}"
                  f"{lm.calls['graph_answer']:>10}{lm.calls['ground']:>8}{lm.calls['critic']:>8}")


if __name__ == "__main__":
    main()
