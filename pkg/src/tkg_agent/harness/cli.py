"""``agent`` command line: train, run, eval, qa and graph."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..environments import EnvError, WorldDefError
from ..kg_store import GraphError, TemporalGraph
from ..llm import LLMError
from ..retrieval_qa import graph_qa
from . import runner
from .config import DEFAULT_BACKEND, ConfigError, build_config, read_config_file

EXIT_OK, EXIT_CONFIG, EXIT_ENV, EXIT_BACKEND = 0, 2, 3, 4


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--task", action="append", help="task id (repeatable; default: every task)")
    p.add_argument("--variation", action="append", type=int, help="variation id (repeatable)")
    p.add_argument("--split", choices=["train", "test", "all"], help="variation split when --variation is absent")
    p.add_argument("--graph", help="graph path; {task} expands to the task id")
    p.add_argument("--env", help="microlab | replay:<path> | remote:<host:port>")
    p.add_argument("--world", help="MicroLab world definition (JSON)")
    p.add_argument("--no-wm", action="store_true", dest="no_wm", help="plan without the knowledge graph")
    p.add_argument("--no-actor", action="store_true", dest="no_actor", help="dispatch plan actions directly")
    p.add_argument("--no-critic", action="store_true", dest="no_critic", help="never critique or reflect")
    p.add_argument("--max-steps", type=int, dest="max_steps")
    p.add_argument("--plan-len", type=int, dest="L")
    p.add_argument("--qa-turns", type=int, dest="k")
    p.add_argument("--workers", type=int)
    p.add_argument("--trace", help="trace path; {task} and {variation} expand")
    p.add_argument("--trace-llm", action="store_true", dest="trace_llm", help="also write the LLM audit log")
    p.add_argument("--scripted", help="scripted rule file (or packaged scenario name) for every stage")
    p.add_argument("--backend", help="scripted:<rules> | remote:<url>#<model>")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agent", description="Knowledge-graph world-model agent")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [("train", "build memory graphs from golden trajectories"),
                       ("run", "run one episode"),
                       ("eval", "evaluate over task variations")]:
        _common(sub.add_parser(name, help=text))
    qa = sub.add_parser("qa", help="score graph QA on a document corpus")
    _common(qa)
    qa.add_argument("--corpus", help="text file, chunks separated by blank lines")
    qa.add_argument("--questions", help="JSONL with question and answer fields")
    qa.add_argument("--report", help="write the JSON report here")
    g = sub.add_parser("graph", help="inspect a graph file")
    g.add_argument("path")
    g.add_argument("--query", help="answer a question from the graph")
    g.add_argument("--facts", action="store_true", help="print every fact")
    g.add_argument("--config")
    g.add_argument("--backend")
    g.add_argument("--scripted")
    g.add_argument("-v", "--verbose", action="count", default=0)
    eval_p = sub.choices["eval"]
    eval_p.add_argument("--report", help="write the JSON report here")
    return parser


def _config(args: argparse.Namespace):
    file_values = read_config_file(args.config) if getattr(args, "config", None) else {}
    backend = getattr(args, "backend", None)
    if getattr(args, "scripted", None):
        backend = f"scripted:{args.scripted}"
    names = ["graph", "env", "world", "no_wm", "no_actor", "no_critic", "max_steps", "L", "k", "workers",
             "trace", "trace_llm"]
    overrides = {n: getattr(args, n, None) for n in names}
    overrides["backend"] = backend
    return build_config(file_values, overrides)


def _tasks(args, cfg) -> list[str]:
    if getattr(args, "task", None):
        return list(args.task)
    if cfg.env != "microlab":
        raise ConfigError("--task is required with a non-MicroLab environment")
    return list(runner.load_world(cfg).tasks)


def _variations(args, cfg, tasks, default_split: str) -> dict[str, list[int]]:
    if args.variation:
        return {t: list(args.variation) for t in tasks}
    if cfg.env != "microlab":
        return {t: [0] for t in tasks}
    split = args.split or default_split
    world = runner.load_world(cfg)
    return {t: world.variation_ids(t, None if split == "all" else split) for t in tasks}


def _cmd_train(args, cfg) -> int:
    tasks = _tasks(args, cfg)
    report = runner.train(tasks, _variations(args, cfg, tasks, "train"), cfg)
    if args.json:
        print(json.dumps({"graphs": report.graphs, "facts_per_episode": report.facts_per_episode},
                         sort_keys=True, indent=2))
    else:
        for ep, n in report.facts_per_episode.items():
            print(f"{ep:<32} {n:>5} new facts")
        for task, path in report.graphs.items():
            print(f"graph for {task}: {path}")
    return EXIT_OK


def _cmd_run(args, cfg) -> int:
    tasks = _tasks(args, cfg)
    variations = args.variation or [0]
    if len(tasks) != 1 or len(variations) != 1:
        raise ConfigError("run takes exactly one --task and at most one --variation")
    result = runner.run(tasks[0], variations[0], cfg)
    summary = result.summary()
    if args.json:
        print(json.dumps(summary, sort_keys=True, indent=2))
    else:
        for k, v in summary.items():
            print(f"{k:<18} {v}")
        for i, r in enumerate(result.reflections, 1):
            print(f"reflection {i}: {r}")
    return EXIT_OK


def _cmd_eval(args, cfg) -> int:
    tasks = _tasks(args, cfg)
    report = runner.evaluate(tasks, _variations(args, cfg, tasks, "test"), cfg)
    if args.report:
        Path(args.report).write_text(report.to_json(), encoding="utf-8")
    print(report.to_json() if args.json else report.to_table(), end="\n" if not args.json else "")
    return EXIT_OK


def _cmd_qa(args, cfg) -> int:
    if cfg.backend == DEFAULT_BACKEND:
        cfg.backend = "scripted:qa"
    corpus = args.corpus or runner.scenario_path("qa_corpus.txt")
    questions = args.questions or runner.scenario_path("qa_questions.jsonl")
    report = runner.qa_eval(runner.load_corpus(corpus), runner.load_questions(questions), cfg)
    if args.report:
        Path(args.report).write_text(report.to_json(), encoding="utf-8")
    if args.json:
        print(report.to_json(), end="")
    else:
        for item in report.items:
            print(f"EM={item.em} F1={item.f1:.4f}  {item.question}  -> {item.prediction!r} (gold {item.gold!r})")
        print(f"corpus EM={report.em:.4f} F1={report.f1:.4f}")
    return EXIT_OK


def _cmd_graph(args) -> int:
    try:
        graph = TemporalGraph.load(args.path)
    except FileNotFoundError:
        raise ConfigError(f"graph file not found: {args.path}") from None
    graph.check_integrity()
    print(f"{len(graph.entities)} entities, {len(graph)} facts")
    if args.facts:
        for fact in graph.facts:
            print(graph.render_fact(fact))
    if args.query:
        file_values = read_config_file(args.config) if args.config else {}
        backend = f"scripted:{args.scripted}" if args.scripted else args.backend
        cfg = build_config(file_values, {"backend": backend})
        answer = graph_qa(args.query, graph, runner.make_gateway(cfg))
        print(f"answer: {answer.text} ({answer.confidence}, {len(answer.supporting)} facts)")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "graph":
            return _cmd_graph(args)
        cfg = _config(args)
        return {"train": _cmd_train, "run": _cmd_run, "eval": _cmd_eval, "qa": _cmd_qa}[args.command](args, cfg)
    except (ConfigError, GraphError, WorldDefError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EnvError as exc:
        print(f"environment error: {exc}", file=sys.stderr)
        return EXIT_ENV
    except LLMError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
