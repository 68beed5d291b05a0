from __future__ import annotations

import random

import pytest

from tkg_agent.environments import default_world
from tkg_agent.harness.config import RunConfig
from tkg_agent.harness.runner import make_gateway, train
from tkg_agent.kg_store import EntityType, TemporalGraph
from tkg_agent.llm import Gateway, ScriptedBackend

TYPES = list(EntityType)


def scripted(*rules) -> Gateway:
    """Gateway over a ScriptedBackend built from (response, kwargs) pairs.

    A rule with only a ``template`` matches every prompt of that template.
    """
    backend = ScriptedBackend()
    for response, kwargs in rules:
        if not (kwargs.get("match") or kwargs.get("pattern")):
            kwargs = {**kwargs, "pattern": r"\A"}
        backend.add(response, **kwargs)
    return Gateway(backend)


def random_graph(rng: random.Random, n_entities: int, n_facts: int, t_max: int = 20) -> TemporalGraph:
    g = TemporalGraph()
    for i in range(n_entities):
        g.upsert_entity(f"e{i}", rng.choice(TYPES))
    preds = ["is in", "contains", "near", "is"]
    for _ in range(n_facts):
        s, o = rng.randrange(n_entities), rng.randrange(n_entities)
        p = rng.choice(preds)
        if s == o:
            p = "is"
        g.insert_fact(s, p, o, rng.randrange(t_max), f"ep{rng.randrange(3)}")
    return g


@pytest.fixture(scope="session")
def world():
    return default_world()


@pytest.fixture(scope="session")
def trained(tmp_path_factory):
    """Graphs for every task built from the train split, plus the config that points at them."""
    root = tmp_path_factory.mktemp("graphs")
    cfg = RunConfig(graph=str(root / "{task}.jsonl"), workers=2)
    w = default_world()
    tasks = list(w.tasks)
    train(tasks, {t: w.variation_ids(t, "train") for t in tasks}, cfg)
    return cfg


@pytest.fixture
def agent_lm(trained) -> Gateway:
    return make_gateway(trained)


# -- acceptance summary -------------------------------------------------------------

_ACCEPTANCE: dict[int, str] = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rpartition("::")[2]
    if "test_acceptance.py" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    n = int(name.split("_")[2])
    if report.failed:
        _ACCEPTANCE[n] = "FAIL"
    elif report.when == "call" and n not in _ACCEPTANCE:
        _ACCEPTANCE[n] = "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    from test_acceptance import CRITERIA

    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        terminalreporter.write_line(f"{_ACCEPTANCE.get(n, 'NOT RUN')} criterion {n}: {CRITERIA[n]}")
