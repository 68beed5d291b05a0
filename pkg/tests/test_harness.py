from __future__ import annotations

import json
import logging
import math

import pytest
from hypothesis import given, strategies as st

from tkg_agent.harness import cli
from tkg_agent.harness.config import ConfigError, RunConfig, build_config, read_config_file
from tkg_agent.harness.metrics import exact_match, f1_score, mean, normalize_answer, sample_std
from tkg_agent.harness.runner import (
    FixtureError,
    evaluate,
    load_corpus,
    load_questions,
    qa_eval,
    recompute_from_trace,
    run,
    scenario_path,
    train,
)
from tkg_agent.kg_store import TemporalGraph
from tkg_agent.trace import read_jsonl


def read_trace(path):
    return list(read_jsonl(path))


def hand_std(xs):
    m = sum(xs) / len(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / (len(xs) - 1))


# -- metrics --------------------------------------------------------------------

@pytest.mark.parametrize("pred, gold, em, f1", [
    ("the Kitchen.", "kitchen", 1, 1.0),
    ("in the kitchen sink", "kitchen", 0, 2 * (1 / 4 * 1) / (1 / 4 + 1)),
    ("", "kitchen", 0, 0.0),
    ("A red box", "red box", 1, 1.0),
    ("the blue and red paint", "red paint", 0, 2 * (2 / 4 * 1) / (2 / 4 + 1)),
])
def test_em_f1_fixtures(pred, gold, em, f1):
    assert exact_match(pred, gold) == em
    assert round(f1_score(pred, gold), 4) == round(f1, 4)


def test_normalize():
    assert normalize_answer("  The   Red, Box! ") == "red box"
    assert normalize_answer("in the kitchen") == "in the kitchen"


@given(st.text(max_size=30), st.text(max_size=30))
def test_metric_ranges(pred, gold):
    assert exact_match(pred, gold) in (0, 1)
    assert 0.0 <= f1_score(pred, gold) <= 1.0
    if exact_match(pred, gold):
        assert f1_score(pred, gold) == 1.0


def test_std_matches_hand_formula():
    xs = [100, 100, 25]
    assert mean(xs) == 75
    assert sample_std(xs) == pytest.approx(hand_std(xs), abs=1e-12)
    assert sample_std([40]) == 0.0
    with pytest.raises(ValueError):
        mean([])


# -- config -----------------------------------------------------------------------

def test_defaults():
    cfg = RunConfig()
    assert (cfg.L, cfg.k, cfg.max_steps) == (5, 5, 100)
    assert not (cfg.no_wm or cfg.no_actor or cfg.no_critic)


@pytest.mark.parametrize("kwargs", [{"L": 0}, {"k": 0}, {"max_steps": 0}, {"env": "gym"},
                                    {"backend": "openai"}, {"routes": {"vision": "scripted:qa"}},
                                    {"workers": -1}])
def test_invalid_config(kwargs):
    with pytest.raises(ConfigError):
        RunConfig(**kwargs)


def test_precedence(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('plan_len = 3\nmax_steps = 40\n[ablations]\nno_critic = true\n')
    file_values = read_config_file(path)
    assert file_values == {"L": 3, "max_steps": 40, "no_critic": True}
    cfg = build_config(file_values, {"max_steps": 60, "k": None, "no_critic": False})
    assert (cfg.L, cfg.max_steps, cfg.k, cfg.no_critic) == (3, 60, 5, True)


def test_unknown_key_and_bad_toml(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("colour = 'red'\n")
    with pytest.raises(ConfigError, match="colour"):
        read_config_file(bad)
    bad.write_text("L = \n")
    with pytest.raises(ConfigError):
        read_config_file(bad)
    with pytest.raises(ConfigError):
        read_config_file(tmp_path / "missing.toml")


def test_trace_header_echoes_config(trained, tmp_path):
    cfg = build_config(trained.as_dict(), {"trace": str(tmp_path / "{task}-{variation}.jsonl"), "L": 4})
    run("find-living-thing", 5, cfg)
    events = read_trace(tmp_path / "find-living-thing-5.jsonl")
    assert events[0]["kind"] == "header"
    assert events[0]["config"] == cfg.as_dict() and events[0]["config"]["L"] == 4


# -- train ------------------------------------------------------------------------

def test_train_writes_consistent_graph(tmp_path, world):
    cfg = RunConfig(graph=str(tmp_path / "{task}.jsonl"))
    rep = train(["mix-paint"], {"mix-paint": world.variation_ids("mix-paint", "train")}, cfg)
    graph = TemporalGraph.load(rep.graphs["mix-paint"])
    graph.check_integrity()
    assert len(graph) > 0 and len(rep.facts_per_episode) == 5
    assert sum(rep.facts_per_episode.values()) == len(graph)


def test_train_is_deterministic(tmp_path, world):
    texts = []
    for name in ("a", "b"):
        cfg = RunConfig(graph=str(tmp_path / name / "{task}.jsonl"))
        train(["boil-water"], {"boil-water": [0, 1]}, cfg)
        texts.append((tmp_path / name / "boil-water.jsonl").read_bytes())
    assert texts[0] == texts[1]


def test_train_no_variations_warns(tmp_path, caplog):
    cfg = RunConfig(graph=str(tmp_path / "{task}.jsonl"))
    with caplog.at_level(logging.WARNING):
        rep = train(["mix-paint"], {"mix-paint": []}, cfg)
    assert "no variations" in caplog.text
    assert len(TemporalGraph.load(rep.graphs["mix-paint"])) == 0


def test_train_rejects_broken_golden(tmp_path, monkeypatch):
    from tkg_agent.environments import MicroLab

    truncated = MicroLab.golden_trajectory
    monkeypatch.setattr(MicroLab, "golden_trajectory", lambda self, v: truncated(self, v)[:-1])
    cfg = RunConfig(graph=str(tmp_path / "{task}.jsonl"))
    with pytest.raises(FixtureError):
        train(["boil-water"], {"boil-water": [8]}, cfg)


# -- eval -------------------------------------------------------------------------

def test_eval_mean_and_std(trained):
    rep = evaluate(["boil-water"], {"boil-water": [0, 2, 9]}, trained)
    (row,) = rep.rows
    assert sorted(row.scores) == [25, 100, 100]
    assert row.mean == 75
    assert row.std == pytest.approx(hand_std([100, 100, 25]), abs=1e-9)
    assert rep.subjects == {"thermodynamics": 75} and rep.overall == 75


def test_eval_single_variation_and_rows(trained):
    rep = evaluate(["mix-paint", "find-living-thing"], {"mix-paint": [5], "find-living-thing": [6]}, trained)
    assert len(rep.rows) == 2
    assert all(r.std == 0 for r in rep.rows)
    assert "overall" in rep.to_table()
    assert json.loads(rep.to_json())["overall"] == rep.overall


def test_subjects_weight_tasks_equally(trained):
    rep = evaluate(["find-living-thing", "find-non-living-thing"],
                   {"find-living-thing": [5], "find-non-living-thing": [5, 6, 7]}, trained)
    rows = {r.task: r.mean for r in rep.rows}
    assert rep.subjects["biology"] == pytest.approx(sum(rows.values()) / 2)


def test_eval_requires_pairs(trained):
    with pytest.raises(ConfigError):
        evaluate(["mix-paint"], {"mix-paint": []}, trained)


def test_aborted_episode_counts_partial(trained):
    cfg = build_config(trained.as_dict(), {"max_steps": 2})
    rep = evaluate(["boil-water"], {"boil-water": [0]}, cfg)
    assert rep.episodes[0]["termination"] == "step-limit"
    assert rep.rows[0].scores == [rep.episodes[0]["score"]]


def test_metrics_recomputable_from_trace(trained, tmp_path):
    cfg = build_config(trained.as_dict(), {"trace": str(tmp_path / "{task}-{variation}.jsonl")})
    for var in (0, 8, 9):
        result = run("boil-water", var, cfg)
        events = read_trace(tmp_path / f"boil-water-{var}.jsonl")
        again = recompute_from_trace(events)
        assert again == {k: result.summary()[k] for k in again}


# -- QA ------------------------------------------------------------------------------

def test_qa_eval_toy_corpus():
    cfg = RunConfig(backend="scripted:qa")
    rep = qa_eval(load_corpus(scenario_path("qa_corpus.txt")), load_questions(scenario_path("qa_questions.jsonl")), cfg)
    assert len(rep.items) == 5
    grounded = [i for i in rep.items if i.grounded]
    assert grounded and all(i.em == 1 for i in grounded)
    assert rep.em == mean([i.em for i in rep.items])


def test_qa_unanswerable_scores_zero():
    cfg = RunConfig(backend="scripted:qa")
    rep = qa_eval(["The kettle is in the kitchen."], [{"question": "Who painted the ceiling?", "answer": "Tom"}], cfg)
    (item,) = rep.items
    assert (item.prediction, item.em, item.f1, item.grounded) == ("", 0, 0.0, False)


# -- CLI -------------------------------------------------------------------------------

def test_cli_run_json(trained, capsys):
    code = cli.main(["run", "--task", "find-living-thing", "--variation", "5", "--graph", trained.graph, "--json"])
    out = json.loads(capsys.readouterr().out)
    assert code == 0 and out["score"] == 100


def test_cli_eval_report(trained, tmp_path, capsys):
    report = tmp_path / "r.json"
    code = cli.main(["eval", "--task", "mix-paint", "--graph", trained.graph, "--workers", "1",
                     "--report", str(report)])
    assert code == 0 and "mix-paint" in capsys.readouterr().out
    assert json.loads(report.read_text())["rows"][0]["variations"] == [5, 6, 7]


def test_cli_train_and_graph(tmp_path, capsys):
    pattern = str(tmp_path / "{task}.jsonl")
    assert cli.main(["train", "--task", "mix-paint", "--variation", "0", "--graph", pattern]) == 0
    assert cli.main(["graph", str(tmp_path / "mix-paint.jsonl"), "--facts"]) == 0
    out = capsys.readouterr().out
    assert "facts" in out and "graph for mix-paint" in out


def test_cli_qa(capsys):
    assert cli.main(["qa", "--json"]) == 0
    assert "f1" in json.loads(capsys.readouterr().out)


@pytest.mark.parametrize("argv, code", [
    (["run", "--task", "mix-paint", "--plan-len", "0"], 2),
    (["run", "--task", "mix-paint", "--graph", "/nonexistent/{task}.jsonl"], 2),
    (["run", "--task", "mix-paint", "--variation", "1", "--variation", "2", "--no-wm"], 2),
    (["graph", "/nonexistent.jsonl"], 2),
    (["run", "--task", "mix-paint", "--no-wm", "--env", "remote:127.0.0.1:9"], 3),
    (["run", "--task", "mix-paint", "--no-wm", "--backend", "remote:http://127.0.0.1:9/v1#m"], 4),
])
def test_cli_exit_codes(argv, code, capsys):
    assert cli.main(argv) == code
    assert capsys.readouterr().err


def test_cli_config_file(trained, tmp_path, capsys):
    conf = tmp_path / "c.toml"
    conf.write_text(f'graph = "{trained.graph}"\nno_critic = true\n')
    assert cli.main(["run", "--config", str(conf), "--task", "boil-water", "--variation", "8", "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["reflections"] == 0
