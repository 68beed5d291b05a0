from __future__ import annotations

import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import scripted
from tkg_agent.extraction import PipelineConfig, ingest_documents
from tkg_agent.harness.runner import make_backend
from tkg_agent.kg_store import ALL_TYPES, EntityType, TemporalGraph
from tkg_agent.llm import Gateway, QueryOrAnswer
from tkg_agent.retrieval_qa import (
    EXTRAPOLATED,
    GROUNDED,
    UNKNOWN,
    Answer,
    Monologue,
    Query,
    UnknownEntityError,
    graph_qa,
    run_monologue,
    select_entity_types,
    select_seed_entities,
)
from tkg_agent.trace import Tracer

FACT_LINE = re.compile(r"^t=(\d+): .+ --.+--> .+$")


def kitchen_graph() -> TemporalGraph:
    g = TemporalGraph()
    sink = g.upsert_entity("sink", "OBJ")
    water = g.upsert_entity("water", "SUBSTANCE")
    kitchen = g.upsert_entity("kitchen", "LOC")
    g.insert_fact(sink, "contains", water, 1)
    g.insert_fact(sink, "is in", kitchen, 2)
    return g


def kitchen_lm() -> Gateway:
    return scripted(
        ("LOC, SUBSTANCE", {"template": "select_types"}),
        ("kitchen\nwater", {"template": "select_seeds"}),
        ("The water is in the sink in the {room}.",
         {"template": "graph_answer", "pattern": r"sink --is in--> (?P<room>\w+)"}),
        ("unknown", {"template": "graph_answer"}),
    )


def answer_lm(reply="ok") -> Gateway:
    return scripted(("OBJ", {"template": "select_types"}), ("", {"template": "select_seeds"}),
                    (reply, {"template": "graph_answer"}))


# -- select_entity_types ---------------------------------------------------------

def test_water_question_types():
    types = select_entity_types("Where can I find water?", kitchen_lm())
    assert types == {EntityType.LOC, EntityType.SUBSTANCE}


def test_unparseable_types_fall_back_to_taxonomy():
    lm = scripted(("I am not sure, sorry.", {"template": "select_types"}))
    assert select_entity_types("Where?", lm) == set(ALL_TYPES)


def test_type_aliases_understood():
    lm = scripted(("a person and a location", {"template": "select_types"}))
    assert select_entity_types("Who?", lm) == {EntityType.PER, EntityType.LOC}


NAMED = [
    ("Where is the kettle?", "kettle", "OBJ"), ("Is the kitchen warm?", "kitchen", "LOC"),
    ("Who is Ada?", "ada", "PER"), ("What is water made of?", "water", "SUBSTANCE"),
    ("When did the agent open the door?", "open", "ACTION"), ("What is heat?", "heat", "CONCEPT"),
    ("Where does the frog live?", "frog", "OBJ"), ("How hot is the stove?", "stove", "OBJ"),
    ("Is the greenhouse open?", "greenhouse", "LOC"), ("Where did Ada put the salt?", "salt", "SUBSTANCE"),
]


@pytest.mark.parametrize("question,name,etype", NAMED)
def test_named_entity_type_always_chosen(question, name, etype):
    g = TemporalGraph()
    for n, t in {(n, t) for _, n, t in NAMED}:
        g.upsert_entity(n, t)
    lm = scripted(("CONCEPT", {"template": "select_types"}))
    assert EntityType(etype) in select_entity_types(question, lm, g)


# -- select_seed_entities ----------------------------------------------------------

CANDS = [(0, "kitchen"), (1, "water"), (2, "sink"), (3, "red box"), (4, "stove")]


def overlap_oracle(text, candidates):
    words = set(re.findall(r"[a-z0-9]+", text.lower()))
    scored = [(len(set(name.split()) & words), -eid, eid) for eid, name in candidates]
    return [eid for *_, eid in sorted(scored, reverse=True)]


def test_single_candidate_forced():
    lm = scripted(("never asked", {"template": "select_seeds"}))
    assert select_seed_entities("q?", [(0, "kitchen")], lm) == [0]
    assert lm.calls["select_seeds"] == 0


def test_scripted_pick_of_two():
    lm = scripted(("- sink\n- stove", {"template": "select_seeds"}))
    assert select_seed_entities("q?", CANDS, lm) == [2, 4]


def test_invented_name_replaced_by_overlap():
    lm = scripted(("water\nblue box", {"template": "select_seeds"}))
    q = "Where is the box with water?"
    picked = select_seed_entities(q, CANDS, lm)
    assert picked[0] == 1
    expected_second = [e for e in overlap_oracle(q + " blue box", CANDS) if e != 1][0]
    assert picked[1] == expected_second == 3


def test_empty_candidates_rejected():
    with pytest.raises(UnknownEntityError):
        select_seed_entities("q?", [], answer_lm())


# -- graph_qa ----------------------------------------------------------------------

def test_toy_graph_water_question():
    g = kitchen_graph()
    lm = kitchen_lm()
    ans = graph_qa("Where can I find water?", g, lm)
    assert "kitchen" in ans.text
    assert ans.supporting == (0, 1) and ans.confidence == GROUNDED
    facts = lm.log[-1]["messages"][1]["content"]
    assert "t=1: sink --contains--> water\nt=2: sink --is in--> kitchen" in facts


def test_empty_graph_is_unknown():
    lm = answer_lm()
    ans = graph_qa("Where?", TemporalGraph(), lm)
    assert ans == Answer("unknown", (), UNKNOWN)
    assert sum(lm.calls.values()) == 0


def test_no_candidates_is_unknown():
    g = TemporalGraph()
    g.upsert_entity("kitchen", "LOC")
    lm = scripted(("PER", {"template": "select_types"}))
    assert graph_qa("Who?", g, lm).confidence == UNKNOWN


def test_two_hop_corpus_chain():
    g = TemporalGraph()
    ingest_documents(["Alice was born in Bergen.", "Bergen is the capital of Norway."], g,
                     PipelineConfig(summarize=False))
    lm = Gateway(make_backend("scripted:qa"))
    ans = graph_qa("In which country was Alice born?", g, lm)
    assert ans.text.lower() == "norway"
    assert set(ans.supporting) == {f.seq for f in g.facts}


def test_budget_keeps_newest_and_marks_extrapolated():
    g = TemporalGraph()
    hub = g.upsert_entity("hub", "OBJ")
    for i in range(250):
        g.insert_fact(hub, "links", g.upsert_entity(f"n{i}", "OBJ"), 250 - i)
    lm = answer_lm()
    ans = graph_qa("hub?", g, lm)
    assert len(ans.supporting) == 200 and ans.confidence == EXTRAPOLATED
    newest = sorted(g.facts, key=lambda f: (f.t, f.seq))[-200:]
    assert set(ans.supporting) == {f.seq for f in newest}


def test_hop_limit_caps_expansion():
    g = TemporalGraph()
    ids = [g.upsert_entity(n, "OBJ") for n in "abcd"]
    for i in range(3):
        g.insert_fact(ids[i], "next", ids[i + 1], i)
    lm = scripted(("OBJ", {"template": "select_types"}), ("a", {"template": "select_seeds", "limit": 1}),
                  ("b", {"template": "select_seeds"}), ("ok", {"template": "graph_answer"}))
    ans = graph_qa("a?", g, lm, hop_limit=1)
    assert len(ans.supporting) == 2  # a-b and b-c reached from seeds {a, b}


def test_trace_record_per_question():
    tracer = Tracer()
    graph_qa(Query("Where can I find water?", "policy"), kitchen_graph(), kitchen_lm(), tracer=tracer)
    (event,) = tracer.of_kind("qa")
    assert event["module"] == "policy"
    assert event["types"] == ["LOC", "SUBSTANCE"]
    assert event["seeds"] == ["kitchen", "water"]
    assert event["facts"] == [0, 1]


def test_answer_and_query_invariants():
    with pytest.raises(ValueError):
        Answer("x", (), GROUNDED)
    with pytest.raises(ValueError):
        Answer("x", (1,), UNKNOWN)
    with pytest.raises(ValueError):
        Query("  ")
    with pytest.raises(ValueError):
        Query("q", "critic")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_property_rendered_facts_are_grounded_and_ordered(seed):
    import random

    from conftest import random_graph

    g = random_graph(random.Random(seed), 20, 40)
    lm = scripted(("OBJ, LOC, PER, SUBSTANCE, ACTION, CONCEPT", {"template": "select_types"}),
                  ("e1\ne2", {"template": "select_seeds"}), ("ok", {"template": "graph_answer"}))
    ans = graph_qa("e1 and e2?", g, lm)
    seqs = {f.seq for f in g.facts}
    assert set(ans.supporting) <= seqs
    if lm.calls["graph_answer"]:
        lines = lm.log[-1]["messages"][1]["content"].split("\n")[1:-2]
        ts = [int(FACT_LINE.match(line).group(1)) for line in lines]
        assert ts == sorted(ts) and len(ts) == len(ans.supporting)
    assert len(ans.supporting) <= 200


# -- run_monologue -------------------------------------------------------------------

def monologue_lm(queries: int) -> Gateway:
    return scripted(
        ('{"query": "Where can I find water?"}', {"template": "monologue", "limit": queries}),
        ('{"answer": "the kitchen"}', {"template": "monologue"}),
        ("LOC, SUBSTANCE", {"template": "select_types"}), ("kitchen\nwater", {"template": "select_seeds"}),
        ("kitchen sink", {"template": "graph_answer"}),
    )


def test_immediate_answer():
    lm = monologue_lm(0)
    ans, entries = run_monologue("Where is water?", kitchen_graph(), lm, k=5)
    assert entries == [] and lm.calls["monologue"] == 1
    assert ans.text == "the kitchen" and ans.confidence == UNKNOWN


def test_always_querying_hits_k_then_forced():
    lm = monologue_lm(100)
    ans, entries = run_monologue("Where is water?", kitchen_graph(), lm, k=5)
    assert len(entries) == 5 and [e.turn for e in entries] == list(range(5))
    assert lm.calls["graph_answer"] == 5
    assert lm.calls["monologue"] == 6
    assert "No queries remain" in lm.prompts_for("monologue")[-1]
    assert ans.text == "kitchen sink" and ans.confidence == GROUNDED


def test_two_queries_then_answer():
    lm = monologue_lm(2)
    ans, entries = run_monologue("Where is water?", kitchen_graph(), lm, k=5)
    assert len(entries) == 2 and lm.calls["monologue"] == 3
    assert ans.text == "the kitchen" and set(ans.supporting) == {0, 1}


def test_monologue_without_graph_has_no_budget():
    mono = Monologue(None, answer_lm(), k=5)
    assert not mono.enabled and mono.remaining == 0
    with pytest.raises(RuntimeError):
        mono.ask("anything")
    with pytest.raises(ValueError):
        Monologue(None, answer_lm(), k=0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 12), st.integers(1, 8))
def test_property_turn_bound(n_queries, k):
    calls = []

    def predictor(question, mono):
        calls.append(len(mono))
        return QueryOrAnswer(query="Where can I find water?") if len(calls) <= n_queries else QueryOrAnswer(
            answer={"answer": "done"})

    lm = monologue_lm(0)
    _, entries = run_monologue("q?", kitchen_graph(), lm, k=k, predictor=predictor)
    assert len(entries) == min(n_queries, k)
    assert lm.calls["graph_answer"] <= k
