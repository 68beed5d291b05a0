from __future__ import annotations

import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import scripted
from tkg_agent.environments import MicroLab
from tkg_agent.extraction import (
    IdentityResolver,
    LLMExtractor,
    LLMResolver,
    PipelineConfig,
    RuleExtractor,
    RuleResolver,
    Transition,
    TupleCandidate,
    extract_tuples,
    ingest_documents,
    ingest_transition,
    resolve_coreferences,
    summarize_transition,
)
from tkg_agent.harness.runner import make_backend
from tkg_agent.kg_store import EntityType, TemporalGraph
from tkg_agent.llm import Gateway

FIXTURE = Transition("You are in the kitchen. The cupboard is closed.", "open cupboard",
                     "You open the cupboard. The cupboard contains a kettle.", t=4, episode="ep-1")
CANNED = "Agent opens the cupboard. The cupboard contains a kettle."

# hand-resolved coreference fixture
COREF_CASES = [
    ("the kettle is hot. it whistles.", "the kettle is hot. the kettle whistles."),
    ("The pot is on the stove. It contains water.", "The pot is on the stove. The pot contains water."),
    ("the agent opens the cupboard. it contains a kettle.", "the agent opens the cupboard. the cupboard contains a kettle."),
    ("A frog sits in the pond. It croaks.", "A frog sits in the pond. The frog croaks."),
    ("the seeds are in the jar. they need water.", "the seeds are in the jar. the seeds need water."),
    ("The stove is broken. Its knob is missing.", "The stove is broken. The stove's knob is missing."),
    ("Marie Curie was born in Warsaw. She moved to Paris.", "Marie Curie was born in Warsaw. Marie Curie moved to Paris."),
    ("Lena Park founded Apex Robotics. She lives in Oslo.", "Lena Park founded Apex Robotics. Lena Park lives in Oslo."),
    ("Hamlet was written by William Shakespeare. He was born in Stratford.",
     "Hamlet was written by William Shakespeare. William Shakespeare was born in Stratford."),
    ("The kettle is hot. It whistles. It is loud.", "The kettle is hot. The kettle whistles. The kettle is loud."),
]


def canned_lm() -> Gateway:
    return scripted((CANNED, {"template": "summarize", "match": "open cupboard"}),
                    ("Agent looks around. Nothing changed.", {"template": "summarize"}))


# -- summarize_transition -----------------------------------------------------

def test_scripted_summary_is_returned_verbatim():
    assert summarize_transition(FIXTURE, canned_lm()) == CANNED


def test_noop_transition_does_not_crash():
    obs = "You are in the hallway."
    tr = Transition(obs, "look around", obs, 0, "ep")
    g = TemporalGraph()
    added = ingest_transition(tr, g, PipelineConfig(), canned_lm())
    assert added >= 0
    g.check_integrity()


def test_summary_of_golden_cupboard_transition_names_both_objects(world):
    env = MicroLab(world, "use-thermometer")
    env.reset(1)
    before = env.step("go kitchen").observation
    after = env.step("open cupboard").observation
    lm = Gateway(make_backend("scripted:agent"))
    summary = summarize_transition(Transition(before, "open cupboard", after, 2), lm)
    assert "cupboard" in summary and "thermometer" in summary


def test_long_summary_truncated_to_limit():
    lm = scripted(("word " * 300, {"template": "summarize"}))
    assert len(summarize_transition(FIXTURE, lm).split()) == 120


# -- resolve_coreferences -----------------------------------------------------

def test_identity_resolver_leaves_text():
    text = "the kettle is hot. it whistles."
    assert resolve_coreferences(text, IdentityResolver()) == text


@pytest.mark.parametrize("text,expected", COREF_CASES)
def test_rule_resolver_fixture(text, expected):
    assert resolve_coreferences(text, RuleResolver()) == expected


def test_rule_resolver_without_pronouns_is_identity():
    text = "The sink contains water. The pot is in the kitchen."
    assert RuleResolver().resolve(text) == text


def test_failing_resolver_falls_back(caplog):
    class Broken:
        def resolve(self, text):
            raise RuntimeError("boom")

    with caplog.at_level(logging.WARNING):
        assert resolve_coreferences("it is hot", Broken()) == "it is hot"
    assert "resolver failed" in caplog.text


def test_llm_resolver_uses_model_reply():
    lm = scripted(("the kettle whistles", {"template": "coref"}))
    assert LLMResolver(lm).resolve("it whistles") == "the kettle whistles"


# -- extract_tuples -------------------------------------------------------------

@pytest.mark.parametrize("text,expected", [
    ("the sink contains water", [("sink", "contains", "water")]),
    ("The pot is in the kitchen.", [("pot", "is in", "kitchen")]),
    ("the water is hot", [("water", "is", "hot")]),
    ("agent opens the cupboard", [("agent", "opens", "cupboard")]),
    ("You open the cupboard. The cupboard contains a kettle.", [("agent", "open", "cupboard"), ("cupboard", "contains", "kettle")]),
    ("Warsaw is the capital of Poland.", [("warsaw", "capital of", "poland")]),
    ("The sink contains water and soap.", [("sink", "contains", "water"), ("sink", "contains", "soap")]),
])
def test_rule_extractor_patterns(text, expected):
    got = [(t.subject, t.predicate, t.object) for t in extract_tuples(text, RuleExtractor())]
    assert got == expected


def test_rule_extractor_types():
    (tup,) = RuleExtractor().extract("Marie Curie was born in Warsaw.")
    assert (tup.subject_type, tup.object_type) == (EntityType.PER, EntityType.LOC)
    (tup,) = RuleExtractor({"water": EntityType.SUBSTANCE}).extract("the sink contains water")
    assert tup.object_type is EntityType.SUBSTANCE


def test_empty_text_gives_no_tuples():
    assert extract_tuples("", RuleExtractor()) == []


def test_scripted_llm_extractor_returns_fixed_list():
    reply = '```json\n[{"subject": "sink", "predicate": "contains", "object": "water", "subject_type": "OBJ", "object_type": "SUBSTANCE"}]\n```'
    lm = scripted((reply, {"template": "extract"}))
    assert extract_tuples("whatever", LLMExtractor(lm)) == [
        TupleCandidate("sink", "contains", "water", EntityType.OBJ, EntityType.SUBSTANCE)]


def test_unparseable_extractor_output_gives_empty_list():
    lm = scripted(("no tuples here", {"template": "extract"}), ("still nothing", {"template": "repair"}))
    assert extract_tuples("text", LLMExtractor(lm)) == []


def test_tuple_candidate_rejects_blank_fields():
    with pytest.raises(ValueError):
        TupleCandidate("sink", " ", "water")


# -- ingest_transition ------------------------------------------------------------

def test_ingest_fixture_transition_adds_two_facts():
    g = TemporalGraph()
    cfg = PipelineConfig(resolver=RuleResolver(), extractor=RuleExtractor())
    lm = canned_lm()
    # stage-by-stage by hand
    by_hand = extract_tuples(resolve_coreferences(summarize_transition(FIXTURE, lm), cfg.resolver), cfg.extractor)
    assert ingest_transition(FIXTURE, g, cfg, lm) == len(by_hand) == 2
    assert {(g.name(f.subject), f.predicate, g.name(f.object)) for f in g.facts} == {
        (t.subject, t.predicate, t.object) for t in by_hand}
    assert all(f.t == FIXTURE.t and f.episode == "ep-1" for f in g.facts)


def test_duplicate_ingestion_adds_nothing():
    g = TemporalGraph()
    cfg = PipelineConfig()
    ingest_transition(FIXTURE, g, cfg, canned_lm())
    assert ingest_transition(FIXTURE, g, cfg, canned_lm()) == 0


def test_without_model_observation_is_extracted_directly():
    g = TemporalGraph()
    assert ingest_transition(FIXTURE, g, PipelineConfig(summarize=False)) == 2


def test_transition_validation():
    with pytest.raises(ValueError):
        Transition("", "look", "x", 0)
    with pytest.raises(ValueError):
        Transition("a", "look", "b", -1)


# -- ingest_documents ---------------------------------------------------------------

def test_two_chunk_corpus_forms_chain():
    g = TemporalGraph()
    n = ingest_documents(["Alice was born in Bergen.", "Bergen is the capital of Vestland."], g,
                         PipelineConfig(summarize=False))
    assert n == 2
    a, b = g.facts
    assert a.object == b.subject == g.entity_id("bergen")
    assert (a.t, b.t) == (0, 1)


def test_empty_chunk_skipped(caplog):
    g = TemporalGraph()
    with caplog.at_level(logging.WARNING):
        n = ingest_documents(["", "The sink contains water."], g, PipelineConfig(summarize=False))
    assert n == 1 and g.facts[0].t == 1
    assert "empty chunk" in caplog.text


def test_single_chunk_shares_timestamp():
    g = TemporalGraph()
    ingest_documents(["The sink contains water. The pot is in the kitchen."], g, PipelineConfig(summarize=False))
    assert len(g) == 2 and {f.t for f in g.facts} == {0}


def test_no_chunks_rejected():
    with pytest.raises(ValueError):
        ingest_documents([], TemporalGraph(), PipelineConfig())


# -- properties ---------------------------------------------------------------------

sentences = st.lists(st.sampled_from([
    "The sink contains water.", "The pot is in the kitchen.", "It is hot.", "The agent opens the cupboard.",
    "They are cold.", "The stove is off.", "Marie Curie was born in Warsaw.", "She moved to Paris.",
]), min_size=1, max_size=6).map(" ".join)


@settings(max_examples=50, deadline=None)
@given(st.lists(sentences, min_size=1, max_size=5))
def test_property_pipeline_is_deterministic(texts):
    cfg = PipelineConfig(summarize=False, resolver=RuleResolver())
    transitions = [Transition("start", f"step {i}", text, i, "ep") for i, text in enumerate(texts)]
    graphs = []
    for _ in range(2):
        g = TemporalGraph()
        for tr in transitions:
            ingest_transition(tr, g, cfg)
        graphs.append(g)
    assert graphs[0] == graphs[1]
    for f in graphs[0].facts:
        assert f.t == transitions[f.t].t


@settings(max_examples=50, deadline=None)
@given(st.text(max_size=200))
def test_property_rule_pipeline_never_crashes(text):
    g = TemporalGraph()
    ingest_documents([text or "x"], g, PipelineConfig(summarize=False, resolver=RuleResolver()))
    g.check_integrity()
