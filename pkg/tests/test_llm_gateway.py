from __future__ import annotations

import json
import threading

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import scripted
from tkg_agent.llm import (
    API_KEY_ENV,
    AuthFailure,
    BackendFailure,
    BackendTimeout,
    Gateway,
    Message,
    NoScriptedMatch,
    Prompt,
    QueryOrAnswer,
    RateLimitExhausted,
    RemoteBackend,
    ScriptedBackend,
    ScriptedRule,
    StructuredParseError,
    clamp_reward,
    load_rules,
    parse_structured,
    render,
)

OK_BODY = {"choices": [{"message": {"role": "assistant", "content": "hello"}}],
           "usage": {"prompt_tokens": 7, "completion_tokens": 1}}


def user(text: str, template: str = "t") -> Prompt:
    return Prompt(template, [Message("user", text)])


def fault_server(statuses: list):
    """MockTransport replaying ``statuses`` (int or exception class), then 200s."""
    seen: list[httpx.Request] = []
    queue = list(statuses)

    def handler(request: httpx.Request) -> httpx.Response:
        seen.append(request)
        status = queue.pop(0) if queue else 200
        if isinstance(status, type) and issubclass(status, Exception):
            raise status("injected", request=request)
        if status == 200:
            return httpx.Response(200, json=OK_BODY)
        return httpx.Response(status, json={"error": "injected"})

    return httpx.MockTransport(handler), seen


def remote(statuses, **kw):
    transport, seen = fault_server(statuses)
    sleeps: list[float] = []
    backend = RemoteBackend("http://llm.test/v1", "m1", api_key=kw.pop("api_key", "k"),
                            sleep=sleeps.append, transport=transport, **kw)
    return backend, seen, sleeps


# -- prompts ------------------------------------------------------------------

def test_prompt_validation():
    with pytest.raises(ValueError):
        Prompt("t", [])
    with pytest.raises(ValueError):
        Prompt("t", [Message("user", "x")], temperature=2.5)
    with pytest.raises(ValueError):
        Prompt("t", [Message("robot", "x")])
    assert Prompt("t", [Message("user", "x")]).temperature == 0.0


def test_render_fills_placeholders_and_keeps_roles():
    p = render("select_types", query="Where is water?", types="LOC, OBJ")
    assert [m.role for m in p.messages] == ["system", "user"]
    assert "Question: Where is water?" in p.text
    assert "{" not in p.messages[1].content


# -- scripted backend -----------------------------------------------------------

def test_scripted_substring_rule():
    lm = scripted(("water: kitchen sink", {"match": "where can I find"}))
    assert lm.complete(user("Q: where can I find water?")).text == "water: kitchen sink"


def test_unmatched_prompt_names_template():
    lm = scripted(("x", {"match": "nope"}))
    with pytest.raises(NoScriptedMatch) as info:
        lm.complete(user("hello", template="policy"))
    assert "policy" in str(info.value)


def test_rule_order_limit_and_groups():
    backend = ScriptedBackend()
    backend.add("first", match="go", limit=1)
    backend.add("to {room}", pattern=r"go to the (?P<room>\w+)")
    assert backend.complete(user("go to the kitchen")).text == "first"
    assert backend.complete(user("go to the kitchen")).text == "to kitchen"
    fresh = backend.fresh()
    assert fresh.complete(user("go to the den")).text == "first"


def test_rule_template_filter():
    backend = ScriptedBackend([ScriptedRule("a", match="x", template="one"), ScriptedRule("b", match="x")])
    assert backend.complete(user("x", "one")).text == "a"
    assert backend.complete(user("x", "two")).text == "b"


def test_rule_needs_matcher():
    with pytest.raises(ValueError):
        ScriptedRule("reply")


def test_load_rules_file(tmp_path):
    path = tmp_path / "rules.jsonl"
    path.write_text('{"match": "a", "response": "A"}\n// comment\n\n{"pattern": "b+", "response": {"k": 1}}\n')
    rules = load_rules(path)
    assert [r.response for r in rules] == ["A", '{"k": 1}']
    path.write_text('{"match": "a", "response": "A"}\n{"response": "no matcher"}\n')
    with pytest.raises(ValueError, match=":2:"):
        load_rules(path)


def test_call_accounting_and_audit_log(tmp_path):
    audit = tmp_path / "audit.jsonl"
    lm = Gateway(ScriptedBackend().add("ok", match="x"), audit_path=audit)
    lm.complete(user("x", "a"))
    lm.complete(user("x", "a"))
    lm.complete(user("x", "b"))
    assert lm.calls == {"a": 2, "b": 1}
    records = [json.loads(line) for line in audit.read_text().splitlines()]
    assert [r["template"] for r in records] == ["a", "a", "b"]
    assert records[0]["messages"] == [{"role": "user", "content": "x"}]
    assert lm.prompts_for("b") == ["x"]


def test_stage_routing():
    kg = ScriptedBackend().add("from kg", match="x")
    lm = Gateway(ScriptedBackend().add("default", match="x"), routes={"kg": kg})
    assert lm.complete(user("x", "summarize")).text == "from kg"
    assert lm.complete(user("x", "policy")).text == "default"


def test_same_rules_same_log():
    def run():
        lm = scripted(("a", {"match": "1"}), ("b", {"pattern": r"\d"}))
        outs = [lm.complete(user(s)).text for s in ["1", "2", "13"]]
        return outs, lm.log

    assert run() == run()


def test_scripted_backend_is_thread_safe():
    backend = ScriptedBackend().add("once", match="x", limit=50).add("after", match="x")
    results: list[str] = []
    lock = threading.Lock()

    def worker():
        for _ in range(20):
            text = backend.complete(user("x")).text
            with lock:
                results.append(text)

    threads = [threading.Thread(target=worker) for _ in range(5)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results.count("once") == 50 and results.count("after") == 50


# -- remote backend -------------------------------------------------------------

def test_remote_success_payload():
    backend, seen, sleeps = remote([])
    c = backend.complete(user("hi"))
    assert (c.text, c.prompt_tokens, c.completion_tokens) == ("hello", 7, 1)
    assert c.backend == "remote:m1"
    req = seen[0]
    assert str(req.url) == "http://llm.test/v1/chat/completions"
    assert req.headers["authorization"] == "Bearer k"
    body = json.loads(req.content)
    assert body == {"model": "m1", "messages": [{"role": "user", "content": "hi"}], "temperature": 0.0,
                    "max_tokens": 512}
    assert sleeps == []


def test_remote_retries_rate_limit_then_succeeds():
    backend, seen, sleeps = remote([429, 429])
    assert backend.complete(user("hi")).text == "hello"
    assert len(seen) == 3 and len(backend.attempts) == 3
    assert sleeps == [1.0, 2.0]


@pytest.mark.parametrize("statuses,error", [
    ([429, 429, 429], RateLimitExhausted),
    ([503, 500, 502], BackendFailure),
    ([httpx.ReadTimeout] * 3, BackendTimeout),
    ([httpx.ConnectError] * 3, BackendFailure),
])
def test_remote_gives_up_after_three_attempts(statuses, error):
    backend, seen, sleeps = remote(statuses)
    with pytest.raises(error):
        backend.complete(user("hi"))
    assert len(backend.attempts) == 3
    assert sleeps == [1.0, 2.0]


@pytest.mark.parametrize("status", [401, 403])
def test_remote_auth_failure_is_not_retried(status):
    backend, seen, _ = remote([status])
    with pytest.raises(AuthFailure):
        backend.complete(user("hi"))
    assert len(seen) == 1


def test_remote_client_error_and_bad_payload():
    backend, _, _ = remote([400])
    with pytest.raises(BackendFailure):
        backend.complete(user("hi"))
    transport = httpx.MockTransport(lambda r: httpx.Response(200, json={"nope": 1}))
    with pytest.raises(BackendFailure, match="malformed"):
        RemoteBackend("http://x", "m", api_key="", transport=transport).complete(user("hi"))


def test_remote_reads_key_from_environment(monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, "secret")
    transport, seen = fault_server([])
    RemoteBackend("http://x/v1/chat/completions", "m", transport=transport).complete(user("hi"))
    assert seen[0].headers["authorization"] == "Bearer secret"
    assert str(seen[0].url) == "http://x/v1/chat/completions"


def test_error_kinds_are_distinct():
    kinds = {BackendTimeout, RateLimitExhausted, AuthFailure, NoScriptedMatch}
    assert len(kinds) == 4
    for a in kinds:
        for b in kinds - {a}:
            assert not issubclass(a, b)


# -- structured parsing -----------------------------------------------------------

PLAN = [{"action": f"step {i}", "o_hat": f"after {i}", "r_hat": 10 * i} for i in range(5)]


def test_plan_block_of_five_steps():
    steps = parse_structured("```json\n" + json.dumps(PLAN) + "\n```", "plan_steps")
    assert [s.action for s in steps] == [f"step {i}" for i in range(5)]
    assert steps[3].reward == 30


def test_trailing_prose_ignored():
    text = json.dumps({"verdict": "match", "rationale": "same"}) + "\nHope this helps! {not json}"
    assert parse_structured(text, "verdict") == ("match", "same")
    assert parse_structured('Sure: {"query": "where is water?"} done', "query_or_answer") == QueryOrAnswer(
        query="where is water?")


@pytest.mark.parametrize("shape,text", [
    ("plan_steps", "[]"),
    ("verdict", '{"verdict": "perhaps"}'),
    ("query_or_answer", "{}"),
    ("commands", '[1, 2]'),
    ("tuples", '[["a", "b"]]'),
    ("verdict", "no json at all"),
])
def test_bad_blocks_raise_with_raw_text(shape, text):
    with pytest.raises(StructuredParseError) as info:
        parse_structured(text, shape)
    assert info.value.raw == text


def test_repair_round_trip_counts_once():
    bad = "```json\n[{\"action\": \"go\",]\n```"
    lm = scripted((bad, {"template": "policy"}), (json.dumps(PLAN), {"template": "repair"}))
    steps = lm.structured(render("policy"), "plan_steps")
    assert len(steps) == 5
    assert lm.repairs == 1
    assert lm.calls == {"policy": 1, "repair": 1}
    repair_prompt = lm.log[-1]["messages"]
    assert repair_prompt[-2] == {"role": "assistant", "content": bad}


def test_failed_repair_surfaces_parse_error():
    lm = scripted(("garbage", {"template": "policy"}), ("more garbage", {"template": "repair"}))
    with pytest.raises(StructuredParseError) as info:
        lm.structured(render("policy"), "verdict")
    assert info.value.raw == "more garbage"
    assert lm.repairs == 1


@pytest.mark.parametrize("value,expected", [
    (10, (10.0, True)), ("25 points", (25.0, True)), (150, (100.0, True)), (-3, (0.0, True)),
    ("lots", (0.0, False)), (None, (0.0, False)), (float("nan"), (0.0, False)),
])
def test_clamp_reward(value, expected):
    assert clamp_reward(value) == expected


@settings(max_examples=100, deadline=None)
@given(st.lists(st.text(alphabet="abcdefgh ", min_size=1, max_size=12).filter(str.strip), min_size=1, max_size=6),
       st.text(max_size=40))
def test_property_commands_survive_surrounding_prose(commands, prose):
    text = f"{prose.replace('`', '')}\n```json\n{json.dumps(commands)}\n```\ntrailing words"
    assert parse_structured(text, "commands") == [c.strip() for c in commands]
