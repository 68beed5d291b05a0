"""Regenerate the scripted-backend rule files shipped in ``tkg_agent/scenarios``.

Run from the repository root: ``python3 tools/make_scenarios.py``.
Rules are tried in order, so specific rules come before generic ones.
"""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "tkg_agent" / "scenarios"

LIVING = "plant|frog|snail|beetle|fern"
NON_LIVING = "battery|wrench|light bulb"
ROOMS = "kitchen|workshop|greenhouse"


def rule(template, response, pattern=None, match=None, note=None):
    rec = {"template": template, "response": response}
    if pattern:
        rec["pattern"] = pattern
    if match:
        rec["match"] = match
    if note:
        rec["note"] = note
    return rec


def act(a):
    return json.dumps({"action": a})


DONE = json.dumps({"done": True})


def chain(task_anchor, steps, extra="", first_extra=""):
    """Policy rules walking a fixed list of high-level actions.

    ``extra`` is a regex fragment that must also match (placed between the
    task anchor and the previous-action line).
    """
    out = []
    prev = ["none"] + steps
    nxt = steps + [None]
    for p, n in zip(prev, nxt):
        resp = DONE if n is None else act(n)
        pre = first_extra if p == "none" else ""
        out.append(rule("policy", resp,
                        pattern=f"{task_anchor}.*{extra}{pre}.*Previous planned action: {p}\n"))
    return out


def reflected(text):
    return rf"Reflections:\n(?:[^\n]*\n)*?\d+\. [^\n]*{text}"


def belief(text):
    return rf"Belief: [^\n]*{text}"


def agent_rules():
    rules = []
    # -- policy: direct-command style when the grammar is in the prompt (no actor) --
    boil = r"Your task is to boil water\."
    hint = r"Use only permissible commands:"
    rules += [rule("policy", r, pattern=f"{boil}.*{reflected('stove is broken')}.*{hint}.*Previous planned action: {p}\n")
              for p, r in [("none", act("pick up pot")), ("pick up pot", act("go workshop")),
                           ("go workshop", act("put pot on hot plate")),
                           ("put pot on hot plate", act("activate hot plate")),
                           ("activate hot plate", act("look around")), ("look around", DONE)]]
    rules += [rule("policy", r, pattern=f"{boil}.*{hint}.*Previous planned action: {p}\n")
              for p, r in [("none", act("go kitchen")), ("go kitchen", act("pour water into pot")),
                           ("pour water into pot", act("put pot on stove")),
                           ("put pot on stove", act("activate stove")),
                           ("activate stove", act("look around")), ("look around", DONE)]]

    # -- policy: boil water --
    rules += chain(boil, ["pick up the pot", "go to the workshop", "put the pot on the hot plate",
                          "turn on the hot plate", "wait for the water to boil"],
                   extra=reflected("stove is broken"))
    rules += chain(boil, ["open the cupboard", "fill the pot with water", "put the pot on the stove",
                          "turn on the stove", "wait for the water to boil"],
                   extra=reflected("'fill the pot with water'[^\n]*can't do that"))
    rules += chain(boil, ["go to the kitchen", "fill the pot with water", "put the pot on the stove",
                          "turn on the stove", "wait for the water to boil"])

    # -- policy: find a (non-)living thing --
    rules += chain(r"find a living thing", ["go to the greenhouse", "focus on the living thing",
                                            "pick up the living thing", "go to the hallway",
                                            "put the living thing in the red box"])
    rules += chain(r"find a non-living thing", ["go to the workshop", "focus on the non-living thing",
                                                "pick up the non-living thing", "go to the hallway",
                                                "put the non-living thing in the red box"])

    # -- policy: thermometer --
    thermo = r"measure the temperature of the water"
    rules += chain(thermo, ["go to the workshop", "pick up the thermometer", "go to the kitchen",
                            "measure the temperature of the water"])

    # -- policy: mix paint --
    paint = r"make purple paint"
    rules.append(rule("policy", act("pour the blue paint into the bowl"),
                      pattern=f"{paint}.*{belief('The bowl contains red paint')}.*Previous planned action: none\n"))
    rules += chain(paint, ["go to the kitchen", "open the cupboard", "pick up the bowl", "go to the workshop",
                           "pour the red paint into the bowl"],
                   extra=reflected("'pour the red paint into the bowl'[^\n]*can't do that"))
    rules += chain(paint, ["go to the workshop", "pour the red paint into the bowl",
                           "pour the blue paint into the bowl", "stir the paint in the bowl",
                           "focus on the purple paint"])

    # -- policy: grow a plant --
    grow = r"grow a plant"
    rules += chain(grow, ["open the seed jar", "put the seed in the flower pot", "water the flower pot",
                          "wait for the seed to grow"],
                   extra=reflected("'put the seed in the flower pot'[^\n]*can't do that"))
    rules += chain(grow, ["go to the greenhouse", "put the seed in the flower pot", "water the flower pot",
                          "wait for the seed to grow"])

    # -- belief: keep the latest observation --
    rules.append(rule("belief", "{latest}", pattern=r"Latest observation: (?P<latest>[^\n]*)"))

    # -- transition: one memory query, then predict from its answer --
    rules.append(rule("transition", json.dumps({"query": "What happens when the agent tries to {a}?"}),
                      pattern=r"Action to predict: (?P<a>[^\n]+)\nInner monologue:\n\(none\)\nQueries remaining: [1-9]"))
    rules.append(rule("transition", json.dumps({"observation": "Memory suggests: {ans}"}),
                      pattern=r"Action to predict: [^\n]+\nInner monologue:\n.*A\d+: (?P<ans>[^\n\"\\]+)\n"))
    rules.append(rule("transition", json.dumps({"observation": "The agent manages to {a}."}),
                      pattern=r"Action to predict: (?P<a>[^\n\"\\]+)"))

    # -- reward --
    rules.append(rule("reward", json.dumps({"reward": 0}), pattern=r"Action to score: (?:go to|wait|open)"))
    rules.append(rule("reward", json.dumps({"reward": 25}), match="Action to score:"))

    # -- actor: grounding --
    g = "ground"
    obs = r"Current observation: [^\n]*"
    hl = "High-level action: "
    rules += [
        rule(g, json.dumps(["focus on {x}"]),
             pattern=rf"{obs}The (?P<x>{LIVING}) is in the greenhouse.*{hl}focus on the living thing\n"),
        rule(g, json.dumps(["focus on {x}"]),
             pattern=rf"{obs}The (?P<x>{NON_LIVING}) is in the workshop.*{hl}focus on the non-living thing\n"),
        rule(g, json.dumps(["pick up {x}"]),
             pattern=rf"Current observation: You focus on the (?P<x>[a-z ]+)\..*{hl}pick up the (?:non-)?living thing\n"),
        rule(g, json.dumps(["put {x} in red box"]),
             pattern=rf"{obs}The (?P<x>[a-z ]+) is in your inventory.*{hl}put the (?:non-)?living thing in the red box\n"),
        rule(g, json.dumps(["go hallway", "go {r}"]),
             pattern=rf"Recent commands: [^\n]*\bgo (?:{ROOMS})(?:, (?!go )[^,\n]+)*\n.*{hl}go to the (?P<r>{ROOMS})\n"),
        rule(g, json.dumps(["go {r}"]), pattern=rf"{hl}go to the (?P<r>[a-z ]+)\n"),
        rule(g, json.dumps(["pour {s} into {c}"]), pattern=rf"{hl}fill the (?P<c>[a-z ]+) with (?P<s>[a-z ]+)\n"),
        rule(g, json.dumps(["pour {s} into {c}"]), pattern=rf"{hl}pour the (?P<s>[a-z ]+) into the (?P<c>[a-z ]+)\n"),
        rule(g, json.dumps(["pour rain water into {c}"]), pattern=rf"{hl}water the (?P<c>[a-z ]+)\n"),
        rule(g, json.dumps(["activate {d}"]), pattern=rf"{hl}turn on the (?P<d>[a-z ]+)\n"),
        rule(g, json.dumps(["put {x} on {y}"]), pattern=rf"{hl}put the (?P<x>[a-z ]+) on the (?P<y>[a-z ]+)\n"),
        rule(g, json.dumps(["put {x} in {y}"]), pattern=rf"{hl}put the (?P<x>[a-z ]+) in the (?P<y>[a-z ]+)\n"),
        rule(g, json.dumps(["pick up {x}"]), pattern=rf"{hl}pick up the (?P<x>[a-z ]+)\n"),
        rule(g, json.dumps(["open {x}"]), pattern=rf"{hl}open the (?P<x>[a-z ]+)\n"),
        rule(g, json.dumps(["focus on {x}"]), pattern=rf"{hl}focus on the (?P<x>[a-z ]+)\n"),
        rule(g, json.dumps(["use stirrer on {c}"]), pattern=rf"{hl}stir the paint in the (?P<c>[a-z ]+)\n"),
        rule(g, json.dumps(["use thermometer on {s}"]), pattern=rf"{hl}measure the temperature of the (?P<s>[a-z ]+)\n"),
        rule(g, json.dumps(["look around", "look around", "look around"]), pattern=rf"{hl}wait for the"),
        rule("ground_repair", json.dumps([]), match="These commands are not permissible"),
    ]

    # -- critic --
    rules += [
        rule("critic", json.dumps({"verdict": "divergence", "rationale": "The stove is broken and cannot heat "
                                   "anything; find an alternative heating method."}),
             pattern=r"Actual observation after: The stove is broken\."),
        rule("critic", json.dumps({"verdict": "divergence", "rationale": "The command had no effect."}),
             pattern=r"Actual observation after: (?:You can't do that\.|I don't understand that\.)"),
        rule("critic", json.dumps({"verdict": "match", "rationale": "The outcome agrees with the prediction."}),
             match="Actual observation after:"),
    ]

    # -- knowledge-graph construction and graph QA --
    rules += [
        rule("summarize", "Agent {a}. {o}",
             pattern=r"Action: (?P<a>[^\n]+)\nObservation after: (?P<o>[^\n]*)"),
        rule("select_types", "LOC, OBJ, SUBSTANCE", match="Question:"),
        rule("select_seeds", "{q}", pattern=r"Question: (?P<q>[^\n]+)"),
        rule("graph_answer", "{fact}",
             pattern=r"\A.*\n(?P<fact>t=\d+: [^\n]*\b(?P<w>[a-z]+)\b[^\n]*)\n.*Question: [^\n]*\b(?P=w)\?"),
        rule("graph_answer", "{last}", pattern=r"(?P<last>t=\d+: [^\n]*)\nQuestion:"),
        rule("graph_answer", "unknown", match="Question:"),
        rule("monologue", json.dumps({"answer": "unknown"}), match="Question:"),
    ]
    return rules


def qa_rules():
    ans = "graph_answer"
    two_hop = [
        (r": (?P<s>[a-z][a-z ]*) --born in--> (?P<x>[a-z ]+)\n.*: (?P=x) --capital of--> (?P<y>[a-z ]+)\n"
         r".*Question: In which country was (?P=s) born"),
        (r": (?P<s>[a-z][a-z ]*) --is in--> (?P<x>[a-z ]+)\n.*: (?P=x) --capital of--> (?P<y>[a-z ]+)\n"
         r".*Question: In which country is (?:the )?(?P=s)\?"),
        (r": (?P<w>[a-z][a-z ]*) --written by--> (?P<a>[a-z ]+)\n.*: (?P=a) --born in--> (?P<y>[a-z ]+)\n"
         r".*Question: Where was the author of (?P=w) born"),
        (r": (?P<p>[a-z][a-z ]*) --founded--> (?P<c>[a-z ]+)\n.*: (?P=p) --lives in--> (?P<y>[a-z ]+)\n"
         r".*Question: In which city does the founder of (?P=c) live"),
        (r": (?P<f>[a-z][a-z ]*) --directed by--> (?P<d>[a-z ]+)\n.*: (?P=d) --married to--> (?P<y>[a-z ]+)\n"
         r".*Question: Who is the spouse of the director of (?:the )?(?P=f)\?"),
    ]
    rules = [rule(ans, "{y}", pattern="(?i)" + p) for p in two_hop]
    rules += [
        rule(ans, "unknown", match="Question:"),
        rule("select_types", "PER, LOC, OBJ", match="Question:"),
        rule("select_seeds", "{q}", pattern=r"Question: (?P<q>[^\n]+)"),
        rule("summarize_document", "{text}", pattern=r"Passage: (?P<text>.*)$"),
    ]
    return rules


def write(name, rules):
    path = OUT / name
    with path.open("w", encoding="utf-8") as fh:
        fh.write("// generated by tools/make_scenarios.py; edit that script instead\n")
        for r in rules:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")
    print(f"wrote {len(rules)} rules to {path}")


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    write("agent.jsonl", agent_rules())
    write("qa.jsonl", qa_rules())
