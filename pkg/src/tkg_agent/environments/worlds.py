"""The default MicroLab world: four rooms, six tasks, eight to ten variations each.

Variations 0-4 are the training split and 5-7 the test split. The boil-water
task adds two extra test variations: 8 has a broken stove (fault injection)
and 9 has no stove at all.
"""

from __future__ import annotations

from .microlab import WorldDef

ROOMS = ["hallway", "kitchen", "workshop", "greenhouse"]
DOORS = [["hallway", "kitchen"], ["hallway", "workshop"], ["hallway", "greenhouse"]]

LIVING = ["plant", "frog", "snail", "beetle", "fern"]
NON_LIVING = ["battery", "wrench", "light bulb"]
WATER_PHASES = [[0, "cold"], [1, "warm"], [2, "hot"], [3, "boiling"]]
SEED_STAGES = [[0, "seed"], [1, "sprout"], [3, "plant"]]

SUBJECTS = {
    "find-living-thing": "biology",
    "find-non-living-thing": "biology",
    "use-thermometer": "thermodynamics",
    "mix-paint": "chemistry",
    "boil-water": "thermodynamics",
    "grow-plant": "botany",
}


def _obj(name, location, etype="OBJ", **kw):
    return {"name": name, "location": location, "etype": etype, **kw}


def _objects() -> list[dict]:
    fixed = {"fixed": True}
    return [
        _obj("red box", "hallway", container=True, **fixed),
        _obj("coat rack", "hallway", **fixed),
        _obj("sink", "kitchen", container=True, **fixed),
        _obj("water", "sink", "SUBSTANCE", substance=True, phases=WATER_PHASES),
        _obj("pot", "kitchen", container=True),
        _obj("stove", "kitchen", container=True, surface=True, device=True, heater=True, **fixed),
        _obj("cupboard", "kitchen", container=True, openable=True, open=False, **fixed),
        _obj("table", "workshop", container=True, surface=True, **fixed),
        _obj("hot plate", "workshop", container=True, surface=True, device=True, heater=True, **fixed),
        _obj("thermometer", "table", tool="thermometer"),
        _obj("stirrer", "workshop", tool="stirrer"),
        _obj("bowl", "workshop", container=True),
        _obj("red can", "workshop", container=True),
        _obj("blue can", "workshop", container=True),
        _obj("red paint", "red can", "SUBSTANCE", substance=True),
        _obj("blue paint", "blue can", "SUBSTANCE", substance=True),
        _obj("purple paint", None, "SUBSTANCE", substance=True),
        _obj("battery", "workshop"),
        _obj("wrench", "workshop"),
        _obj("light bulb", "workshop"),
        _obj("flower pot", "greenhouse", container=True),
        _obj("seed jar", "greenhouse", container=True, openable=True, open=True),
        _obj("seed", "seed jar", living=True, stages=SEED_STAGES),
        _obj("watering can", "greenhouse", container=True),
        _obj("rain water", "watering can", "SUBSTANCE", substance=True, hydrating=True),
        _obj("plant", "greenhouse", living=True),
        _obj("frog", "greenhouse", living=True),
        _obj("snail", "greenhouse", living=True),
        _obj("beetle", "greenhouse", living=True),
        _obj("fern", "greenhouse", living=True),
    ]


def _var(i: int, golden: list[str], **kw) -> dict:
    return {"id": i, "split": "train" if i < 5 else "test", "golden": golden, **kw}


def _find_living() -> dict:
    picks = ["plant", "frog", "snail", "beetle", "fern", "frog", "plant", "snail"]
    variations = []
    for i, x in enumerate(picks):
        remove = [o for o in LIVING if o != x] + ["seed", "seed jar"]
        overrides = {"flower pot": {"location": "hallway"}} if i % 3 == 1 else {}
        golden = ["go greenhouse", f"focus on {x}", f"pick up {x}", "go hallway", f"put {x} in red box"]
        variations.append(_var(i, golden, remove=remove, overrides=overrides))
    return {
        "id": "find-living-thing",
        "horizon": "short",
        "subject": SUBJECTS["find-living-thing"],
        "text": "Your task is to find a living thing. First, focus on the thing. "
                "Then, move it to the red box in the hallway.",
        "start": "hallway",
        "focus_requires": {"living": True},
        "subgoals": [
            {"desc": "be in the greenhouse", "weight": 25, "pred": {"kind": "at", "room": "greenhouse"}},
            {"desc": "focus on a living thing", "weight": 25,
             "pred": {"kind": "focus", "object": "@focus", "requires": {"living": True}}},
            {"desc": "hold the focused thing", "weight": 25, "pred": {"kind": "holding", "object": "@focus"}},
            {"desc": "focused thing in the red box", "weight": 25,
             "pred": {"kind": "in", "object": "@focus", "container": "red box"}},
        ],
        "variations": variations,
    }


def _find_non_living() -> dict:
    picks = ["battery", "wrench", "light bulb", "battery", "wrench", "light bulb", "wrench", "battery"]
    variations = []
    for i, x in enumerate(picks):
        remove = [o for o in NON_LIVING if o != x]
        golden = ["go workshop", f"focus on {x}", f"pick up {x}", "go hallway", f"put {x} in red box"]
        variations.append(_var(i, golden, remove=remove, mask_rooms=["greenhouse"] if i in (2, 6) else []))
    return {
        "id": "find-non-living-thing",
        "horizon": "short",
        "subject": SUBJECTS["find-non-living-thing"],
        "text": "Your task is to find a non-living thing in the workshop. First, focus on the thing. "
                "Then, move it to the red box in the hallway.",
        "start": "hallway",
        "focus_requires": {"living": False, "portable": True},
        "subgoals": [
            {"desc": "be in the workshop", "weight": 25, "pred": {"kind": "at", "room": "workshop"}},
            {"desc": "focus on a non-living thing", "weight": 25,
             "pred": {"kind": "focus", "object": "@focus", "requires": {"living": False}}},
            {"desc": "hold the focused thing", "weight": 25, "pred": {"kind": "holding", "object": "@focus"}},
            {"desc": "focused thing in the red box", "weight": 25,
             "pred": {"kind": "in", "object": "@focus", "container": "red box"}},
        ],
        "variations": variations,
    }


def _use_thermometer() -> dict:
    # (room holding the thermometer, container inside that room or None)
    spots = [("workshop", "table"), ("kitchen", "cupboard"), ("greenhouse", None), ("workshop", None),
             ("kitchen", None), ("greenhouse", None), ("kitchen", "cupboard"), ("workshop", "table")]
    variations = []
    for i, (room, holder) in enumerate(spots):
        golden = [] if room == "hallway" else [f"go {room}"]
        if holder == "cupboard":
            golden.append("open cupboard")
        golden.append("pick up thermometer")
        if room != "kitchen":
            golden += ["go hallway", "go kitchen"]
        golden.append("use thermometer on water")
        variations.append(_var(i, golden, overrides={"thermometer": {"location": holder or room}}))
    return {
        "id": "use-thermometer",
        "horizon": "medium",
        "subject": SUBJECTS["use-thermometer"],
        "text": "Your task is to measure the temperature of the water in the kitchen sink using the thermometer.",
        "start": "hallway",
        "subgoals": [
            {"desc": "hold the thermometer", "weight": 30, "pred": {"kind": "holding", "object": "thermometer"}},
            {"desc": "be in the kitchen", "weight": 20, "pred": {"kind": "at", "room": "kitchen"}},
            {"desc": "measure the water", "weight": 50,
             "pred": {"kind": "used", "tool": "thermometer", "object": "water"}},
        ],
        "variations": variations,
    }


def _mix_paint() -> dict:
    layouts = ["workshop", "cupboard", "workshop", "cupboard", "workshop", "cupboard", "workshop", "workshop"]
    variations = []
    for i, bowl in enumerate(layouts):
        golden = []
        if bowl == "cupboard":
            golden += ["go kitchen", "open cupboard", "pick up bowl", "go hallway"]
        golden += ["go workshop", "pour red paint into bowl", "pour blue paint into bowl",
                   "use stirrer on bowl", "focus on purple paint"]
        overrides = {"bowl": {"location": bowl}}
        if i in (2, 7):
            overrides["stirrer"] = {"location": "table"}
        variations.append(_var(i, golden, overrides=overrides))
    return {
        "id": "mix-paint",
        "horizon": "medium",
        "subject": SUBJECTS["mix-paint"],
        "text": "Your task is to make purple paint by mixing red paint and blue paint in the bowl. "
                "When you are done, focus on the purple paint.",
        "start": "hallway",
        "focus_requires": {"name": "purple paint"},
        "subgoals": [
            {"desc": "red paint in the bowl", "weight": 25,
             "pred": {"kind": "in", "object": "red paint", "container": "bowl"}},
            {"desc": "blue paint in the bowl", "weight": 25,
             "pred": {"kind": "in", "object": "blue paint", "container": "bowl"}},
            {"desc": "purple paint exists", "weight": 25, "pred": {"kind": "exists", "object": "purple paint"}},
            {"desc": "focus on the purple paint", "weight": 25, "pred": {"kind": "focus", "object": "purple paint"}},
        ],
        "variations": variations,
    }


STOVE_GOLDEN = ["go kitchen", "pour water into pot", "put pot on stove", "activate stove",
                "look around", "look around", "look around"]
HOT_PLATE_GOLDEN = ["go kitchen", "pour water into pot", "pick up pot", "go hallway", "go workshop",
                    "put pot on hot plate", "activate hot plate", "look around", "look around", "look around"]


def _boil_water() -> dict:
    variations = []
    for i in range(8):
        overrides: dict = {}
        golden = list(STOVE_GOLDEN)
        remove: list[str] = []
        if i in (1, 6):
            overrides["pot"] = {"location": "cupboard"}
            golden = ["go kitchen", "open cupboard", "pick up pot", "pour water into pot", "put pot on stove",
                      "activate stove", "look around", "look around", "look around"]
        if i == 4:
            remove = ["stove"]
            golden = list(HOT_PLATE_GOLDEN)
        if i in (3, 7):
            overrides["thermometer"] = {"location": "kitchen"}
        variations.append(_var(i, golden, overrides=overrides, remove=remove))
    variations.append(_var(8, list(HOT_PLATE_GOLDEN), overrides={"stove": {"broken": True}},
                           note="fault injection: the stove is broken"))
    variations.append(_var(9, list(HOT_PLATE_GOLDEN), remove=["stove"], note="equipment removed"))
    return {
        "id": "boil-water",
        "horizon": "long",
        "subject": SUBJECTS["boil-water"],
        "text": "Your task is to boil water.",
        "start": "hallway",
        "subgoals": [
            {"desc": "water in the pot", "weight": 25, "pred": {"kind": "in", "object": "water", "container": "pot"}},
            {"desc": "water on an active heater", "weight": 25, "pred": {"kind": "heated", "object": "water"}},
            {"desc": "water is hot", "weight": 25, "pred": {"kind": "phase", "object": "water", "phase": "hot"}},
            {"desc": "water is boiling", "weight": 25,
             "pred": {"kind": "phase", "object": "water", "phase": "boiling"}},
        ],
        "variations": variations,
    }


def _grow_plant() -> dict:
    variations = []
    for i in range(8):
        overrides: dict = {}
        golden = ["go greenhouse"]
        if i in (1, 5):
            overrides["seed jar"] = {"open": False}
            golden.append("open seed jar")
        golden.append("put seed in flower pot")
        if i in (2, 6):
            overrides["watering can"] = {"location": "kitchen"}
            golden = ["go kitchen", "pick up watering can", "go hallway"] + golden
        golden += ["pour rain water into flower pot", "look around", "look around", "look around"]
        variations.append(_var(i, golden, overrides=overrides))
    return {
        "id": "grow-plant",
        "horizon": "long",
        "subject": SUBJECTS["grow-plant"],
        "text": "Your task is to grow a plant from the seed in the greenhouse. Plant the seed in the flower pot "
                "and water it.",
        "start": "hallway",
        "subgoals": [
            {"desc": "seed in the flower pot", "weight": 20,
             "pred": {"kind": "in", "object": "seed", "container": "flower pot"}},
            {"desc": "rain water in the flower pot", "weight": 20,
             "pred": {"kind": "in", "object": "rain water", "container": "flower pot"}},
            {"desc": "seed has sprouted", "weight": 30, "pred": {"kind": "stage", "object": "seed", "stage": "sprout"}},
            {"desc": "seed is a grown plant", "weight": 30,
             "pred": {"kind": "stage", "object": "seed", "stage": "plant"}},
        ],
        "variations": variations,
    }


def default_world() -> WorldDef:
    return WorldDef({
        "name": "microlab",
        "rooms": list(ROOMS),
        "doors": [list(d) for d in DOORS],
        "objects": _objects(),
        "reactions": [{"inputs": ["red paint", "blue paint"], "output": "purple paint"}],
        "tasks": [_find_living(), _find_non_living(), _use_thermometer(), _mix_paint(), _boil_water(),
                  _grow_plant()],
    })
