"""MicroLab: a small deterministic laboratory text world.

Tasks are ordered lists of subgoal predicates with weights summing to 100.
The score is the total weight of subgoals completed in order, so a task with
four equal subgoals reads 75 after the third one.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .base import Grammar, StepAfterDone, StepResult, TextEnv, UnknownVariation

COMMANDS = [
    "look around",
    "go {location}",
    "open {object}",
    "close {object}",
    "pick up {object}",
    "put {object} in {object}",
    "put {object} on {object}",
    "pour {object} into {object}",
    "activate {object}",
    "deactivate {object}",
    "focus on {object}",
    "use {object} on {object}",
]

CANT = "You can't do that."
NOT_UNDERSTOOD = "I don't understand that."
AGENT = "agent"

OBJECT_DEFAULTS: dict[str, Any] = {
    "etype": "OBJ",
    "location": None,
    "container": False,
    "surface": False,
    "openable": False,
    "open": True,
    "fixed": False,
    "device": False,
    "heater": False,
    "broken": False,
    "active": False,
    "substance": False,
    "hydrating": False,
    "living": False,
    "tool": None,
    "phases": None,
    "heat": 0,
    "stages": None,
    "growth": 0,
}


class WorldDefError(ValueError):
    pass


@dataclass
class WorldDef:
    """Declarative world: rooms, doors, objects, reactions and tasks (see README for the schema)."""

    data: dict

    def __post_init__(self):
        self.validate()

    @property
    def rooms(self) -> list[str]:
        return list(self.data["rooms"])

    @property
    def tasks(self) -> dict[str, dict]:
        return {t["id"]: t for t in self.data["tasks"]}

    def task(self, task_id: str) -> dict:
        try:
            return self.tasks[task_id]
        except KeyError:
            raise WorldDefError(f"unknown task {task_id!r}") from None

    def variation(self, task_id: str, variation: int) -> dict:
        for v in self.task(task_id)["variations"]:
            if v["id"] == variation:
                return v
        raise UnknownVariation(f"task {task_id!r} has no variation {variation}")

    def variation_ids(self, task_id: str, split: str | None = None) -> list[int]:
        return [v["id"] for v in self.task(task_id)["variations"] if split is None or v.get("split") == split]

    def lexicon(self) -> dict[str, str]:
        """Entity-type tag for every room and object name."""
        lex = {r: "LOC" for r in self.data["rooms"]}
        for obj in self.data["objects"]:
            lex[obj["name"]] = obj.get("etype", "OBJ")
        return lex

    def validate(self) -> None:
        rooms = set(self.data.get("rooms", []))
        if not rooms:
            raise WorldDefError("world has no rooms")
        names = [o["name"] for o in self.data.get("objects", [])]
        if len(names) != len(set(names)):
            raise WorldDefError("duplicate object names")
        valid_locs = rooms | set(names) | {AGENT, None}
        for obj in self.data["objects"]:
            if obj.get("location") not in valid_locs:
                raise WorldDefError(f"object {obj['name']!r} has invalid location {obj.get('location')!r}")
        for a, b in self.data.get("doors", []):
            if a not in rooms or b not in rooms:
                raise WorldDefError(f"door {a}-{b} joins unknown rooms")
        for task in self.data.get("tasks", []):
            total = sum(sg["weight"] for sg in task["subgoals"])
            if total != 100:
                raise WorldDefError(f"task {task['id']!r} subgoal weights sum to {total}, not 100")
            for v in task["variations"]:
                for name in list(v.get("overrides", {})) + list(v.get("remove", [])):
                    if name not in names:
                        raise WorldDefError(f"variation {task['id']}/{v['id']} names unknown object {name!r}")
                for name, fields in v.get("overrides", {}).items():
                    if "location" in fields and fields["location"] not in valid_locs:
                        raise WorldDefError(f"variation {task['id']}/{v['id']} moves {name!r} nowhere valid")

    @classmethod
    def load(cls, path: "str | Path") -> "WorldDef":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def save(self, path: "str | Path") -> None:
        Path(path).write_text(json.dumps(self.data, indent=1, sort_keys=True) + "\n", encoding="utf-8")


class MicroLab(TextEnv):
    def __init__(self, world: WorldDef, task: str):
        self.world = world
        self.task_id = task
        self.task = world.task(task)
        self._grammar = Grammar(COMMANDS)
        self.done = True
        self.score = 0

    # -- contract -----------------------------------------------------------

    def reset(self, variation: int) -> tuple[str, str]:
        var = self.world.variation(self.task_id, variation)
        removed = set(var.get("remove", []))
        self.objects: dict[str, dict] = {}
        for obj in self.world.data["objects"]:
            if obj["name"] in removed:
                continue
            state = {**OBJECT_DEFAULTS, **copy.deepcopy(obj)}
            state.update(copy.deepcopy(var.get("overrides", {}).get(obj["name"], {})))
            self.objects[obj["name"]] = state
        self.masked = set(var.get("mask_rooms", []))
        self.room = var.get("start", self.task.get("start", self.world.rooms[0]))
        self.focus: str | None = None
        self.events: set[tuple[str, ...]] = set()
        self.subgoal = 0
        self.score = 0
        self.done = False
        self.failed = False
        self.variation = variation
        return self.describe(), self.task["text"]

    def step(self, command: str) -> StepResult:
        if self.done:
            raise StepAfterDone("episode is over; call reset()")
        parsed = self._grammar.parse(command.strip().lower())
        if parsed is None:
            return StepResult(NOT_UNDERSTOOD, 0, False, self.score)
        template, args = parsed
        verb = "_".join(w for w in template.split() if not w.startswith("{"))
        handler = getattr(self, "_cmd_" + verb)
        self._tick()  # time passes first, so observations show the state after it
        observation = handler(*args)
        reward = self._advance()
        return StepResult(observation, reward, self.done, self.score)

    def action_grammar(self) -> Grammar:
        return self._grammar

    def golden_trajectory(self, variation: int) -> list[str]:
        return list(self.world.variation(self.task_id, variation)["golden"])

    # -- world queries ------------------------------------------------------

    def room_of(self, name: str) -> str | None:
        loc = self.objects[name]["location"]
        seen = set()
        while loc is not None and loc not in self.world.rooms and loc != AGENT:
            if loc in seen:
                return None
            seen.add(loc)
            loc = self.objects[loc]["location"] if loc in self.objects else None
        return loc

    def visible(self, name: str) -> bool:
        if name not in self.objects or self.objects[name]["location"] is None:
            return False
        loc = self.objects[name]["location"]
        while loc not in self.world.rooms and loc != AGENT:
            parent = self.objects.get(loc)
            if parent is None or not parent["open"]:
                return False
            loc = parent["location"]
            if loc is None:
                return False
        return loc == AGENT or loc == self.room

    def contents(self, name: str) -> list[str]:
        return [n for n, o in self.objects.items() if o["location"] == name]

    def neighbors(self, room: str) -> list[str]:
        out = []
        for a, b in self.world.data["doors"]:
            other = b if a == room else a if b == room else None
            if other and other not in self.masked and other not in out:
                out.append(other)
        return out

    def phase(self, name: str) -> str | None:
        phases = self.objects[name]["phases"]
        if not phases:
            return None
        current = phases[0][1]
        for threshold, label in phases:
            if self.objects[name]["heat"] >= threshold:
                current = label
        return current

    def stage(self, name: str) -> str | None:
        stages = self.objects[name]["stages"]
        if not stages:
            return None
        current = stages[0][1]
        for threshold, label in stages:
            if self.objects[name]["growth"] >= threshold:
                current = label
        return current

    def describe(self) -> str:
        room = self.room
        lines = [f"You are in the {room}."]
        for name, obj in self.objects.items():
            if obj["location"] == room:
                lines.append(f"The {name} is in the {room}.")
        for name, obj in self.objects.items():
            if not self.visible(name):
                continue
            if obj["container"] and obj["open"]:
                inside = self.contents(name)
                if inside and obj["surface"]:
                    lines.extend(f"The {i} is on the {name}." for i in inside)
                elif inside:
                    lines.append(f"The {name} contains {_join(inside)}.")
            if obj["openable"]:
                lines.append(f"The {name} is {'open' if obj['open'] else 'closed'}.")
            if obj["device"]:
                state = "broken" if obj["broken"] else "on" if obj["active"] else "off"
                lines.append(f"The {name} is {state}.")
            if obj["phases"]:
                lines.append(f"The {name} is {self.phase(name)}.")
            if obj["stages"] and obj["growth"] > 0:
                lines.append(f"The {name} is now a {self.stage(name)}.")
            if obj["location"] == AGENT:
                lines.append(f"The {name} is in your inventory.")
        exits = self.neighbors(room)
        if exits:
            lines.append(f"The {room} connects to {_join(exits)}.")
        return " ".join(lines)

    # -- commands -----------------------------------------------------------

    def _cmd_look_around(self) -> str:
        return self.describe()

    def _cmd_go(self, target: str) -> str:
        if target == self.room:
            return f"You are already in the {target}."
        if target not in self.neighbors(self.room):
            return CANT
        self.room = target
        return f"You move to the {target}. " + self.describe()

    def _cmd_open(self, name: str) -> str:
        obj = self._get(name)
        if obj is None or not obj["openable"]:
            return CANT
        if obj["open"]:
            return f"The {name} is already open."
        obj["open"] = True
        inside = [i for i in self.contents(name)]
        tail = f" The {name} contains {_join(inside)}." if inside else ""
        return f"You open the {name}.{tail}"

    def _cmd_close(self, name: str) -> str:
        obj = self._get(name)
        if obj is None or not obj["openable"]:
            return CANT
        if not obj["open"]:
            return f"The {name} is already closed."
        obj["open"] = False
        return f"You close the {name}."

    def _cmd_pick_up(self, name: str) -> str:
        obj = self._get(name)
        if obj is None or obj["fixed"] or obj["substance"] or obj["location"] == AGENT:
            return CANT
        obj["location"] = AGENT
        return f"You pick up the {name}. The {name} is in your inventory."

    def _put(self, name: str, target: str, prep: str) -> str:
        obj, dest = self._get(name), self._get(target)
        if obj is None or dest is None or name == target or obj["fixed"] or obj["substance"]:
            return CANT
        if not dest["container"] or not dest["open"] or self._inside(target, name):
            return CANT
        obj["location"] = target
        return f"You put the {name} {prep} the {target}. The {name} is {prep} the {target}."

    def _cmd_put_in(self, name: str, target: str) -> str:
        return self._put(name, target, "in")

    def _cmd_put_on(self, name: str, target: str) -> str:
        return self._put(name, target, "on")

    def _cmd_pour_into(self, name: str, target: str) -> str:
        src, dest = self._get(name), self._get(target)
        if src is None or dest is None or name == target or not dest["container"] or not dest["open"]:
            return CANT
        if src["substance"]:
            moved = [name]
        elif src["container"]:
            moved = [i for i in self.contents(name) if self.objects[i]["substance"]]
        else:
            moved = []
        if not moved:
            return CANT
        for m in moved:
            self.objects[m]["location"] = target
        return f"You pour the {_join(moved)} into the {target}. The {target} contains {_join(self.contents(target))}."

    def _cmd_activate(self, name: str) -> str:
        obj = self._get(name)
        if obj is None or not obj["device"]:
            return CANT
        if obj["broken"]:
            return f"The {name} is broken."
        if obj["active"]:
            return f"The {name} is already on."
        obj["active"] = True
        return f"The {name} is now on."

    def _cmd_deactivate(self, name: str) -> str:
        obj = self._get(name)
        if obj is None or not obj["device"]:
            return CANT
        if obj["broken"]:
            return f"The {name} is broken."
        if not obj["active"]:
            return f"The {name} is already off."
        obj["active"] = False
        return f"The {name} is now off."

    def _cmd_focus_on(self, name: str) -> str:
        obj = self._get(name)
        if obj is None:
            return CANT
        self.focus = name
        rule = self.task.get("focus_requires")
        if rule is not None and not _matches(obj, name, rule):
            self.failed = True
            self.done = True
            return f"You focus on the {name}. That is not what the task asked for. The task has failed."
        return f"You focus on the {name}."

    def _cmd_use_on(self, tool: str, target: str) -> str:
        t, obj = self._get(tool), self._get(target)
        if t is None or obj is None or not t["tool"]:
            return CANT
        kind = t["tool"]
        if kind == "thermometer":
            self.events.add(("used", tool, target))
            degrees = 20 + 25 * obj["heat"] if obj["phases"] else 20
            return f"The {tool} reads {min(degrees, 100)} degrees."
        if kind == "stirrer":
            for reaction in self.world.data.get("reactions", []):
                inside = set(self.contents(target))
                if set(reaction["inputs"]) <= inside and reaction["output"] in self.objects:
                    for name in reaction["inputs"]:
                        self.objects[name]["location"] = None
                    self.objects[reaction["output"]]["location"] = target
                    self.events.add(("used", tool, target))
                    return (f"You stir the {target}. The {_join(reaction['inputs'])} mix into "
                            f"{reaction['output']}. The {target} contains {reaction['output']}.")
            return f"You stir the {target}. Nothing happens."
        return CANT

    # -- dynamics -----------------------------------------------------------

    def _get(self, name: str) -> dict | None:
        return self.objects[name] if self.visible(name) else None

    def _inside(self, outer: str, inner: str) -> bool:
        loc = self.objects[outer]["location"]
        while loc is not None and loc in self.objects:
            if loc == inner:
                return True
            loc = self.objects[loc]["location"]
        return False

    def _heated(self, name: str) -> bool:
        loc = self.objects[name]["location"]
        hops = 0
        while loc is not None and loc in self.objects and hops < 3:
            holder = self.objects[loc]
            if holder["heater"] and holder["active"] and not holder["broken"]:
                return True
            loc = holder["location"]
            hops += 1
        return False

    def _tick(self) -> None:
        for name, obj in self.objects.items():
            if obj["location"] is None:
                continue
            if obj["phases"] and self._heated(name):
                obj["heat"] = min(obj["heat"] + 1, obj["phases"][-1][0])
            if obj["stages"] and obj["location"] in self.objects:
                wet = any(self.objects[i]["hydrating"] for i in self.contents(obj["location"]))
                if wet:
                    obj["growth"] = min(obj["growth"] + 1, obj["stages"][-1][0])

    def _advance(self) -> int:
        if self.failed:
            return 0
        reward = 0
        subgoals = self.task["subgoals"]
        while self.subgoal < len(subgoals) and self.holds(subgoals[self.subgoal]["pred"]):
            reward += subgoals[self.subgoal]["weight"]
            self.subgoal += 1
        self.score += reward
        if self.subgoal == len(subgoals):
            self.done = True
        return reward

    def holds(self, pred: dict) -> bool:
        kind = pred["kind"]
        target = self.focus if pred.get("object") == "@focus" else pred.get("object")
        if kind == "at":
            return self.room == pred["room"]
        if target is None or (kind != "exists" and target not in self.objects):
            return False
        if kind == "focus":
            if pred.get("object") == "@focus":
                return self.focus is not None and _matches(self.objects[self.focus], self.focus,
                                                           pred.get("requires", {}))
            return self.focus == target
        if kind == "holding":
            return self.objects[target]["location"] == AGENT
        if kind == "in":
            return self.objects[target]["location"] == pred["container"]
        if kind == "heated":
            return self._heated(target)
        if kind == "phase":
            labels = [label for _, label in self.objects[target]["phases"]]
            return labels.index(self.phase(target)) >= labels.index(pred["phase"])
        if kind == "stage":
            labels = [label for _, label in self.objects[target]["stages"]]
            return labels.index(self.stage(target)) >= labels.index(pred["stage"])
        if kind == "exists":
            return target in self.objects and self.objects[target]["location"] is not None
        if kind == "used":
            return ("used", pred["tool"], target) in self.events
        raise WorldDefError(f"unknown predicate kind {kind!r}")


def _matches(obj: dict, name: str, rule: dict) -> bool:
    if "name" in rule and rule["name"] != name:
        return False
    if "living" in rule and bool(obj["living"]) != rule["living"]:
        return False
    if "portable" in rule and (not obj["fixed"] and not obj["substance"]) != rule["portable"]:
        return False
    return True


def _join(items: list[str]) -> str:
    items = list(items)
    if len(items) <= 1:
        return "".join(items)
    return ", ".join(items[:-1]) + " and " + items[-1]
