"""Scenario data model and configuration parsing.

A scenario is an immutable game definition: a graph of scenes holding
items (interactable state machines) and tools (collectibles that may
upgrade through states), plus craft recipes, annotated key steps, and a
goal transition that ends the game.

Configuration files are YAML.  A document is either a mapping with
``name``/``start_scene``/``scenes`` (plus optional ``recipes``,
``key_steps`` and ``oracle_chain`` blocks) or a bare list of scenes, in
which case the scenario name comes from the caller and play starts in
the first scene.  Per-difficulty text variants may live inline (a text
field written as a ``{default, easy, normal, hard}`` mapping) or in
sibling files suffixed ``_easy`` / ``_normal`` / ``_hard``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .actions import Action, ActionParseError, parse_action

DIFFICULTIES = ("easy", "normal", "hard")

EFFECT_KINDS = (
    "change_self_state",
    "change_item_state",
    "change_tool_state",
    "reveal_item",
    "reveal_tool",
    "collect_tool",
    "consume_tool",
    "game_end",
)

_SCENARIO_KEYS = {"name", "start_scene", "scenes", "recipes", "key_steps", "oracle_chain"}
_SCENE_KEYS = {"name", "desc", "scene_relations", "items", "tools"}
_ITEM_KEYS = {"name", "visible", "position", "feedback", "states"}
_ITEM_STATE_KEYS = {"desc", "transitions"}
_TRANSITION_KEYS = {"wait_for", "trigger", "reward"}
_TOOL_KEYS = {"name", "visible", "position", "feedback", "states"}
_TOOL_STATE_KEYS = {"desc", "wait_for", "apply_to"}
_RECIPE_KEYS = {"inputs", "output", "consume_inputs", "reward"}
_KEY_STEP_KEYS = {"id", "scene", "action", "hint"}
_CONNECTOR_KEYS = {"target", "one_way"}
_LEVELED_KEYS = {"default", "easy", "normal", "hard"}

_FORBIDDEN_NAME_CHARS = set("(),\n")


class ScenarioError(ValueError):
    """Configuration cannot be parsed into a consistent scenario."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


# --------------------------------------------------------------------------
# Value types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LeveledText:
    """A string with optional per-difficulty overrides."""

    default: str
    easy: str | None = None
    normal: str | None = None
    hard: str | None = None

    def resolve(self, difficulty: str) -> str:
        override = getattr(self, difficulty, None)
        return override if override is not None else self.default


@dataclass(frozen=True)
class TriggerEvent:
    """What fires a transition: click, apply(tool) or input(expected)."""

    kind: str  # click | apply | input
    arg: str | None = None

    def key(self) -> tuple:
        return (self.kind, self.arg.casefold() if self.arg else None)

    def render(self) -> str:
        return self.kind if self.arg is None else f"{self.kind}, {self.arg}"


@dataclass(frozen=True)
class Effect:
    kind: str
    target: str | None = None
    state_index: int | None = None


@dataclass(frozen=True)
class Transition:
    event: TriggerEvent
    effects: tuple[Effect, ...]
    reward: LeveledText | None = None


@dataclass(frozen=True)
class ItemState:
    desc: LeveledText
    transitions: tuple[Transition, ...] = ()


@dataclass(frozen=True)
class Item:
    name: str
    states: tuple[ItemState, ...]
    location: str | None = None
    visible: bool = True
    position: str | None = None
    feedback: LeveledText | None = None


@dataclass(frozen=True)
class WaitFor:
    """One tool that advances the owning tool to its next state."""

    tool: str
    consume: bool = True


@dataclass(frozen=True)
class ToolState:
    desc: LeveledText
    wait_for: tuple[WaitFor, ...] = ()
    apply_to: tuple[str, ...] = ()


@dataclass(frozen=True)
class Tool:
    name: str
    states: tuple[ToolState, ...]
    location: str | None = None  # None for craft outputs
    visible: bool = True
    position: str | None = None
    feedback: LeveledText | None = None


@dataclass(frozen=True)
class Connector:
    target: str
    one_way: bool = False


@dataclass(frozen=True)
class Scene:
    name: str
    desc: LeveledText
    connectors: tuple[tuple[str, Connector], ...] = ()  # (label, connector), ordered
    items: tuple[Item, ...] = ()
    tools: tuple[Tool, ...] = ()

    def connector_map(self) -> dict[str, Connector]:
        return dict(self.connectors)


@dataclass(frozen=True)
class CraftRecipe:
    inputs: tuple[tuple[str, int], tuple[str, int]]  # (tool name, state index), unordered
    output: Tool
    consume_inputs: tuple[bool, bool] = (True, True)
    reward: LeveledText | None = None

    def pair_key(self) -> frozenset:
        return frozenset(self.inputs)


@dataclass(frozen=True)
class KeyStep:
    id: str
    scene: str
    action: Action
    hint_text: str


@dataclass(frozen=True)
class ScenarioStats:
    scenes: int
    items: int
    tools: int  # declared tools plus craftable outputs
    key_steps: int


@dataclass
class Scenario:
    name: str
    start_scene: str
    scenes: tuple[Scene, ...]
    recipes: tuple[CraftRecipe, ...] = ()
    key_steps: tuple[KeyStep, ...] = ()
    annotated_chain: tuple[tuple[str, Action], ...] | None = None

    scenes_by_name: dict[str, Scene] = field(init=False, repr=False, compare=False)
    items_by_name: dict[str, Item] = field(init=False, repr=False, compare=False)
    tools_by_name: dict[str, Tool] = field(init=False, repr=False, compare=False)
    recipes_by_pair: dict[frozenset, CraftRecipe] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.scenes_by_name = {s.name: s for s in self.scenes}
        self.items_by_name = {i.name: i for s in self.scenes for i in s.items}
        self.tools_by_name = {t.name: t for s in self.scenes for t in s.tools}
        for recipe in self.recipes:
            self.tools_by_name.setdefault(recipe.output.name, recipe.output)
        self.recipes_by_pair = {r.pair_key(): r for r in self.recipes}

    # -- lookups -----------------------------------------------------------

    def find_item(self, name: str) -> Item | None:
        return self.items_by_name.get(_fold(name)) or _ci_get(self.items_by_name, name)

    def find_tool(self, name: str) -> Tool | None:
        return self.tools_by_name.get(_fold(name)) or _ci_get(self.tools_by_name, name)

    def find_scene(self, name: str) -> Scene | None:
        return self.scenes_by_name.get(_fold(name)) or _ci_get(self.scenes_by_name, name)

    def object_names(self) -> set[str]:
        return (
            set(self.scenes_by_name)
            | set(self.items_by_name)
            | set(self.tools_by_name)
        )

    def stats(self) -> ScenarioStats:
        return ScenarioStats(
            scenes=len(self.scenes),
            items=len(self.items_by_name),
            tools=len(self.tools_by_name),
            key_steps=len(self.key_steps),
        )

    def fingerprint(self) -> str:
        digest = hashlib.sha256(serialize_scenario(self).encode("utf-8"))
        return digest.hexdigest()[:16]


def _fold(name: str) -> str:
    return name.strip()


def _ci_get(mapping: dict, name: str):
    wanted = name.strip().casefold()
    for key, value in mapping.items():
        if key.casefold() == wanted:
            return value
    return None


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------


def parse_scenario(source: str, name: str | None = None) -> Scenario:
    """Parse a configuration document into a resolved Scenario.

    Raises ScenarioError naming the offending path on syntax errors,
    unknown fields, duplicate names, and dangling references.
    """
    try:
        doc = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "document"
        raise ScenarioError(where, f"syntax error: {exc}") from exc
    return scenario_from_config(doc, name=name)


def scenario_from_config(doc, name: str | None = None) -> Scenario:
    if isinstance(doc, list):
        doc = {"scenes": doc}
    if not isinstance(doc, dict):
        raise ScenarioError("document", "expected a mapping or a list of scenes")
    _check_keys(doc, _SCENARIO_KEYS, "document")

    scenes_doc = doc.get("scenes")
    if not isinstance(scenes_doc, list) or not scenes_doc:
        raise ScenarioError("scenes", "expected a non-empty list of scenes")

    scenes = tuple(
        _parse_scene(entry, f"scenes[{i}]") for i, entry in enumerate(scenes_doc)
    )

    scenario_name = str(doc.get("name") or name or "scenario")
    start_scene = str(doc.get("start_scene") or scenes[0].name)

    recipes = tuple(
        _parse_recipe(entry, f"recipes[{i}]")
        for i, entry in enumerate(doc.get("recipes") or [])
    )
    key_steps = tuple(
        _parse_key_step(entry, f"key_steps[{i}]")
        for i, entry in enumerate(doc.get("key_steps") or [])
    )
    annotated = _parse_annotated_chain(doc.get("oracle_chain"))

    scenario = Scenario(
        name=scenario_name,
        start_scene=start_scene,
        scenes=scenes,
        recipes=recipes,
        key_steps=key_steps,
        annotated_chain=annotated,
    )
    _resolve_references(scenario)
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    """Load a scenario file, merging per-difficulty sibling files if present.

    ``foo_easy.yaml`` / ``foo_normal.yaml`` / ``foo_hard.yaml`` are treated
    as one scenario whose texts differ by difficulty; any one of them may
    be passed in.  A lone file loads as-is.
    """
    path = Path(path)
    family = _difficulty_family(path)
    if family:
        return _merge_difficulty_files(family)
    return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem)


def _difficulty_family(path: Path) -> dict[str, Path] | None:
    stem = path.stem
    for level in DIFFICULTIES:
        suffix = f"_{level}"
        if stem.endswith(suffix):
            base = stem[: -len(suffix)]
            family = {
                lvl: path.with_name(f"{base}_{lvl}{path.suffix}")
                for lvl in DIFFICULTIES
                if path.with_name(f"{base}_{lvl}{path.suffix}").exists()
            }
            if len(family) >= 2:
                return family
    return None


def _merge_difficulty_files(family: dict[str, Path]) -> Scenario:
    docs = {}
    for level, file_path in family.items():
        try:
            docs[level] = yaml.safe_load(file_path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ScenarioError(str(file_path), f"syntax error: {exc}") from exc
    base_level = "normal" if "normal" in docs else sorted(docs)[0]
    merged = _merge_texts(docs[base_level], docs, path="document")
    base_path = next(iter(family.values()))
    base_name = base_path.stem.rsplit("_", 1)[0]
    return scenario_from_config(merged, name=base_name)


_TEXT_FIELDS = {"desc", "reward", "feedback"}


def _merge_texts(base, docs: dict, path: str):
    """Rebuild the base config tree with per-level overrides on text fields.

    Non-text structure must be identical across the sibling files.
    """
    if isinstance(base, dict):
        out = {}
        for key, value in base.items():
            subdocs = {}
            for level, doc in docs.items():
                if not isinstance(doc, dict) or key not in doc:
                    raise ScenarioError(path, f"difficulty files disagree on field {key!r}")
                subdocs[level] = doc[key]
            if key in _TEXT_FIELDS and isinstance(value, str):
                texts = {lvl: subdocs[lvl] for lvl in subdocs if isinstance(subdocs[lvl], str)}
                leveled = {"default": value}
                leveled.update({lvl: txt for lvl, txt in texts.items() if txt != value})
                out[key] = value if len(leveled) == 1 else leveled
            else:
                out[key] = _merge_texts(value, subdocs, f"{path}.{key}")
        return out
    if isinstance(base, list):
        for level, doc in docs.items():
            if not isinstance(doc, list) or len(doc) != len(base):
                raise ScenarioError(path, "difficulty files disagree on list structure")
        return [
            _merge_texts(item, {lvl: docs[lvl][i] for lvl in docs}, f"{path}[{i}]")
            for i, item in enumerate(base)
        ]
    for level, doc in docs.items():
        if doc != base:
            raise ScenarioError(path, f"difficulty files disagree on value {base!r} vs {doc!r}")
    return base


# -- block parsers ----------------------------------------------------------


def _check_keys(block: dict, allowed: set[str], path: str) -> None:
    for key in block:
        if key not in allowed:
            raise ScenarioError(f"{path}.{key}", "unknown field")


def _parse_name(block: dict, path: str) -> str:
    raw = block.get("name")
    if not isinstance(raw, str) or not raw.strip():
        raise ScenarioError(f"{path}.name", "missing or empty name")
    name = raw.strip()
    bad = _FORBIDDEN_NAME_CHARS & set(name)
    if bad:
        raise ScenarioError(f"{path}.name", f"name contains forbidden characters {sorted(bad)}")
    return name


def _parse_leveled(value, path: str, required: bool = True) -> LeveledText | None:
    if value is None:
        if required:
            raise ScenarioError(path, "missing text")
        return None
    if isinstance(value, str):
        if not value.strip() and required:
            raise ScenarioError(path, "empty text")
        return LeveledText(default=value)
    if isinstance(value, dict):
        _check_keys(value, _LEVELED_KEYS, path)
        default = value.get("default")
        if not isinstance(default, str) or not default.strip():
            raise ScenarioError(f"{path}.default", "leveled text requires a non-empty default")
        return LeveledText(
            default=default,
            easy=value.get("easy"),
            normal=value.get("normal"),
            hard=value.get("hard"),
        )
    raise ScenarioError(path, f"expected text or leveled mapping, got {type(value).__name__}")


def _parse_scene(block, path: str) -> Scene:
    if not isinstance(block, dict):
        raise ScenarioError(path, "expected a scene mapping")
    _check_keys(block, _SCENE_KEYS, path)
    name = _parse_name(block, path)
    desc = _parse_leveled(block.get("desc"), f"{path}.desc")

    connectors: list[tuple[str, Connector]] = []
    relations = block.get("scene_relations") or {}
    if not isinstance(relations, dict):
        raise ScenarioError(f"{path}.scene_relations", "expected a label-to-scene mapping")
    for label, target in relations.items():
        cpath = f"{path}.scene_relations[{label}]"
        if isinstance(target, str):
            connectors.append((str(label), Connector(target=target.strip())))
        elif isinstance(target, dict):
            _check_keys(target, _CONNECTOR_KEYS, cpath)
            if "target" not in target:
                raise ScenarioError(cpath, "connector mapping requires a target")
            connectors.append(
                (str(label), Connector(str(target["target"]).strip(), bool(target.get("one_way", False))))
            )
        else:
            raise ScenarioError(cpath, "connector must be a scene name or a mapping")

    items = tuple(
        _parse_item(entry, f"{path}.items[{i}]", location=name)
        for i, entry in enumerate(block.get("items") or [])
    )
    tools = tuple(
        _parse_tool(entry, f"{path}.tools[{i}]", location=name)
        for i, entry in enumerate(block.get("tools") or [])
    )
    return Scene(name=name, desc=desc, connectors=tuple(connectors), items=items, tools=tools)


def _parse_item(block, path: str, location: str | None) -> Item:
    if not isinstance(block, dict):
        raise ScenarioError(path, "expected an item mapping")
    _check_keys(block, _ITEM_KEYS, path)
    name = _parse_name(block, path)
    states_doc = block.get("states")
    if not isinstance(states_doc, list) or not states_doc:
        raise ScenarioError(f"{path}.states", "item needs at least one state")
    states = tuple(
        _parse_item_state(entry, f"{path}.states[{i}]") for i, entry in enumerate(states_doc)
    )
    return Item(
        name=name,
        states=states,
        location=location,
        visible=bool(block.get("visible", True)),
        position=block.get("position"),
        feedback=_parse_leveled(block.get("feedback"), f"{path}.feedback", required=False),
    )


def _parse_item_state(block, path: str) -> ItemState:
    if not isinstance(block, dict):
        raise ScenarioError(path, "expected a state mapping")
    _check_keys(block, _ITEM_STATE_KEYS, path)
    desc = _parse_leveled(block.get("desc"), f"{path}.desc")
    transitions = tuple(
        _parse_transition(entry, f"{path}.transitions[{i}]")
        for i, entry in enumerate(block.get("transitions") or [])
    )
    return ItemState(desc=desc, transitions=transitions)


def _parse_transition(block, path: str) -> Transition:
    if not isinstance(block, dict):
        raise ScenarioError(path, "expected a transition mapping")
    _check_keys(block, _TRANSITION_KEYS, path)
    events = block.get("wait_for")
    if not isinstance(events, list) or len(events) != 1:
        raise ScenarioError(f"{path}.wait_for", "transition takes exactly one trigger event")
    event = _parse_event(events[0], f"{path}.wait_for[0]")
    effects_doc = block.get("trigger")
    if not isinstance(effects_doc, list) or not effects_doc:
        raise ScenarioError(f"{path}.trigger", "transition needs at least one effect")
    effects = tuple(
        _parse_effect(entry, f"{path}.trigger[{i}]") for i, entry in enumerate(effects_doc)
    )
    reward = _parse_leveled(block.get("reward"), f"{path}.reward", required=False)
    return Transition(event=event, effects=effects, reward=reward)


def _parse_event(raw, path: str) -> TriggerEvent:
    if not isinstance(raw, str):
        raise ScenarioError(path, "trigger event must be a string")
    parts = [p.strip() for p in raw.split(",")]
    kind = parts[0]
    if kind == "click":
        if len(parts) != 1:
            raise ScenarioError(path, "click takes no argument")
        return TriggerEvent("click")
    if kind == "apply":
        if len(parts) < 2:
            raise ScenarioError(path, "apply event needs a tool name")
        return TriggerEvent("apply", ", ".join(parts[1:]))
    if kind == "input":
        if len(parts) < 2:
            raise ScenarioError(path, "input event needs an expected string")
        expected = "".join(parts[1:])
        if not expected.isalnum():
            raise ScenarioError(path, f"expected input {expected!r} must be digits and letters only")
        return TriggerEvent("input", expected)
    raise ScenarioError(path, f"unknown trigger event {kind!r}")


def _parse_effect(raw, path: str) -> Effect:
    if not isinstance(raw, str):
        raise ScenarioError(path, "effect must be a string")
    parts = [p.strip() for p in raw.split(",")]
    head = parts[0]
    if head == "game_end":
        if len(parts) != 1:
            raise ScenarioError(path, "game_end takes no arguments")
        return Effect("game_end")
    if head == "change_state":
        if len(parts) == 2:
            return Effect("change_self_state", state_index=_parse_index(parts[1], path))
        if len(parts) >= 4 and parts[1] in ("item", "tool"):
            kind = "change_item_state" if parts[1] == "item" else "change_tool_state"
            target = ", ".join(parts[2:-1])
            return Effect(kind, target=target, state_index=_parse_index(parts[-1], path))
        raise ScenarioError(path, f"malformed change_state effect {raw!r}")
    if head == "reveal":
        if len(parts) >= 3 and parts[1] in ("item", "tool"):
            kind = "reveal_item" if parts[1] == "item" else "reveal_tool"
            return Effect(kind, target=", ".join(parts[2:]))
        raise ScenarioError(path, f"malformed reveal effect {raw!r}")
    if head == "collect":
        if len(parts) < 2:
            raise ScenarioError(path, "collect needs a tool name")
        return Effect("collect_tool", target=", ".join(parts[1:]))
    if head == "consume":
        if len(parts) < 2:
            raise ScenarioError(path, "consume needs a tool name")
        return Effect("consume_tool", target=", ".join(parts[1:]))
    raise ScenarioError(path, f"unknown effect {head!r}")


def _parse_index(raw: str, path: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise ScenarioError(path, f"state index {raw!r} is not an integer") from None
    if value < 0:
        raise ScenarioError(path, "state index must be non-negative")
    return value


def _parse_tool(block, path: str, location: str | None) -> Tool:
    if not isinstance(block, dict):
        raise ScenarioError(path, "expected a tool mapping")
    _check_keys(block, _TOOL_KEYS, path)
    name = _parse_name(block, path)
    states_doc = block.get("states")
    if not isinstance(states_doc, list) or not states_doc:
        raise ScenarioError(f"{path}.states", "tool needs at least one state")
    states = tuple(
        _parse_tool_state(entry, f"{path}.states[{i}]") for i, entry in enumerate(states_doc)
    )
    return Tool(
        name=name,
        states=states,
        location=location,
        visible=bool(block.get("visible", True)),
        position=block.get("position"),
        feedback=_parse_leveled(block.get("feedback"), f"{path}.feedback", required=False),
    )


def _parse_tool_state(block, path: str) -> ToolState:
    if not isinstance(block, dict):
        raise ScenarioError(path, "expected a state mapping")
    _check_keys(block, _TOOL_STATE_KEYS, path)
    desc = _parse_leveled(block.get("desc"), f"{path}.desc")
    wait_for = []
    for i, entry in enumerate(block.get("wait_for") or []):
        wpath = f"{path}.wait_for[{i}]"
        if not isinstance(entry, str):
            raise ScenarioError(wpath, "wait_for entry must be a tool name")
        parts = [p.strip() for p in entry.split(",")]
        if len(parts) == 1:
            wait_for.append(WaitFor(tool=parts[0]))
        elif len(parts) == 2 and parts[1] == "keep":
            wait_for.append(WaitFor(tool=parts[0], consume=False))
        else:
            raise ScenarioError(wpath, f"malformed wait_for entry {entry!r}")
    apply_to = []
    for i, entry in enumerate(block.get("apply_to") or []):
        if not isinstance(entry, str) or not entry.strip():
            raise ScenarioError(f"{path}.apply_to[{i}]", "apply_to entry must be an object name")
        apply_to.append(entry.strip())
    return ToolState(desc=desc, wait_for=tuple(wait_for), apply_to=tuple(apply_to))


def _parse_recipe(block, path: str) -> CraftRecipe:
    if not isinstance(block, dict):
        raise ScenarioError(path, "expected a recipe mapping")
    _check_keys(block, _RECIPE_KEYS, path)
    inputs_doc = block.get("inputs")
    if not isinstance(inputs_doc, list) or len(inputs_doc) != 2:
        raise ScenarioError(f"{path}.inputs", "recipe takes exactly two input tools")
    inputs = []
    for i, entry in enumerate(inputs_doc):
        ipath = f"{path}.inputs[{i}]"
        if not isinstance(entry, str):
            raise ScenarioError(ipath, "input must be 'tool' or 'tool, state-index'")
        parts = [p.strip() for p in entry.split(",")]
        if len(parts) == 1:
            inputs.append((parts[0], 0))
        else:
            inputs.append((", ".join(parts[:-1]), _parse_index(parts[-1], ipath)))
    if inputs[0][0] == inputs[1][0]:
        raise ScenarioError(f"{path}.inputs", "recipe inputs must be two distinct tools")
    output_doc = block.get("output")
    if not isinstance(output_doc, dict):
        raise ScenarioError(f"{path}.output", "recipe output must be a tool definition")
    output = _parse_tool(output_doc, f"{path}.output", location=None)
    consume_doc = block.get("consume_inputs", [True, True])
    if not isinstance(consume_doc, list) or len(consume_doc) != 2:
        raise ScenarioError(f"{path}.consume_inputs", "expected a pair of booleans")
    return CraftRecipe(
        inputs=(inputs[0], inputs[1]),
        output=output,
        consume_inputs=(bool(consume_doc[0]), bool(consume_doc[1])),
        reward=_parse_leveled(block.get("reward"), f"{path}.reward", required=False),
    )


def _parse_key_step(block, path: str) -> KeyStep:
    if not isinstance(block, dict):
        raise ScenarioError(path, "expected a key step mapping")
    _check_keys(block, _KEY_STEP_KEYS, path)
    step_id = block.get("id")
    if not isinstance(step_id, str) or not step_id.strip():
        raise ScenarioError(f"{path}.id", "missing key step id")
    scene = block.get("scene")
    if not isinstance(scene, str) or not scene.strip():
        raise ScenarioError(f"{path}.scene", "missing key step scene")
    raw_action = block.get("action")
    if not isinstance(raw_action, str):
        raise ScenarioError(f"{path}.action", "missing key step action")
    try:
        action = parse_action(raw_action)
    except ActionParseError as exc:
        raise ScenarioError(f"{path}.action", str(exc)) from None
    hint = block.get("hint")
    if not isinstance(hint, str) or not hint.strip():
        raise ScenarioError(f"{path}.hint", "missing hint text")
    return KeyStep(id=step_id.strip(), scene=scene.strip(), action=action, hint_text=hint)


def _parse_annotated_chain(doc) -> tuple[tuple[str, Action], ...] | None:
    if doc is None:
        return None
    if not isinstance(doc, list) or not doc:
        raise ScenarioError("oracle_chain", "expected a non-empty list of chain elements")
    elements = []
    for i, entry in enumerate(doc):
        path = f"oracle_chain[{i}]"
        if not isinstance(entry, dict) or "scene" not in entry or "action" not in entry:
            raise ScenarioError(path, "chain element needs scene and action")
        try:
            action = parse_action(str(entry["action"]))
        except ActionParseError as exc:
            raise ScenarioError(f"{path}.action", str(exc)) from None
        elements.append((str(entry["scene"]).strip(), action))
    return tuple(elements)


# -- reference resolution ----------------------------------------------------


def _resolve_references(scenario: Scenario) -> None:
    names: dict[str, str] = {}  # name -> kind, for duplicate detection

    def declare(name: str, kind: str, path: str):
        folded = name.casefold()
        if folded in names:
            raise ScenarioError(path, f"duplicate name {name!r} (already a {names[folded]})")
        names[folded] = kind

    for scene in scenario.scenes:
        declare(scene.name, "scene", f"scenes[{scene.name}]")
    for scene in scenario.scenes:
        for item in scene.items:
            declare(item.name, "item", f"scenes[{scene.name}].items[{item.name}]")
        for tool in scene.tools:
            declare(tool.name, "tool", f"scenes[{scene.name}].tools[{tool.name}]")
    for recipe in scenario.recipes:
        declare(recipe.output.name, "tool", f"recipes[{recipe.output.name}].output")

    item_names = {i.casefold() for i in scenario.items_by_name}
    tool_names = {t.casefold() for t in scenario.tools_by_name}
    scene_names = {s.casefold() for s in scenario.scenes_by_name}

    def need(name: str, kinds: set[str], path: str):
        folded = name.casefold()
        pools = {"scene": scene_names, "item": item_names, "tool": tool_names}
        if not any(folded in pools[k] for k in kinds):
            raise ScenarioError(path, f"dangling reference: no {' or '.join(sorted(kinds))} named {name!r}")

    if scenario.start_scene.casefold() not in scene_names:
        raise ScenarioError("start_scene", f"dangling reference: no scene named {scenario.start_scene!r}")

    for scene in scenario.scenes:
        base = f"scenes[{scene.name}]"
        for label, connector in scene.connectors:
            need(connector.target, {"scene"}, f"{base}.scene_relations[{label}]")
            if connector.target.casefold() == scene.name.casefold():
                raise ScenarioError(
                    f"{base}.scene_relations[{label}]", "connector points at its own scene"
                )
        for item in scene.items:
            ipath = f"{base}.items[{item.name}]"
            for si, state in enumerate(item.states):
                for ti, transition in enumerate(state.transitions):
                    tpath = f"{ipath}.states[{si}].transitions[{ti}]"
                    if transition.event.kind == "apply":
                        need(transition.event.arg, {"tool"}, f"{tpath}.wait_for[0]")
                    for ei, effect in enumerate(transition.effects):
                        _resolve_effect(scenario, effect, item.name, f"{tpath}.trigger[{ei}]")
        for tool in scene.tools:
            _resolve_tool_refs(scenario, tool, f"{base}.tools[{tool.name}]", need)

    for recipe in scenario.recipes:
        rpath = f"recipes[{recipe.output.name}]"
        for tool_name, state_index in recipe.inputs:
            need(tool_name, {"tool"}, f"{rpath}.inputs")
            tool = scenario.find_tool(tool_name)
            if tool and state_index >= len(tool.states):
                raise ScenarioError(
                    f"{rpath}.inputs", f"state index {state_index} out of range for {tool_name!r}"
                )
        _resolve_tool_refs(scenario, recipe.output, f"{rpath}.output", need)

    seen_ids: set[str] = set()
    for step in scenario.key_steps:
        kpath = f"key_steps[{step.id}]"
        if step.id in seen_ids:
            raise ScenarioError(kpath, f"duplicate key step id {step.id!r}")
        seen_ids.add(step.id)
        need(step.scene, {"scene"}, f"{kpath}.scene")
        _resolve_key_step_action(scenario, step, kpath)

    if scenario.annotated_chain:
        for i, (scene_name, action) in enumerate(scenario.annotated_chain):
            need(scene_name, {"scene"}, f"oracle_chain[{i}].scene")


def _resolve_effect(scenario: Scenario, effect: Effect, owner: str, path: str) -> None:
    if effect.kind == "game_end":
        return
    if effect.kind == "change_self_state":
        item = scenario.find_item(owner)
        if item and effect.state_index >= len(item.states):
            raise ScenarioError(path, f"state index {effect.state_index} out of range for {owner!r}")
        return
    kind_pool = {
        "change_item_state": "item",
        "reveal_item": "item",
        "change_tool_state": "tool",
        "reveal_tool": "tool",
        "collect_tool": "tool",
        "consume_tool": "tool",
    }[effect.kind]
    target = (
        scenario.find_item(effect.target) if kind_pool == "item" else scenario.find_tool(effect.target)
    )
    if target is None:
        raise ScenarioError(path, f"dangling reference: no {kind_pool} named {effect.target!r}")
    if effect.state_index is not None and effect.state_index >= len(target.states):
        raise ScenarioError(
            path, f"state index {effect.state_index} out of range for {effect.target!r}"
        )


def _resolve_tool_refs(scenario: Scenario, tool: Tool, path: str, need) -> None:
    for si, state in enumerate(tool.states):
        spath = f"{path}.states[{si}]"
        for wi, wf in enumerate(state.wait_for):
            need(wf.tool, {"tool"}, f"{spath}.wait_for[{wi}]")
        for ai, target in enumerate(state.apply_to):
            need(target, {"item", "tool"}, f"{spath}.apply_to[{ai}]")
        if si == len(tool.states) - 1 and state.wait_for:
            raise ScenarioError(
                spath, f"final state of {tool.name!r} must have an empty wait_for"
            )


def _resolve_key_step_action(scenario: Scenario, step: KeyStep, path: str) -> None:
    action = step.action
    if action.verb == "move":
        scene = scenario.find_scene(step.scene)
        labels = {label.casefold() for label, _ in scene.connectors} if scene else set()
        if action.args[0].casefold() not in labels:
            raise ScenarioError(
                f"{path}.action", f"dangling reference: scene {step.scene!r} has no connector {action.args[0]!r}"
            )
        return
    pools = {
        "click": [("item", "tool")],
        "apply": [("tool",), ("item", "tool")],
        "input": [None, ("item",)],
        "craft": [("tool",), ("tool",)],
    }[action.verb]
    for arg, kinds in zip(action.args, pools):
        if kinds is None:
            continue
        found = ("item" in kinds and scenario.find_item(arg) is not None) or (
            "tool" in kinds and scenario.find_tool(arg) is not None
        )
        if not found:
            raise ScenarioError(
                f"{path}.action", f"dangling reference: no {' or '.join(kinds)} named {arg!r}"
            )


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------


def serialize_scenario(scenario: Scenario) -> str:
    """Render a Scenario back to configuration text (parse round-trips)."""
    return yaml.safe_dump(scenario_to_config(scenario), sort_keys=False, allow_unicode=True, width=100000)


def scenario_to_config(scenario: Scenario) -> dict:
    doc: dict = {
        "name": scenario.name,
        "start_scene": scenario.start_scene,
        "scenes": [_scene_to_config(s) for s in scenario.scenes],
    }
    if scenario.recipes:
        doc["recipes"] = [_recipe_to_config(r) for r in scenario.recipes]
    if scenario.key_steps:
        doc["key_steps"] = [
            {"id": k.id, "scene": k.scene, "action": k.action.render(), "hint": k.hint_text}
            for k in scenario.key_steps
        ]
    if scenario.annotated_chain:
        doc["oracle_chain"] = [
            {"scene": scene, "action": action.render()} for scene, action in scenario.annotated_chain
        ]
    return doc


def _leveled_to_config(text: LeveledText | None):
    if text is None:
        return None
    overrides = {lvl: getattr(text, lvl) for lvl in DIFFICULTIES if getattr(text, lvl) is not None}
    if not overrides:
        return text.default
    return {"default": text.default, **overrides}


def _scene_to_config(scene: Scene) -> dict:
    doc: dict = {"name": scene.name, "desc": _leveled_to_config(scene.desc)}
    if scene.connectors:
        doc["scene_relations"] = {
            label: (c.target if not c.one_way else {"target": c.target, "one_way": True})
            for label, c in scene.connectors
        }
    if scene.items:
        doc["items"] = [_item_to_config(i) for i in scene.items]
    if scene.tools:
        doc["tools"] = [_tool_to_config(t) for t in scene.tools]
    return doc


def _item_to_config(item: Item) -> dict:
    doc: dict = {"name": item.name}
    if not item.visible:
        doc["visible"] = False
    if item.position:
        doc["position"] = item.position
    if item.feedback:
        doc["feedback"] = _leveled_to_config(item.feedback)
    doc["states"] = []
    for state in item.states:
        sdoc: dict = {"desc": _leveled_to_config(state.desc)}
        if state.transitions:
            sdoc["transitions"] = [
                {
                    "wait_for": [t.event.render()],
                    "trigger": [_effect_to_config(e) for e in t.effects],
                    **({"reward": _leveled_to_config(t.reward)} if t.reward else {}),
                }
                for t in state.transitions
            ]
        doc["states"].append(sdoc)
    return doc


def _effect_to_config(effect: Effect) -> str:
    if effect.kind == "game_end":
        return "game_end"
    if effect.kind == "change_self_state":
        return f"change_state, {effect.state_index}"
    if effect.kind == "change_item_state":
        return f"change_state, item, {effect.target}, {effect.state_index}"
    if effect.kind == "change_tool_state":
        return f"change_state, tool, {effect.target}, {effect.state_index}"
    if effect.kind == "reveal_item":
        return f"reveal, item, {effect.target}"
    if effect.kind == "reveal_tool":
        return f"reveal, tool, {effect.target}"
    if effect.kind == "collect_tool":
        return f"collect, {effect.target}"
    if effect.kind == "consume_tool":
        return f"consume, {effect.target}"
    raise ValueError(f"unknown effect kind {effect.kind!r}")


def _tool_to_config(tool: Tool) -> dict:
    doc: dict = {"name": tool.name}
    if not tool.visible:
        doc["visible"] = False
    if tool.position:
        doc["position"] = tool.position
    if tool.feedback:
        doc["feedback"] = _leveled_to_config(tool.feedback)
    doc["states"] = []
    for state in tool.states:
        sdoc: dict = {"desc": _leveled_to_config(state.desc)}
        if state.wait_for:
            sdoc["wait_for"] = [
                wf.tool if wf.consume else f"{wf.tool}, keep" for wf in state.wait_for
            ]
        if state.apply_to:
            sdoc["apply_to"] = list(state.apply_to)
        doc["states"].append(sdoc)
    return doc


def _recipe_to_config(recipe: CraftRecipe) -> dict:
    doc: dict = {
        "inputs": [
            name if index == 0 else f"{name}, {index}" for name, index in recipe.inputs
        ],
        "output": _tool_to_config(recipe.output),
    }
    if recipe.consume_inputs != (True, True):
        doc["consume_inputs"] = list(recipe.consume_inputs)
    if recipe.reward:
        doc["reward"] = _leveled_to_config(recipe.reward)
    return doc
