"""Deterministic game engine: sessions, observations, and the five verbs.

A session is a mutable GameState owned by exactly one caller.  Difficulty
changes rendered text only: success and failure of every action, and all
progress bookkeeping, are identical across easy/normal/hard.  Failed
actions never mutate anything but the step counter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .actions import Action
from .scenario import (
    DIFFICULTIES,
    Scenario,
    Tool,
    parse_scenario,
    serialize_scenario,
)

GENERIC_FAILURE = "Action failed. Nothing happens."
SUCCESS_PREFIX = "Action executed successfully."

SNAPSHOT_VERSION = 1


class EngineError(RuntimeError):
    pass


class SessionOver(EngineError):
    """An action was submitted to a finished session."""


class SnapshotError(EngineError):
    """A snapshot blob is corrupt or from an incompatible version."""


@dataclass(frozen=True)
class ProgressEvent:
    kind: str  # "none" | "key_step" | "tool_collected"
    target: str | None = None

    def to_json(self) -> dict:
        return {"kind": self.kind, "target": self.target}

    @staticmethod
    def from_json(doc: dict) -> "ProgressEvent":
        return ProgressEvent(doc["kind"], doc.get("target"))


NO_PROGRESS = ProgressEvent("none")


@dataclass(frozen=True)
class ActionOutcome:
    success: bool
    feedback: str
    progress: ProgressEvent = NO_PROGRESS
    game_over: bool = False
    failure: str | None = None  # unknown-object | tool-not-in-bag | no-matching-transition | no-recipe
    tools_gained: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "success": self.success,
            "feedback": self.feedback,
            "progress": self.progress.to_json(),
            "game_over": self.game_over,
            "failure": self.failure,
            "tools_gained": list(self.tools_gained),
        }

    @staticmethod
    def from_json(doc: dict) -> "ActionOutcome":
        return ActionOutcome(
            success=doc["success"],
            feedback=doc["feedback"],
            progress=ProgressEvent.from_json(doc["progress"]),
            game_over=doc["game_over"],
            failure=doc.get("failure"),
            tools_gained=tuple(doc.get("tools_gained", ())),
        )


@dataclass
class GameState:
    scenario: Scenario
    difficulty: str
    current_scene: str
    path_trace: list[str]
    item_state: dict[str, int]
    tool_state: dict[str, int]
    visibility: dict[str, bool]
    bag: set[str]
    tools_collected_ever: set[str]
    completed_key_steps: list[str]
    succeeded_actions: set[tuple]  # (scene, action key) pairs, for hint bookkeeping
    step_count: int = 0
    game_over: bool = False

    @property
    def collected_tools(self) -> int:
        return len(self.tools_collected_ever)

    def clone(self) -> "GameState":
        return GameState(
            scenario=self.scenario,
            difficulty=self.difficulty,
            current_scene=self.current_scene,
            path_trace=list(self.path_trace),
            item_state=dict(self.item_state),
            tool_state=dict(self.tool_state),
            visibility=dict(self.visibility),
            bag=set(self.bag),
            tools_collected_ever=set(self.tools_collected_ever),
            completed_key_steps=list(self.completed_key_steps),
            succeeded_actions=set(self.succeeded_actions),
            step_count=self.step_count,
            game_over=self.game_over,
        )

@dataclass(frozen=True)
class Observation:
    scene_name: str
    scene_text: str
    item_texts: tuple[str, ...]
    interactable_items: tuple[str, ...]
    nearby_scenes: tuple[tuple[str, str], ...]  # (connector label, target scene)
    bag_texts: tuple[tuple[str, str], ...]  # (tool name, current state desc)

    def render(self) -> str:
        lines = ["Scene Description:", self.scene_text]
        lines.append("Here are the items you can see in this scene:")
        lines.extend(self.item_texts)
        lines.append("")
        lines.append("Possible Actions:")
        lines.append("Here are all the items in the scene that you can perform 'click', 'apply' or 'input':")
        lines.extend(f"<interactable item> {name}" for name in self.interactable_items)
        lines.append("Here are nearby scenes that you can perform 'move' to further explore:")
        lines.extend(
            f"<interactable scene> {label}: It leads to {target}"
            for label, target in self.nearby_scenes
        )
        lines.append("")
        lines.append("Tools in Bag:")
        lines.append(
            "Here are the tools in your bag. You can perform 'craft' to use two tools in "
            "your bag to craft a new one, or perfom 'apply' to apply one tool in your bag "
            "to an object in the scene:"
        )
        lines.extend(f"<applicable tool> {name}: {desc}" for name, desc in self.bag_texts)
        return "\n".join(lines)


# --------------------------------------------------------------------------
# Session lifecycle
# --------------------------------------------------------------------------


def new_session(scenario: Scenario, difficulty: str) -> GameState:
    if difficulty not in DIFFICULTIES:
        raise EngineError(f"unknown difficulty {difficulty!r}")
    visibility: dict[str, bool] = {}
    item_state: dict[str, int] = {}
    tool_state: dict[str, int] = {}
    for scene in scenario.scenes:
        for item in scene.items:
            visibility[item.name] = item.visible
            item_state[item.name] = 0
        for tool in scene.tools:
            visibility[tool.name] = tool.visible
            tool_state[tool.name] = 0
    for name in scenario.tools_by_name:
        # Craft outputs are tracked from the start, hidden until made.
        tool_state.setdefault(name, 0)
        visibility.setdefault(name, False)
    return GameState(
        scenario=scenario,
        difficulty=difficulty,
        current_scene=scenario.start_scene,
        path_trace=[scenario.start_scene],
        item_state=item_state,
        tool_state=tool_state,
        visibility=visibility,
        bag=set(),
        tools_collected_ever=set(),
        completed_key_steps=[],
        succeeded_actions=set(),
    )


def observe(state: GameState) -> Observation:
    if state.game_over:
        raise SessionOver("session is finished")
    scenario = state.scenario
    scene = scenario.find_scene(state.current_scene)
    level = state.difficulty

    item_texts: list[str] = []
    interactable: list[str] = []
    for item in scene.items:
        if not state.visibility[item.name]:
            continue
        desc = item.states[state.item_state[item.name]].desc.resolve(level)
        item_texts.append(_describe_line(item.position, item.name, desc))
        interactable.append(item.name)
    for tool in scene.tools:
        if not state.visibility[tool.name] or tool.name in state.bag:
            continue
        if tool.name in state.tools_collected_ever:
            continue  # consumed after collection; it is gone from the scene
        desc = tool.states[state.tool_state[tool.name]].desc.resolve(level)
        item_texts.append(_describe_line(tool.position, tool.name, desc))
        interactable.append(tool.name)

    nearby = tuple((label, c.target) for label, c in scene.connectors)
    bag_texts = tuple(
        (name, scenario.tools_by_name[name].states[state.tool_state[name]].desc.resolve(level))
        for name in sorted(state.bag)
    )
    return Observation(
        scene_name=scene.name,
        scene_text=f"You are in the scene '{scene.name}'. {scene.desc.resolve(level)}",
        item_texts=tuple(item_texts),
        interactable_items=tuple(interactable),
        nearby_scenes=nearby,
        bag_texts=bag_texts,
    )


def _describe_line(position: str | None, name: str, desc: str) -> str:
    if position:
        return f"- {position}, there is {name}: {desc}"
    return f"- There is {name}: {desc}"


# --------------------------------------------------------------------------
# The five verbs
# --------------------------------------------------------------------------


def step(state: GameState, action: Action) -> ActionOutcome:
    """Execute one action, mutating the session.

    Every call counts one step, success or not.  Failures come back as
    outcomes, never exceptions; only a finished session raises.
    """
    if state.game_over:
        raise SessionOver("session is finished")
    state.step_count += 1

    handler = {
        "move": _do_move,
        "click": _do_click,
        "apply": _do_apply,
        "input": _do_input,
        "craft": _do_craft,
    }[action.verb]
    origin_scene = state.current_scene
    outcome = handler(state, action)
    if outcome.success:
        state.succeeded_actions.add((origin_scene.casefold(), action.key()))
        progress = _note_progress(state, origin_scene, action, outcome)
        outcome = replace(outcome, progress=progress)
        if outcome.game_over:
            state.game_over = True
    return outcome


def _note_progress(
    state: GameState, scene_name: str, action: Action, outcome: ActionOutcome
) -> ProgressEvent:
    # First completion of a key step outranks a tool pickup in the single
    # progress tag; both are still recorded in the state ledgers.
    for step_def in state.scenario.key_steps:
        if step_def.id in state.completed_key_steps:
            continue
        if step_def.scene.casefold() != scene_name.casefold():
            continue
        if step_def.action.matches(action):
            state.completed_key_steps.append(step_def.id)
            return ProgressEvent("key_step", step_def.id)
    if outcome.tools_gained:
        return ProgressEvent("tool_collected", outcome.tools_gained[0])
    return NO_PROGRESS


def _fail(state: GameState, action: Action, kind: str) -> ActionOutcome:
    return ActionOutcome(
        success=False,
        feedback=render_failure_feedback(state, action),
        failure=kind,
    )


def _do_move(state: GameState, action: Action) -> ActionOutcome:
    label = action.args[0].strip().casefold()
    scene = state.scenario.find_scene(state.current_scene)
    for connector_label, connector in scene.connectors:
        if connector_label.strip().casefold() == label:
            state.current_scene = connector.target
            state.path_trace.append(connector.target)
            return ActionOutcome(
                success=True,
                feedback=f"{SUCCESS_PREFIX} Change to another scene: {connector.target}.",
            )
    return _fail(state, action, "unknown-object")


def _visible_here(state: GameState, name: str, kind: str) -> bool:
    scenario = state.scenario
    obj = scenario.find_item(name) if kind == "item" else scenario.find_tool(name)
    if obj is None or obj.location is None:
        return False
    return (
        obj.location.casefold() == state.current_scene.casefold()
        and state.visibility[obj.name]
    )


def _do_click(state: GameState, action: Action) -> ActionOutcome:
    name = action.args[0]
    scenario = state.scenario

    tool = scenario.find_tool(name)
    if tool is not None and _visible_here(state, name, "tool") and tool.name not in state.bag:
        if tool.name in state.tools_collected_ever:
            return _fail(state, action, "unknown-object")
        return _collect(state, tool, f"{SUCCESS_PREFIX} The {tool.name} is placed in your bag.")

    item = scenario.find_item(name)
    if item is None or not _visible_here(state, name, "item"):
        return _fail(state, action, "unknown-object")
    transition = _find_transition(state, item, lambda e: e.kind == "click")
    if transition is None:
        return _fail(state, action, "no-matching-transition")
    return _apply_transition(state, item, transition)


def _tool_can_act_on(state: GameState, tool: Tool, target_name: str) -> bool:
    # A tool state is either awaiting an upgrade or ready to act on the
    # objects its apply_to declares; anything else is not a legal use.
    current = tool.states[state.tool_state[tool.name]]
    wanted = target_name.strip().casefold()
    return any(entry.casefold() == wanted for entry in current.apply_to)


def _do_apply(state: GameState, action: Action) -> ActionOutcome:
    tool_name, target_name = action.args
    scenario = state.scenario
    tool = scenario.find_tool(tool_name)
    if tool is None:
        return _fail(state, action, "unknown-object")
    if tool.name not in state.bag:
        return _fail(state, action, "tool-not-in-bag")

    target_item = scenario.find_item(target_name)
    if target_item is not None and _visible_here(state, target_name, "item"):
        if not _tool_can_act_on(state, tool, target_item.name):
            return _fail(state, action, "no-matching-transition")
        transition = _find_transition(
            state,
            target_item,
            lambda e: e.kind == "apply" and e.arg.casefold() == tool.name.casefold(),
        )
        if transition is None:
            return _fail(state, action, "no-matching-transition")
        return _apply_transition(state, target_item, transition)

    # Applying one bag tool to another upgrades the receiver when the
    # acting tool is listed in its current wait_for set (and the actor's
    # apply_to allows the receiver).
    target_tool = scenario.find_tool(target_name)
    if target_tool is not None and target_tool.name in state.bag:
        if target_tool.name == tool.name:
            return _fail(state, action, "no-matching-transition")
        if not _tool_can_act_on(state, tool, target_tool.name):
            return _fail(state, action, "no-matching-transition")
        current = target_tool.states[state.tool_state[target_tool.name]]
        for wait in current.wait_for:
            if wait.tool.casefold() == tool.name.casefold():
                state.tool_state[target_tool.name] += 1
                if wait.consume:
                    state.bag.discard(tool.name)
                new_desc = target_tool.states[state.tool_state[target_tool.name]].desc.resolve(
                    state.difficulty
                )
                return ActionOutcome(
                    success=True,
                    feedback=f"{SUCCESS_PREFIX} The {target_tool.name} changes: {new_desc}",
                )
        return _fail(state, action, "no-matching-transition")

    return _fail(state, action, "unknown-object")


def _do_input(state: GameState, action: Action) -> ActionOutcome:
    text, target_name = action.args
    item = state.scenario.find_item(target_name)
    if item is None or not _visible_here(state, target_name, "item"):
        return _fail(state, action, "unknown-object")
    transition = _find_transition(
        state,
        item,
        lambda e: e.kind == "input" and e.arg.casefold() == text.strip().casefold(),
    )
    if transition is None:
        return _fail(state, action, "no-matching-transition")
    return _apply_transition(state, item, transition)


def _do_craft(state: GameState, action: Action) -> ActionOutcome:
    name_a, name_b = action.args
    scenario = state.scenario
    tool_a = scenario.find_tool(name_a)
    tool_b = scenario.find_tool(name_b)
    if tool_a is None or tool_b is None:
        return _fail(state, action, "unknown-object")
    if tool_a.name not in state.bag or tool_b.name not in state.bag:
        return _fail(state, action, "tool-not-in-bag")
    pair = frozenset(
        {
            (tool_a.name, state.tool_state[tool_a.name]),
            (tool_b.name, state.tool_state[tool_b.name]),
        }
    )
    recipe = state.scenario.recipes_by_pair.get(pair)
    if recipe is None or recipe.output.name in state.bag:
        return _fail(state, action, "no-recipe")
    for (input_name, _), consume in zip(recipe.inputs, recipe.consume_inputs):
        if consume:
            state.bag.discard(scenario.find_tool(input_name).name)
    feedback = (
        recipe.reward.resolve(state.difficulty)
        if recipe.reward
        else f"{SUCCESS_PREFIX} You craft {recipe.output.name}."
    )
    return _collect(state, recipe.output, feedback)


def _collect(state: GameState, tool: Tool, feedback: str) -> ActionOutcome:
    state.visibility[tool.name] = True
    state.bag.add(tool.name)
    gained = ()
    if tool.name not in state.tools_collected_ever:
        state.tools_collected_ever.add(tool.name)
        gained = (tool.name,)
    return ActionOutcome(success=True, feedback=feedback, tools_gained=gained)


def _find_transition(state: GameState, item, predicate):
    current = item.states[state.item_state[item.name]]
    for transition in current.transitions:
        if predicate(transition.event):
            return transition
    return None


def _apply_transition(state: GameState, item, transition) -> ActionOutcome:
    gained: list[str] = []
    ended = False
    for effect in transition.effects:
        if effect.kind == "game_end":
            ended = True
            break  # game_end short-circuits the remaining effects
        _apply_effect(state, item, effect, gained)
    feedback = (
        transition.reward.resolve(state.difficulty)
        if transition.reward
        else SUCCESS_PREFIX
    )
    return ActionOutcome(
        success=True,
        feedback=feedback,
        game_over=ended,
        tools_gained=tuple(gained),
    )


def _apply_effect(state: GameState, owner, effect, gained: list[str]) -> None:
    scenario = state.scenario
    if effect.kind == "change_self_state":
        state.item_state[owner.name] = effect.state_index
    elif effect.kind == "change_item_state":
        state.item_state[scenario.find_item(effect.target).name] = effect.state_index
    elif effect.kind == "change_tool_state":
        state.tool_state[scenario.find_tool(effect.target).name] = effect.state_index
    elif effect.kind == "reveal_item":
        state.visibility[scenario.find_item(effect.target).name] = True
    elif effect.kind == "reveal_tool":
        state.visibility[scenario.find_tool(effect.target).name] = True
    elif effect.kind == "collect_tool":
        tool = scenario.find_tool(effect.target)
        state.visibility[tool.name] = True
        state.bag.add(tool.name)
        if tool.name not in state.tools_collected_ever:
            state.tools_collected_ever.add(tool.name)
            gained.append(tool.name)
    elif effect.kind == "consume_tool":
        state.bag.discard(scenario.find_tool(effect.target).name)
    else:
        raise EngineError(f"unknown effect kind {effect.kind!r}")


# --------------------------------------------------------------------------
# Failure feedback
# --------------------------------------------------------------------------


def render_failure_feedback(state: GameState, action: Action) -> str:
    """Difficulty-rendered text for a failed action.

    Easy and normal surface the targeted object's configured feedback when
    it has one; hard always returns the generic line.
    """
    if state.difficulty == "hard":
        return GENERIC_FAILURE
    target = _failure_target(state, action)
    if target is not None and target.feedback is not None:
        return target.feedback.resolve(state.difficulty)
    return GENERIC_FAILURE


def _failure_target(state: GameState, action: Action):
    scenario = state.scenario
    if action.verb in ("click", "apply", "input"):
        name = action.args[-1]
        return scenario.find_item(name) or scenario.find_tool(name)
    return None


# --------------------------------------------------------------------------
# Snapshots
# --------------------------------------------------------------------------


def snapshot(state: GameState) -> bytes:
    """Serialize a session to a self-contained, versioned blob."""
    doc = {
        "version": SNAPSHOT_VERSION,
        "scenario_config": serialize_scenario(state.scenario),
        "scenario_fingerprint": state.scenario.fingerprint(),
        "difficulty": state.difficulty,
        "current_scene": state.current_scene,
        "path_trace": state.path_trace,
        "item_state": state.item_state,
        "tool_state": state.tool_state,
        "visibility": state.visibility,
        "bag": sorted(state.bag),
        "tools_collected_ever": sorted(state.tools_collected_ever),
        "completed_key_steps": state.completed_key_steps,
        "succeeded_actions": sorted(
            [scene, verb, list(args)] for (scene, (verb, args)) in state.succeeded_actions
        ),
        "step_count": state.step_count,
        "game_over": state.game_over,
    }
    return json.dumps(doc, sort_keys=True).encode("utf-8")


def restore(blob: bytes, scenario: Scenario | None = None) -> GameState:
    """Rebuild a session from a snapshot blob.

    The blob embeds the full scenario; pass one in to reuse an already
    loaded instance (its fingerprint must match).
    """
    try:
        doc = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SnapshotError(f"corrupt snapshot: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("version") != SNAPSHOT_VERSION:
        raise SnapshotError(
            f"snapshot version {doc.get('version') if isinstance(doc, dict) else '?'} "
            f"not supported (expected {SNAPSHOT_VERSION})"
        )
    if scenario is None:
        scenario = parse_scenario(doc["scenario_config"])
    if scenario.fingerprint() != doc["scenario_fingerprint"]:
        raise SnapshotError("snapshot belongs to a different scenario")
    return GameState(
        scenario=scenario,
        difficulty=doc["difficulty"],
        current_scene=doc["current_scene"],
        path_trace=list(doc["path_trace"]),
        item_state=dict(doc["item_state"]),
        tool_state=dict(doc["tool_state"]),
        visibility=dict(doc["visibility"]),
        bag=set(doc["bag"]),
        tools_collected_ever=set(doc["tools_collected_ever"]),
        completed_key_steps=list(doc["completed_key_steps"]),
        succeeded_actions={
            (scene, (verb, tuple(args))) for scene, verb, args in doc["succeeded_actions"]
        },
        step_count=doc["step_count"],
        game_over=doc["game_over"],
    )


# --------------------------------------------------------------------------
# Action enumeration (used by the solver and scripted policies)
# --------------------------------------------------------------------------


def enumerate_actions(state: GameState) -> list[Action]:
    """All plausibly-executable actions in the current state, sorted.

    Input values come from the scenario's declared expected strings, never
    from brute force over the alphabet.  The ordering is deterministic:
    lexicographic by verb, then arguments.
    """
    scenario = state.scenario
    scene = scenario.find_scene(state.current_scene)
    actions: set[Action] = set()

    for label, _ in scene.connectors:
        actions.add(Action("move", (label,)))

    visible_items = [
        item for item in scene.items if state.visibility[item.name]
    ]
    for item in visible_items:
        current = item.states[state.item_state[item.name]]
        for transition in current.transitions:
            if transition.event.kind == "click":
                actions.add(Action("click", (item.name,)))
            elif transition.event.kind == "apply":
                tool = scenario.find_tool(transition.event.arg)
                if (
                    tool
                    and tool.name in state.bag
                    and _tool_can_act_on(state, tool, item.name)
                ):
                    actions.add(Action("apply", (tool.name, item.name)))
            elif transition.event.kind == "input":
                actions.add(Action("input", (transition.event.arg, item.name)))

    for tool in scene.tools:
        if (
            state.visibility[tool.name]
            and tool.name not in state.bag
            and tool.name not in state.tools_collected_ever
        ):
            actions.add(Action("click", (tool.name,)))

    bag = sorted(state.bag)
    for receiver_name in bag:
        receiver = scenario.find_tool(receiver_name)
        current = receiver.states[state.tool_state[receiver_name]]
        for wait in current.wait_for:
            actor = scenario.find_tool(wait.tool)
            if (
                actor
                and actor.name in state.bag
                and actor.name != receiver_name
                and _tool_can_act_on(state, actor, receiver_name)
            ):
                actions.add(Action("apply", (actor.name, receiver_name)))

    for i, name_a in enumerate(bag):
        for name_b in bag[i + 1 :]:
            pair = frozenset(
                {(name_a, state.tool_state[name_a]), (name_b, state.tool_state[name_b])}
            )
            recipe = scenario.recipes_by_pair.get(pair)
            if recipe and recipe.output.name not in state.bag:
                actions.add(Action("craft", (name_a, name_b)))

    return sorted(actions, key=lambda a: (a.verb, a.args))
