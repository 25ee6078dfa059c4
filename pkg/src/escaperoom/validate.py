"""Static scenario validation.

Findings are data, not failures: errors mark invariant violations that
would break play (no goal, ambiguous triggers, broken key steps), while
warnings flag likely authoring mistakes (unreachable scenes, transitions
that can never fire, asymmetric connectors).  Reachability here is a
static over-approximation; proving the game winnable is the solver's job.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .scenario import Scenario


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" | "warning"
    code: str
    path: str
    message: str


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == "error"]

    @property
    def warnings(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == "warning"]

    def ok(self, strict: bool = False) -> bool:
        return not self.errors and not (strict and self.warnings)

    def add(self, severity: str, code: str, path: str, message: str) -> None:
        self.findings.append(Finding(severity, code, path, message))


def validate_scenario(scenario: Scenario) -> ValidationReport:
    report = ValidationReport()
    _check_goal(scenario, report)
    _check_key_steps(scenario, report)
    _check_triggers(scenario, report)
    _check_scene_graph(scenario, report)
    _check_state_reachability(scenario, report)
    _check_recipes(scenario, report)
    return report


# --------------------------------------------------------------------------


def _iter_transitions(scenario: Scenario):
    for scene in scenario.scenes:
        for item in scene.items:
            for si, state in enumerate(item.states):
                for ti, transition in enumerate(state.transitions):
                    yield scene, item, si, ti, transition


def _check_goal(scenario: Scenario, report: ValidationReport) -> None:
    for _, _, _, _, transition in _iter_transitions(scenario):
        if any(e.kind == "game_end" for e in transition.effects):
            return
    report.add("error", "no-goal", "scenes", "no goal: no transition emits game_end")


def _check_key_steps(scenario: Scenario, report: ValidationReport) -> None:
    if not scenario.key_steps:
        report.add("error", "no-key-steps", "key_steps", "at least one key step is required")
        return
    last = scenario.key_steps[-1]
    if not _action_can_end_game(scenario, last):
        report.add(
            "error",
            "goal-not-last-key-step",
            f"key_steps[{last.id}]",
            "the last key step must fire a transition whose effects include game_end",
        )
    seen: dict[tuple, str] = {}
    for step in scenario.key_steps:
        key = (step.scene.casefold(), step.action.key())
        if key in seen:
            report.add(
                "warning",
                "duplicate-key-step-action",
                f"key_steps[{step.id}]",
                f"same action template as key step {seen[key]!r}",
            )
        seen[key] = step.id
        _check_key_step_location(scenario, step, report)


def _action_can_end_game(scenario: Scenario, step) -> bool:
    action = step.action
    if action.verb not in ("click", "apply", "input"):
        return False
    target_name = action.args[-1]
    item = scenario.find_item(target_name)
    if item is None:
        return False
    for state in item.states:
        for transition in state.transitions:
            if not _event_matches_action(transition.event, action):
                continue
            if any(e.kind == "game_end" for e in transition.effects):
                return True
    return False


def _event_matches_action(event, action) -> bool:
    if action.verb == "click":
        return event.kind == "click"
    if action.verb == "apply":
        return event.kind == "apply" and event.arg.casefold() == action.args[0].casefold()
    if action.verb == "input":
        return event.kind == "input" and event.arg.casefold() == action.args[0].casefold()
    return False


def _check_key_step_location(scenario: Scenario, step, report: ValidationReport) -> None:
    action = step.action
    if action.verb in ("move", "craft"):
        return
    target = scenario.find_item(action.args[-1]) or scenario.find_tool(action.args[-1])
    if target is None or target.location is None:
        return
    if action.verb == "apply" and scenario.find_item(action.args[-1]) is None:
        return  # bag tools travel; applying to one is not scene-bound
    if target.location.casefold() != step.scene.casefold():
        report.add(
            "warning",
            "key-step-target-elsewhere",
            f"key_steps[{step.id}]",
            f"target {target.name!r} lives in scene {target.location!r}, not {step.scene!r}",
        )


def _check_triggers(scenario: Scenario, report: ValidationReport) -> None:
    for scene in scenario.scenes:
        for item in scene.items:
            for si, state in enumerate(item.states):
                seen: set[tuple] = set()
                for ti, transition in enumerate(state.transitions):
                    key = transition.event.key()
                    path = f"scenes[{scene.name}].items[{item.name}].states[{si}].transitions[{ti}]"
                    if key in seen:
                        report.add(
                            "error",
                            "ambiguous-trigger",
                            path,
                            f"ambiguous trigger: duplicate event {transition.event.render()!r} in one state",
                        )
                    seen.add(key)


def _check_scene_graph(scenario: Scenario, report: ValidationReport) -> None:
    reachable = {scenario.start_scene.casefold()}
    queue = deque([scenario.start_scene])
    while queue:
        scene = scenario.find_scene(queue.popleft())
        for _, connector in scene.connectors:
            folded = connector.target.casefold()
            if folded not in reachable:
                reachable.add(folded)
                queue.append(connector.target)
    for scene in scenario.scenes:
        if scene.name.casefold() not in reachable:
            report.add(
                "warning",
                "unreachable-scene",
                f"scenes[{scene.name}]",
                f"scene {scene.name!r} cannot be reached from {scenario.start_scene!r}",
            )
    # Symmetric connectivity unless a connector opts out.
    for scene in scenario.scenes:
        for label, connector in scene.connectors:
            if connector.one_way:
                continue
            target = scenario.find_scene(connector.target)
            back = any(
                c.target.casefold() == scene.name.casefold() for _, c in target.connectors
            )
            if not back:
                report.add(
                    "warning",
                    "asymmetric-connector",
                    f"scenes[{scene.name}].scene_relations[{label}]",
                    f"{connector.target!r} has no connector back to {scene.name!r} "
                    "and this one is not marked one-way",
                )


def _check_state_reachability(scenario: Scenario, report: ValidationReport) -> None:
    """Flag transitions sitting in states no effect can ever reach.

    Over-approximates: an index is considered reachable if any effect in
    the scenario targets it, regardless of whether that effect's own
    transition is reachable.
    """
    reachable: dict[str, set[int]] = {}
    for name in list(scenario.items_by_name) + list(scenario.tools_by_name):
        reachable[name.casefold()] = {0}
    for scene in scenario.scenes:
        for item in scene.items:
            for state in item.states:
                for transition in state.transitions:
                    for effect in transition.effects:
                        if effect.kind == "change_self_state":
                            reachable[item.name.casefold()].add(effect.state_index)
                        elif effect.kind in ("change_item_state", "change_tool_state"):
                            reachable[effect.target.casefold()].add(effect.state_index)
    for tool in scenario.tools_by_name.values():
        folded = tool.name.casefold()
        for si, state in enumerate(tool.states[:-1]):
            if state.wait_for and si in reachable[folded]:
                reachable[folded].add(si + 1)

    for scene in scenario.scenes:
        for item in scene.items:
            for si, state in enumerate(item.states):
                if si in reachable[item.name.casefold()]:
                    continue
                if not state.transitions:
                    continue
                report.add(
                    "warning",
                    "never-fireable-transition",
                    f"scenes[{scene.name}].items[{item.name}].states[{si}]",
                    f"state {si} of {item.name!r} is never entered, so its "
                    f"{len(state.transitions)} transition(s) can never fire",
                )

    # An apply transition needs the acting tool to list the item in some
    # state's apply_to, or it can never fire.
    for scene in scenario.scenes:
        for item in scene.items:
            for si, state in enumerate(item.states):
                for ti, transition in enumerate(state.transitions):
                    if transition.event.kind != "apply":
                        continue
                    tool = scenario.find_tool(transition.event.arg)
                    allowed = any(
                        target.casefold() == item.name.casefold()
                        for tool_state in tool.states
                        for target in tool_state.apply_to
                    )
                    if not allowed:
                        report.add(
                            "warning",
                            "never-fireable-transition",
                            f"scenes[{scene.name}].items[{item.name}].states[{si}].transitions[{ti}]",
                            f"waits for apply of {tool.name!r}, but no state of that tool "
                            f"lists {item.name!r} in apply_to",
                        )


def _check_recipes(scenario: Scenario, report: ValidationReport) -> None:
    seen_pairs: set[frozenset] = set()
    for recipe in scenario.recipes:
        pair = recipe.pair_key()
        if pair in seen_pairs:
            report.add(
                "error",
                "duplicate-recipe",
                f"recipes[{recipe.output.name}]",
                "two recipes share the same input pair",
            )
        seen_pairs.add(pair)
