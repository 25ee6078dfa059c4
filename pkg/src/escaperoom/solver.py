"""Solvability search and minimal oracle chains.

Breadth-first search over canonical session states, expanding successful
actions only, with lexicographic tie-breaking so the returned chain is
deterministic.  The chain doubles as the hint provider's playbook: every
element replays successfully from a fresh session and the last one ends
the game.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .actions import Action, parse_action
from .engine import GameState, ProgressEvent, enumerate_actions, new_session, step
from .scenario import Scenario


class Unsolvable(RuntimeError):
    """No reachable state ends the game."""


class BoundExceeded(RuntimeError):
    """The search hit its state budget before finding a goal."""

    def __init__(self, explored: int, frontier: int, depth: int):
        self.explored = explored
        self.frontier = frontier
        self.depth = depth
        super().__init__(
            f"state bound exceeded: explored {explored} states, "
            f"{frontier} on the frontier, depth {depth}"
        )


class ChainMismatch(RuntimeError):
    """An action chain does not replay cleanly against its scenario."""


@dataclass(frozen=True)
class ChainElement:
    scene: str
    action: Action
    progress: ProgressEvent

    def to_json(self) -> dict:
        return {
            "scene": self.scene,
            "action": self.action.render(),
            "progress": self.progress.to_json(),
        }

    @staticmethod
    def from_json(doc: dict) -> "ChainElement":
        return ChainElement(
            scene=doc["scene"],
            action=parse_action(doc["action"]),
            progress=ProgressEvent.from_json(doc["progress"]),
        )


@dataclass(frozen=True)
class OracleChain:
    elements: tuple[ChainElement, ...]

    @property
    def length(self) -> int:
        return len(self.elements)

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for element in self.elements:
                handle.write(json.dumps(element.to_json()) + "\n")

    @staticmethod
    def load(path: str | Path) -> "OracleChain":
        elements = []
        with open(path, "r", encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    elements.append(ChainElement.from_json(json.loads(line)))
        return OracleChain(tuple(elements))


def state_key(state: GameState) -> tuple:
    """Canonical identity of a session's dynamic state.

    The path trace and step counter are history, not state: two routes to
    the same configuration collapse to one node.
    """
    scenario = state.scenario
    return (
        state.current_scene,
        tuple(state.item_state[name] for name in sorted(scenario.items_by_name)),
        tuple(state.tool_state[name] for name in sorted(scenario.tools_by_name)),
        tuple(state.visibility[name] for name in sorted(state.visibility)),
        frozenset(state.bag),
    )


def solve(scenario: Scenario, bound: int = 1_000_000) -> OracleChain:
    """Find a minimum-length action chain that ends the game.

    Raises Unsolvable when no goal state is reachable and BoundExceeded
    when more than ``bound`` states would have to be explored.
    """
    start = new_session(scenario, "normal")
    start_key = state_key(start)
    # parent map: key -> (parent key, action) for path reconstruction
    parents: dict[tuple, tuple[tuple, Action] | None] = {start_key: None}
    frontier_states: dict[tuple, GameState] = {start_key: start}
    queue: deque[tuple] = deque([start_key])
    depth_of: dict[tuple, int] = {start_key: 0}

    while queue:
        key = queue.popleft()
        node = frontier_states.pop(key)
        for action in enumerate_actions(node):
            successor = node.clone()
            outcome = step(successor, action)
            if not outcome.success:
                continue  # failed actions are no-ops, never expanded
            if outcome.game_over:
                # Goal test precedes dedup: an ending whose only effect is
                # game_end leaves the canonical key unchanged.
                return annotate_chain(scenario, _reconstruct(parents, key) + [action])
            succ_key = state_key(successor)
            if succ_key in parents:
                continue
            parents[succ_key] = (key, action)
            depth_of[succ_key] = depth_of[key] + 1
            if len(parents) > bound:
                raise BoundExceeded(
                    explored=len(parents), frontier=len(queue) + 1, depth=depth_of[key]
                )
            frontier_states[succ_key] = successor
            queue.append(succ_key)

    raise Unsolvable(f"scenario {scenario.name!r} has no reachable game_end")


def _reconstruct(parents: dict, key: tuple) -> list[Action]:
    actions: list[Action] = []
    while parents[key] is not None:
        key, action = parents[key]
        actions.append(action)
    actions.reverse()
    return actions


def annotate_chain(scenario: Scenario, actions: list[Action]) -> OracleChain:
    """Replay an action list and record per-element scene and progress.

    Raises ChainMismatch unless every action succeeds and the last one
    ends the game.
    """
    session = new_session(scenario, "normal")
    elements: list[ChainElement] = []
    for i, action in enumerate(actions):
        if session.game_over:
            raise ChainMismatch(f"chain continues after game over at element {i}")
        scene = session.current_scene
        outcome = step(session, action)
        if not outcome.success:
            raise ChainMismatch(
                f"chain element {i} ({action.render()} in {scene!r}) fails on replay"
            )
        elements.append(ChainElement(scene=scene, action=action, progress=outcome.progress))
    if not session.game_over:
        raise ChainMismatch("chain replays cleanly but does not end the game")
    return OracleChain(tuple(elements))


def obtain_chain(scenario: Scenario, bound: int = 1_000_000) -> OracleChain:
    """The scenario's hint chain: its annotated one if present, else solved.

    Annotated chains are replay-verified so a stale annotation cannot
    poison the hint protocol.
    """
    if scenario.annotated_chain:
        actions = [action for _, action in scenario.annotated_chain]
        chain = annotate_chain(scenario, actions)
        declared = [scene for scene, _ in scenario.annotated_chain]
        actual = [element.scene for element in chain.elements]
        if [s.casefold() for s in declared] != [s.casefold() for s in actual]:
            raise ChainMismatch("annotated chain scenes do not match replay")
        return chain
    return solve(scenario, bound=bound)


@dataclass(frozen=True)
class KeyStepCoverage:
    covered: tuple[str, ...]
    uncovered: tuple[str, ...]
    duplicated: tuple[str, ...]

    @property
    def complete(self) -> bool:
        return not self.uncovered and not self.duplicated


def verify_key_steps(scenario: Scenario, chain: OracleChain) -> KeyStepCoverage:
    """Check that every annotated key step appears exactly once in the chain."""
    counts: dict[str, int] = {ks.id: 0 for ks in scenario.key_steps}
    for element in chain.elements:
        if element.progress.kind == "key_step":
            counts[element.progress.target] += 1
    covered = tuple(k for k, n in counts.items() if n == 1)
    uncovered = tuple(k for k, n in counts.items() if n == 0)
    duplicated = tuple(k for k, n in counts.items() if n > 1)
    return KeyStepCoverage(covered=covered, uncovered=uncovered, duplicated=duplicated)
