"""Deterministic policies for testing and baselines.

These are scripted players: the oracle walks the solver's chain, the
no-op variants stall (optionally obeying hints), and the random policy
samples seeded actions from the current candidate space.  Provider-backed
agents live in the agents module.
"""

from __future__ import annotations

import random
from collections import deque

from .actions import Action
from .engine import enumerate_actions
from .harness import EpisodeContext, StepView
from .scenario import Scenario


class OraclePolicy:
    """Plays the oracle chain verbatim; every step must succeed."""

    def __init__(self):
        self._pending: deque[Action] = deque()

    def begin(self, ctx: EpisodeContext) -> None:
        self._pending = deque(element.action for element in ctx.chain.elements)

    def act(self, view: StepView) -> str:
        if not self._pending:
            raise RuntimeError("oracle chain exhausted before game over")
        return self._pending[0].render()

    def observe(self, view, action, outcome) -> None:
        if not outcome.success:
            raise RuntimeError(f"oracle action {action.render()!r} failed: {outcome.feedback}")
        self._pending.popleft()
        return None


class NoopPolicy:
    """Always submits the same invalid action."""

    def __init__(self, action_text: str = "click(absolutely nothing)"):
        self.action_text = action_text

    def begin(self, ctx: EpisodeContext) -> None:
        pass

    def act(self, view: StepView) -> str:
        return self.action_text

    def observe(self, view, action, outcome) -> None:
        return None


class HintObedientNoopPolicy(NoopPolicy):
    """Stalls until a hint appears, then navigates to it and obeys."""

    def __init__(self, action_text: str = "click(absolutely nothing)"):
        super().__init__(action_text)
        self._scenario: Scenario | None = None

    def begin(self, ctx: EpisodeContext) -> None:
        self._scenario = ctx.scenario

    def act(self, view: StepView) -> str:
        hint = view.hint
        if hint is None:
            return self.action_text
        here = view.position_path[-1]
        if here.casefold() == hint.target_scene.casefold():
            return hint.target_action.render()
        move_label = self._next_hop(here, hint.target_scene)
        if move_label is None:
            return self.action_text
        return Action("move", (move_label,)).render()

    def _next_hop(self, source: str, destination: str) -> str | None:
        # Shortest path over the scene graph; returns the first connector label.
        frontier = deque([(source, None)])
        first_label: dict[str, str | None] = {source.casefold(): None}
        while frontier:
            scene_name, label = frontier.popleft()
            if scene_name.casefold() == destination.casefold():
                return label
            scene = self._scenario.find_scene(scene_name)
            for connector_label, connector in scene.connectors:
                key = connector.target.casefold()
                if key in first_label:
                    continue
                carried = label if label is not None else connector_label
                first_label[key] = carried
                frontier.append((connector.target, carried))
        return None


class RandomPolicy:
    """Uniform choice over plausible actions, salted with doomed ones.

    The candidate set depends only on game logic, never on difficulty, so
    seeded runs line up across easy/normal/hard.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._rng = random.Random(seed)

    def begin(self, ctx: EpisodeContext) -> None:
        self._rng = random.Random(self.seed)

    def act(self, view: StepView) -> str:
        state = view.state
        candidates = list(enumerate_actions(state))
        scene = state.scenario.find_scene(state.current_scene)
        visible_items = [i.name for i in scene.items if state.visibility[i.name]]
        bag = sorted(state.bag)
        for item_name in visible_items:
            candidates.append(Action("input", ("0000", item_name)))
            for tool_name in bag:
                candidates.append(Action("apply", (tool_name, item_name)))
        candidates.append(Action("click", ("void",)))
        candidates.sort(key=lambda a: (a.verb, a.args))
        return self._rng.choice(candidates).render()

    def observe(self, view, action, outcome) -> None:
        return None


class ScriptedPolicy:
    """Replays a fixed list of raw action texts."""

    def __init__(self, lines: list[str], fallback: str = "click(absolutely nothing)"):
        self.lines = list(lines)
        self.fallback = fallback
        self._cursor = 0

    def begin(self, ctx: EpisodeContext) -> None:
        self._cursor = 0

    def act(self, view: StepView) -> str:
        if self._cursor >= len(self.lines):
            return self.fallback
        return self.lines[self._cursor]

    def observe(self, view, action, outcome) -> None:
        if self._cursor < len(self.lines):
            self._cursor += 1
        return None
