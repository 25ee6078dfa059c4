"""Provider-backed agents: memory-and-prompt loop, reflection, foresight.

The base agent keeps a bounded working memory of (position, action,
response) entries and asks the provider for one chain-of-thought action
per step.  The reflective agent layers two modules on top:

* Reflection maintains a task list (new/update/delete/none) after every
  non-move action, with a rule-based fast path for clear-cut updates and
  deletes.
* Foresight proposes validated hypothesis actions when a new tool is
  collected or a new task appears; the agent then drains that queue
  sequentially (each trial is a counted step) before exploring freely
  again.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field

from .actions import Action, ActionParseError, make_action
from .engine import ActionOutcome
from .harness import EpisodeContext, StepView
from .prompts import (
    ACTION_SYSTEM_INSTRUCTION,
    FORESIGHT_NEW_TASK_INSTRUCTION,
    FORESIGHT_NEW_TOOL_INSTRUCTION,
    REFLECTION_SYSTEM_INSTRUCTION,
    TASK_ENTRY_TEMPLATE,
    render_action_user_prompt,
    render_memory,
    render_new_task_user_prompt,
    render_new_tool_user_prompt,
    render_position,
    render_reflection_user_prompt,
    render_task_list,
)
from .providers import ProviderRequest, TextProvider

_TASKS_RENDERED_AT_MOST = 20


@dataclass(frozen=True)
class MemoryEntry:
    index: int
    position: str
    action: str
    response: str


class WorkingMemory:
    """Bounded queue of recent steps; oldest entries fall off."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._entries: deque[MemoryEntry] = deque(maxlen=capacity)

    def add(self, entry: MemoryEntry) -> None:
        self._entries.append(entry)

    def entries(self) -> tuple[MemoryEntry, ...]:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)


# --------------------------------------------------------------------------
# Task list
# --------------------------------------------------------------------------


@dataclass
class Task:
    index: int
    name: str
    target_item: str
    description: str

    def render(self) -> str:
        return TASK_ENTRY_TEMPLATE.format(
            index=self.index, name=self.name, target=self.target_item, description=self.description
        )


@dataclass(frozen=True)
class TaskDelta:
    op: str  # new | update | delete | none
    task_index: int | None = None
    name: str | None = None
    target_item: str | None = None
    description: str | None = None
    rule_based: bool = False

    def to_json(self) -> dict:
        return {
            "op": self.op,
            "task_index": self.task_index,
            "name": self.name,
            "target_item": self.target_item,
            "description": self.description,
            "rule_based": self.rule_based,
        }


@dataclass
class TaskList:
    tasks: list[Task] = field(default_factory=list)
    next_index: int = 1

    def find_by_target(self, target: str) -> Task | None:
        wanted = target.strip().casefold()
        for task in self.tasks:
            if task.target_item.strip().casefold() == wanted:
                return task
        return None

    def find_by_index(self, index: int) -> Task | None:
        for task in self.tasks:
            if task.index == index:
                return task
        return None

    def apply(self, delta: TaskDelta) -> Task | None:
        """Mutate per the delta; returns the task created by ``new``."""
        if delta.op == "new":
            task = Task(
                index=self.next_index,
                name=delta.name,
                target_item=delta.target_item,
                description=delta.description or "",
            )
            self.next_index += 1
            self.tasks.append(task)
            return task
        if delta.op == "update":
            task = self.find_by_index(delta.task_index)
            if task is not None:
                task.description = delta.description
            return None
        if delta.op == "delete":
            task = self.find_by_index(delta.task_index)
            if task is not None:
                self.tasks.remove(task)
            return None
        return None

    def rendered_for_prompt(self) -> str:
        recent_first = list(reversed(self.tasks))[:_TASKS_RENDERED_AT_MOST]
        return render_task_list(recent_first)


_DELTA_RE = re.compile(r"\b(update|new|delete|none)\s*\(([^()]*)\)")


def parse_task_delta(raw: str) -> tuple[str, str] | None:
    """Last task-list call in free text, as (op, argument text)."""
    last = None
    for match in _DELTA_RE.finditer(raw or ""):
        last = (match.group(1).lower(), match.group(2).strip())
    return last


# --------------------------------------------------------------------------
# Reflection
# --------------------------------------------------------------------------


def action_target(action: Action) -> str | None:
    """The scene object an action is aimed at, if any."""
    if action.verb in ("click",):
        return action.args[0]
    if action.verb in ("apply", "input"):
        return action.args[1]
    return None


def reflect(
    tasklist: TaskList,
    action: Action,
    outcome: ActionOutcome,
    provider: TextProvider,
    *,
    object_exists,
) -> TaskDelta | None:
    """Maintain the task list after a non-move action.

    Rule-based fast path first: a failed attempt on a task's target item
    appends to that task, and a progress-making success on a task's
    target item deletes it.  Everything else consults the provider.
    Applies the resulting delta and returns it (None when nothing
    changed).
    """
    if action.verb == "move":
        raise ValueError("reflection is never triggered by move actions")

    target = action_target(action)
    task = tasklist.find_by_target(target) if target else None
    if task is not None:
        if outcome.success and outcome.progress.kind != "none":
            delta = TaskDelta(
                op="delete",
                task_index=task.index,
                target_item=task.target_item,
                rule_based=True,
            )
            tasklist.apply(delta)
            return delta
        if not outcome.success:
            delta = TaskDelta(
                op="update",
                task_index=task.index,
                description=f"{task.description} I try {action.render()} but fails.".strip(),
                rule_based=True,
            )
            tasklist.apply(delta)
            return delta

    request = ProviderRequest(
        system=REFLECTION_SYSTEM_INSTRUCTION,
        user=render_reflection_user_prompt(
            tasklist.rendered_for_prompt(), action, outcome.feedback
        ),
    )
    reply = provider.complete(request).text
    parsed = parse_task_delta(reply)
    if parsed is None:
        return None
    op, argtext = parsed
    if op == "none":
        return None
    if op == "delete":
        try:
            index = int(argtext)
        except ValueError:
            return None
        if tasklist.find_by_index(index) is None:
            return None
        delta = TaskDelta(op="delete", task_index=index)
        tasklist.apply(delta)
        return delta
    if op == "update":
        if task is None or not argtext:
            return None
        delta = TaskDelta(op="update", task_index=task.index, description=argtext)
        tasklist.apply(delta)
        return delta
    if op == "new":
        head, _, rest = argtext.partition(",")
        name, description = head.strip(), rest.strip()
        if not name or not description:
            return None
        if target is None or not object_exists(target):
            return None  # a task must aim at a real scenario object
        if tasklist.find_by_target(target) is not None:
            return None  # one task per target item
        delta = TaskDelta(op="new", name=name, target_item=target, description=description)
        tasklist.apply(delta)
        return delta
    return None


# --------------------------------------------------------------------------
# Foresight
# --------------------------------------------------------------------------

_HYPOTHESIS_RE = re.compile(r"\b(click|apply|input|craft)\s*\(([^()]*)\)")


def _parse_hypotheses(raw: str, allowed_verbs: tuple[str, ...]) -> list[Action]:
    actions: list[Action] = []
    for match in _HYPOTHESIS_RE.finditer(raw or ""):
        verb = match.group(1).lower()
        if verb not in allowed_verbs:
            continue
        args = [a.strip() for a in match.group(2).split(",")]
        try:
            action = make_action(verb, *args)
        except ActionParseError:
            continue
        actions.append(action)
    return actions


def _render_bag(bag_items: list[tuple[str, str]]) -> str:
    if not bag_items:
        return "(bag is empty)"
    return "\n".join(f"<applicable tool> {name}: {desc}" for name, desc in bag_items)


def foresee_on_tool(
    tool_name: str,
    tool_desc: str,
    tasklist: TaskList,
    bag_items: list[tuple[str, str]],
    provider: TextProvider,
    *,
    object_exists,
) -> list[Action]:
    """Hypotheses for a freshly collected tool: craft with bag, apply to tasks."""
    request = ProviderRequest(
        system=FORESIGHT_NEW_TOOL_INSTRUCTION,
        user=render_new_tool_user_prompt(
            tool_name, tool_desc, tasklist.rendered_for_prompt(), _render_bag(bag_items)
        ),
    )
    reply = provider.complete(request).text
    bag_names = {name.casefold() for name, _ in bag_items}
    hypotheses: list[Action] = []
    for action in _parse_hypotheses(reply, ("craft", "apply")):
        if action.verb == "craft":
            a, b = (arg.casefold() for arg in action.args)
            if a in bag_names and b in bag_names and a != b:
                hypotheses.append(action)
        else:
            tool, target = action.args
            if tool.casefold() in bag_names and object_exists(target):
                hypotheses.append(action)
    return _dedupe(hypotheses)


def foresee_on_task(
    task: Task,
    bag_items: list[tuple[str, str]],
    memory: WorkingMemory,
    provider: TextProvider,
    *,
    object_exists,
) -> list[Action]:
    """Hypotheses for a freshly identified task: click, apply, or input."""
    request = ProviderRequest(
        system=FORESIGHT_NEW_TASK_INSTRUCTION,
        user=render_new_task_user_prompt(
            task.render(), _render_bag(bag_items), render_memory(memory.entries())
        ),
    )
    reply = provider.complete(request).text
    bag_names = {name.casefold() for name, _ in bag_items}
    hypotheses: list[Action] = []
    for action in _parse_hypotheses(reply, ("click", "apply", "input")):
        if action.verb == "click":
            if object_exists(action.args[0]):
                hypotheses.append(action)
        elif action.verb == "apply":
            tool, target = action.args
            if tool.casefold() in bag_names and object_exists(target):
                hypotheses.append(action)
        else:  # input
            if object_exists(action.args[1]):
                hypotheses.append(action)
    return _dedupe(hypotheses)


def _dedupe(actions: list[Action]) -> list[Action]:
    seen: set[tuple] = set()
    unique: list[Action] = []
    for action in actions:
        key = action.key()
        if key not in seen:
            seen.add(key)
            unique.append(action)
    return unique


# --------------------------------------------------------------------------
# Agents
# --------------------------------------------------------------------------


class BaseAgent:
    """Working memory plus one chain-of-thought provider call per step."""

    def __init__(self, provider: TextProvider):
        self.provider = provider
        self.memory: WorkingMemory | None = None
        self._scenario = None

    def begin(self, ctx: EpisodeContext) -> None:
        self.memory = WorkingMemory(ctx.config.memory_capacity)
        self._scenario = ctx.scenario

    def act(self, view: StepView) -> str:
        request = ProviderRequest(
            system=ACTION_SYSTEM_INSTRUCTION,
            user=render_action_user_prompt(
                render_memory(self.memory.entries()),
                view.observation_text,
                view.hint,
                task_list_text=self._task_list_text(),
                retry_error=view.retry_error,
            ),
        )
        return self.provider.complete(request).text

    def observe(self, view: StepView, action: Action | None, outcome: ActionOutcome):
        self.memory.add(
            MemoryEntry(
                index=view.index,
                position=render_position(view.position_path),
                action=action.render() if action else "(malformed action)",
                response=outcome.feedback,
            )
        )
        return None

    def _task_list_text(self) -> str | None:
        return None

    def _object_exists(self, name: str) -> bool:
        return (
            self._scenario.find_item(name) is not None
            or self._scenario.find_tool(name) is not None
        )


@dataclass
class QueuedTrial:
    action: Action
    origin: str  # "tool:<name>" or "task:<index>"


class ReflectiveAgent(BaseAgent):
    """Base agent extended with task-list reflection and tool-use foresight.

    Mode machine: a non-empty hypothesis queue means Try Action (drain it
    one counted step at a time until one succeeds or the queue empties);
    otherwise Free Explore via the base loop.  An active harness hint
    preempts the queue.
    """

    def __init__(self, provider: TextProvider, reflection_provider: TextProvider | None = None):
        super().__init__(provider)
        self.reflection_provider = reflection_provider or provider
        self.tasklist = TaskList()
        self.queue: deque[QueuedTrial] = deque()

    def begin(self, ctx: EpisodeContext) -> None:
        super().begin(ctx)
        self.tasklist = TaskList()
        self.queue = deque()

    @property
    def mode(self) -> str:
        return "try_action" if self.queue else "free_explore"

    def act(self, view: StepView) -> str:
        if view.hint is not None:
            return super().act(view)  # the hint must be followed first
        if self.queue:
            return self.queue[0].action.render()
        return super().act(view)

    def observe(self, view: StepView, action: Action | None, outcome: ActionOutcome):
        super().observe(view, action, outcome)

        if (
            self.queue
            and view.hint is None
            and action is not None
            and action.matches(self.queue[0].action)
        ):
            self.queue.popleft()
            if outcome.success:
                self.queue.clear()

        delta = None
        new_task: Task | None = None
        if action is not None and action.verb != "move":
            delta = reflect(
                self.tasklist,
                action,
                outcome,
                self.reflection_provider,
                object_exists=self._object_exists,
            )
            if delta is not None and delta.op == "new":
                new_task = self.tasklist.tasks[-1]

        bag_items = self._bag_items(view, outcome)
        for tool_name in outcome.tools_gained:
            hypotheses = foresee_on_tool(
                tool_name,
                self._tool_desc(view, tool_name),
                self.tasklist,
                bag_items,
                self.provider,
                object_exists=self._object_exists,
            )
            self._enqueue(hypotheses, origin=f"tool:{tool_name}")
        if new_task is not None:
            hypotheses = foresee_on_task(
                new_task,
                bag_items,
                self.memory,
                self.provider,
                object_exists=self._object_exists,
            )
            self._enqueue(hypotheses, origin=f"task:{new_task.index}")

        return delta.to_json() if delta is not None else None

    def _task_list_text(self) -> str:
        return self.tasklist.rendered_for_prompt()

    def _enqueue(self, hypotheses: list[Action], origin: str) -> None:
        queued_keys = {trial.action.key() for trial in self.queue}
        for action in hypotheses:
            if action.key() not in queued_keys:
                queued_keys.add(action.key())
                self.queue.append(QueuedTrial(action=action, origin=origin))

    def _bag_items(self, view: StepView, outcome: ActionOutcome) -> list[tuple[str, str]]:
        state = view.state
        names = sorted(state.bag)
        return [
            (
                name,
                self._scenario.tools_by_name[name]
                .states[state.tool_state[name]]
                .desc.resolve(state.difficulty),
            )
            for name in names
        ]

    def _tool_desc(self, view: StepView, tool_name: str) -> str:
        state = view.state
        tool = self._scenario.tools_by_name.get(tool_name)
        if tool is None:
            return tool_name
        return tool.states[state.tool_state[tool_name]].desc.resolve(state.difficulty)
