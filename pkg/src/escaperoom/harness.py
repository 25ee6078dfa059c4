"""Episode runner: policies against sessions, hints, metrics, transcripts.

The stuck-detection protocol: a counter of consecutive non-progress steps
triggers a hint at the configured threshold.  The hint names the first
chain element the player has not completed (skipping pure navigation,
which folds into the next element's target location) and stays active,
with the counter frozen, until that element is done; completing it resets
the counter.  Explicit hint requests (human sessions) share the same
bookkeeping and the same hints-used ledger.

SessionTracker is the single home of that bookkeeping: the episode loop,
the transcript replay verifier, and the HTTP service all drive it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol

from .actions import Action, ActionParseError, parse_action
from .engine import (
    ActionOutcome,
    GameState,
    Observation,
    SessionOver,
    new_session,
    observe,
    step,
)
from .scenario import Scenario
from .solver import ChainElement, OracleChain, obtain_chain

PARSE_FAILURE_FEEDBACK = (
    "Could not parse an action from your reply. Use exactly one action call, "
    "for example click(door) or apply(key, locked cabinet)."
)

HINT_TEMPLATE = (
    "Since you're stuck, the system will provide you with a hint. "
    "You MUST follow the hint to complete next key step.\n"
    "The next target location should be: {position}.\n"
    "Your next target action should be: {action}.\n"
    "You should go to the target position and perform the target action. "
    "If you are already at the target location, please directly perform the action."
)


class IntegrityError(RuntimeError):
    """Chain and session disagree: the chain is exhausted mid-game."""


# --------------------------------------------------------------------------
# Configuration, hints
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EpisodeConfig:
    hint_threshold: int = 50
    memory_capacity: int = 10
    max_total_steps: int = 5000
    difficulty: str = "normal"

    def __post_init__(self):
        if self.hint_threshold < 1:
            raise ValueError("hint_threshold must be >= 1")
        if self.memory_capacity < 1:
            raise ValueError("memory_capacity must be >= 1")

    def to_json(self) -> dict:
        return {
            "hint_threshold": self.hint_threshold,
            "memory_capacity": self.memory_capacity,
            "max_total_steps": self.max_total_steps,
            "difficulty": self.difficulty,
        }

    @staticmethod
    def from_json(doc: dict) -> "EpisodeConfig":
        return EpisodeConfig(
            hint_threshold=doc["hint_threshold"],
            memory_capacity=doc["memory_capacity"],
            max_total_steps=doc["max_total_steps"],
            difficulty=doc["difficulty"],
        )


@dataclass(frozen=True)
class HintText:
    text: str
    target_scene: str
    target_action: Action
    chain_index: int
    progress_kind: str


@dataclass
class HintState:
    active: HintText | None = None
    issued_at_step: int | None = None


def element_completed(element: ChainElement, state: GameState) -> bool:
    """Has the session already achieved this chain element?

    Either the exact action succeeded in the element's scene, or the
    progress the element stands for happened by another route (a tool
    collected by crafting instead of clicking still completes a
    collection element).
    """
    if (element.scene.casefold(), element.action.key()) in state.succeeded_actions:
        return True
    if element.progress.kind == "key_step":
        return element.progress.target in state.completed_key_steps
    if element.progress.kind == "tool_collected":
        return element.progress.target in state.tools_collected_ever
    return False


def provide_hint(chain: OracleChain, state: GameState) -> HintText:
    """The first uncompleted non-move chain element, as an instruction.

    Later elements may already be done out of order; the earliest gap
    still wins.  Raises IntegrityError if everything is completed yet the
    game is not over.
    """
    for index, element in enumerate(chain.elements):
        if element.action.verb == "move":
            continue
        if element_completed(element, state):
            continue
        return _format_hint(state.scenario, element, index)
    raise IntegrityError("oracle chain exhausted while the game is not over")


def _format_hint(scenario: Scenario, element: ChainElement, index: int) -> HintText:
    text = HINT_TEMPLATE.format(position=element.scene, action=element.action.render())
    if element.progress.kind == "key_step":
        for key_step in scenario.key_steps:
            if key_step.id == element.progress.target:
                text += f"\nHint: {key_step.hint_text}"
                break
    return HintText(
        text=text,
        target_scene=element.scene,
        target_action=element.action,
        chain_index=index,
        progress_kind=element.progress.kind,
    )


# --------------------------------------------------------------------------
# Records
# --------------------------------------------------------------------------


@dataclass
class StepEntry:
    index: int  # 1-based
    scene: str
    observation_digest: str
    action_raw: str
    action: Action | None  # None when the raw text never parsed
    outcome: ActionOutcome
    hint_active: bool
    hint_issued: bool
    task_delta: dict | None = None

    def to_json(self) -> dict:
        return {
            "type": "step",
            "index": self.index,
            "scene": self.scene,
            "observation_digest": self.observation_digest,
            "action_raw": self.action_raw,
            "action": self.action.render() if self.action else None,
            **self.outcome.to_json(),
            "hint_active": self.hint_active,
            "hint_issued": self.hint_issued,
            "task_delta": self.task_delta,
        }

    @staticmethod
    def from_json(doc: dict) -> "StepEntry":
        return StepEntry(
            index=doc["index"],
            scene=doc["scene"],
            observation_digest=doc["observation_digest"],
            action_raw=doc["action_raw"],
            action=parse_action(doc["action"]) if doc.get("action") else None,
            outcome=ActionOutcome.from_json(doc),
            hint_active=doc["hint_active"],
            hint_issued=doc["hint_issued"],
            task_delta=doc.get("task_delta"),
        )


@dataclass
class HintEvent:
    after_step: int
    chain_index: int
    progress_kind: str
    explicit: bool
    text: str

    def to_json(self) -> dict:
        return {
            "type": "hint",
            "after_step": self.after_step,
            "chain_index": self.chain_index,
            "progress_kind": self.progress_kind,
            "explicit": self.explicit,
            "text": self.text,
        }

    @staticmethod
    def from_json(doc: dict) -> "HintEvent":
        return HintEvent(
            after_step=doc["after_step"],
            chain_index=doc["chain_index"],
            progress_kind=doc["progress_kind"],
            explicit=doc["explicit"],
            text=doc["text"],
        )


@dataclass(frozen=True)
class HintUsage:
    count: int
    percent: float

    def to_json(self) -> dict:
        return {"count": self.count, "percent": self.percent}


@dataclass(frozen=True)
class EpisodeMetrics:
    hints_used: int
    total_steps: int
    early_exit_progress: float
    tool_hints: HintUsage
    key_step_hints: HintUsage
    pre_hint_progress: int
    progress_total: int
    total_tools: int
    total_key_steps: int

    def to_json(self) -> dict:
        return {
            "type": "metrics",
            "hints_used": self.hints_used,
            "total_steps": self.total_steps,
            "early_exit_progress": self.early_exit_progress,
            "tool_hints": self.tool_hints.to_json(),
            "key_step_hints": self.key_step_hints.to_json(),
            "pre_hint_progress": self.pre_hint_progress,
            "progress_total": self.progress_total,
            "total_tools": self.total_tools,
            "total_key_steps": self.total_key_steps,
        }

    @staticmethod
    def from_json(doc: dict) -> "EpisodeMetrics":
        return EpisodeMetrics(
            hints_used=doc["hints_used"],
            total_steps=doc["total_steps"],
            early_exit_progress=doc["early_exit_progress"],
            tool_hints=HintUsage(**doc["tool_hints"]),
            key_step_hints=HintUsage(**doc["key_step_hints"]),
            pre_hint_progress=doc["pre_hint_progress"],
            progress_total=doc["progress_total"],
            total_tools=doc["total_tools"],
            total_key_steps=doc["total_key_steps"],
        )


@dataclass
class EpisodeRecord:
    scenario_name: str
    difficulty: str
    config: EpisodeConfig
    total_tools: int
    total_key_steps: int
    chain_length: int
    role: str = "agent"
    steps: list[StepEntry] = field(default_factory=list)
    hint_events: list[HintEvent] = field(default_factory=list)
    completed: bool = False
    cap_exceeded: bool = False
    metrics: EpisodeMetrics | None = None


# --------------------------------------------------------------------------
# Session tracker: engine session + hint protocol + transcript
# --------------------------------------------------------------------------


class SessionTracker:
    """One playable session with hint bookkeeping and a growing record."""

    def __init__(
        self,
        scenario: Scenario,
        config: EpisodeConfig,
        chain: OracleChain,
        role: str = "agent",
    ):
        stats = scenario.stats()
        self.scenario = scenario
        self.config = config
        self.chain = chain
        self.record = EpisodeRecord(
            scenario_name=scenario.name,
            difficulty=config.difficulty,
            config=config,
            total_tools=stats.tools,
            total_key_steps=stats.key_steps,
            chain_length=chain.length,
            role=role,
        )
        self.state = new_session(scenario, config.difficulty)
        self.hint = HintState()
        self.non_progress = 0

    @property
    def finished(self) -> bool:
        return self.state.game_over or len(self.record.steps) >= self.config.max_total_steps

    @property
    def active_hint(self) -> HintText | None:
        return self.hint.active

    def observation(self) -> Observation:
        return observe(self.state)

    def submit_text(self, raw: str) -> StepEntry:
        """Parse and execute raw action text; unparsable text still counts."""
        try:
            action = parse_action(raw)
        except ActionParseError:
            action = None
        return self.record_step(raw, action)

    def record_step(self, raw: str, action: Action | None) -> StepEntry:
        if self.finished:
            raise SessionOver("session is finished")
        observation_text = observe(self.state).render()
        scene_before = self.state.current_scene
        if action is not None:
            outcome = step(self.state, action)
        else:
            outcome = ActionOutcome(
                success=False, feedback=PARSE_FAILURE_FEEDBACK, failure="parse-error"
            )
        entry = StepEntry(
            index=len(self.record.steps) + 1,
            scene=scene_before,
            observation_digest=digest(observation_text),
            action_raw=raw,
            action=action,
            outcome=outcome,
            hint_active=self.hint.active is not None,
            hint_issued=False,
        )
        self.record.steps.append(entry)
        self._track_hints(entry, outcome)
        if self.finished:
            self.finalize()
        return entry

    def _track_hints(self, entry: StepEntry, outcome: ActionOutcome) -> None:
        if self.hint.active is not None:
            # Counter frozen while a hint is pending; completion resets it.
            target = self.chain.elements[self.hint.active.chain_index]
            if element_completed(target, self.state):
                self.hint.active = None
                self.non_progress = 0
            return
        if outcome.progress.kind != "none":
            self.non_progress = 0
        else:
            self.non_progress += 1
        if self.non_progress >= self.config.hint_threshold and not self.state.game_over:
            hint = provide_hint(self.chain, self.state)
            self.hint.active = hint
            self.hint.issued_at_step = entry.index
            entry.hint_issued = True
            self.record.hint_events.append(
                HintEvent(
                    after_step=entry.index,
                    chain_index=hint.chain_index,
                    progress_kind=hint.progress_kind,
                    explicit=False,
                    text=hint.text,
                )
            )

    def request_hint(self) -> tuple[HintText, bool]:
        """Explicit hint request; re-requests while active do not re-count."""
        if self.finished:
            raise SessionOver("session is finished")
        if self.hint.active is not None:
            return self.hint.active, False
        hint = provide_hint(self.chain, self.state)
        self.hint.active = hint
        self.hint.issued_at_step = len(self.record.steps)
        self.record.hint_events.append(
            HintEvent(
                after_step=len(self.record.steps),
                chain_index=hint.chain_index,
                progress_kind=hint.progress_kind,
                explicit=True,
                text=hint.text,
            )
        )
        return hint, True

    def metrics(self) -> EpisodeMetrics:
        return compute_metrics(self.record)

    def finalize(self) -> EpisodeRecord:
        self.record.completed = self.state.game_over
        self.record.cap_exceeded = (
            not self.state.game_over
            and len(self.record.steps) >= self.config.max_total_steps
        )
        self.record.metrics = compute_metrics(self.record)
        return self.record

    # -- persistence (service idle sessions) -------------------------------

    def to_json(self) -> dict:
        from .engine import snapshot

        return {
            "state_blob": snapshot(self.state).decode("utf-8"),
            "config": self.config.to_json(),
            "role": self.record.role,
            "non_progress": self.non_progress,
            "active_hint_index": (
                self.hint.active.chain_index if self.hint.active else None
            ),
            "issued_at_step": self.hint.issued_at_step,
            "steps": [entry.to_json() for entry in self.record.steps],
            "hint_events": [event.to_json() for event in self.record.hint_events],
        }

    @staticmethod
    def from_json(doc: dict, scenario: Scenario, chain: OracleChain) -> "SessionTracker":
        from .engine import restore

        tracker = SessionTracker(
            scenario, EpisodeConfig.from_json(doc["config"]), chain, role=doc["role"]
        )
        tracker.state = restore(doc["state_blob"].encode("utf-8"), scenario)
        tracker.non_progress = doc["non_progress"]
        tracker.record.steps = [StepEntry.from_json(d) for d in doc["steps"]]
        tracker.record.hint_events = [HintEvent.from_json(d) for d in doc["hint_events"]]
        if doc["active_hint_index"] is not None:
            element = chain.elements[doc["active_hint_index"]]
            tracker.hint.active = _format_hint(scenario, element, doc["active_hint_index"])
            tracker.hint.issued_at_step = doc["issued_at_step"]
        if tracker.finished:
            tracker.finalize()
        return tracker


# --------------------------------------------------------------------------
# Policy protocol and the episode loop
# --------------------------------------------------------------------------


@dataclass
class EpisodeContext:
    scenario: Scenario
    config: EpisodeConfig
    chain: OracleChain


@dataclass
class StepView:
    """Everything a policy may look at before acting.

    ``state`` is for scripted test policies (navigation, candidate
    enumeration); provider-backed agents read only the rendered
    observation, the hint, the position path and the bag.
    """

    index: int
    observation: Observation
    observation_text: str
    hint: HintText | None
    position_path: tuple[str, ...]
    bag: tuple[str, ...]
    state: GameState
    retry_error: str | None = None


class Policy(Protocol):
    def begin(self, ctx: EpisodeContext) -> None: ...

    def act(self, view: StepView) -> str: ...

    def observe(
        self, view: StepView, action: Action | None, outcome: ActionOutcome
    ) -> dict | None: ...


_PARSE_RETRIES = 2


def run_episode(
    policy: Policy,
    scenario: Scenario,
    config: EpisodeConfig | None = None,
    chain: OracleChain | None = None,
) -> EpisodeRecord:
    config = config or EpisodeConfig()
    if chain is None:
        chain = obtain_chain(scenario)
    tracker = SessionTracker(scenario, config, chain)
    policy.begin(EpisodeContext(scenario=scenario, config=config, chain=chain))

    while not tracker.finished:
        observation = tracker.observation()
        view = StepView(
            index=len(tracker.record.steps) + 1,
            observation=observation,
            observation_text=observation.render(),
            hint=tracker.active_hint,
            position_path=tuple(tracker.state.path_trace),
            bag=tuple(sorted(tracker.state.bag)),
            state=tracker.state,
        )
        raw, action = _ask_policy(policy, view)
        entry = tracker.record_step(raw, action)
        entry.task_delta = policy.observe(view, action, entry.outcome)

    return tracker.finalize()


def _ask_policy(policy: Policy, view: StepView) -> tuple[str, Action | None]:
    raw = policy.act(view)
    for _ in range(_PARSE_RETRIES):
        try:
            return raw, parse_action(raw)
        except ActionParseError as exc:
            view.retry_error = str(exc)
            raw = policy.act(view)
    try:
        return raw, parse_action(raw)
    except ActionParseError:
        return raw, None
    finally:
        view.retry_error = None


def digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


# --------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------


def compute_metrics(record: EpisodeRecord) -> EpisodeMetrics:
    hints_used = len(record.hint_events)
    total_steps = len(record.steps)

    first_hint_step = min(
        (event.after_step for event in record.hint_events), default=None
    )
    pre_key_steps: set[str] = set()
    pre_tools: set[str] = set()
    for entry in record.steps:
        if first_hint_step is not None and entry.index > first_hint_step:
            break
        if entry.outcome.progress.kind == "key_step":
            pre_key_steps.add(entry.outcome.progress.target)
        pre_tools.update(entry.outcome.tools_gained)

    tool_hint_count = sum(1 for e in record.hint_events if e.progress_kind == "tool_collected")
    # A hint toward an intermediate (progress-less) element still guides a
    # bottleneck action, so it lands in the key-step bucket.
    key_hint_count = hints_used - tool_hint_count

    progress_total = record.total_key_steps + record.total_tools
    pre_hint_progress = len(pre_key_steps) + len(pre_tools)
    return EpisodeMetrics(
        hints_used=hints_used,
        total_steps=total_steps,
        early_exit_progress=_percent(pre_hint_progress, progress_total),
        tool_hints=HintUsage(tool_hint_count, _percent(tool_hint_count, record.total_tools)),
        key_step_hints=HintUsage(key_hint_count, _percent(key_hint_count, record.total_key_steps)),
        pre_hint_progress=pre_hint_progress,
        progress_total=progress_total,
        total_tools=record.total_tools,
        total_key_steps=record.total_key_steps,
    )


def _percent(numerator: int, denominator: int) -> float:
    return 100.0 * numerator / denominator if denominator else 0.0


@dataclass(frozen=True)
class SuiteMetrics:
    episodes: int
    mean_hints_used: float
    mean_total_steps: float
    early_exit_progress: float  # micro-averaged
    tool_hint_percent: float  # micro-averaged
    key_step_hint_percent: float  # micro-averaged
    by_difficulty: dict[str, "SuiteMetrics"] = field(default_factory=dict)

    def to_json(self) -> dict:
        doc = {
            "episodes": self.episodes,
            "mean_hints_used": self.mean_hints_used,
            "mean_total_steps": self.mean_total_steps,
            "early_exit_progress": self.early_exit_progress,
            "tool_hint_percent": self.tool_hint_percent,
            "key_step_hint_percent": self.key_step_hint_percent,
        }
        if self.by_difficulty:
            doc["by_difficulty"] = {k: v.to_json() for k, v in self.by_difficulty.items()}
        return doc


def aggregate(records: list[EpisodeRecord]) -> SuiteMetrics:
    """Micro-average percentage metrics; plain means for the counts."""
    if not records:
        raise ValueError("aggregate needs at least one record")
    overall = _aggregate_flat(records)
    groups: dict[str, list[EpisodeRecord]] = {}
    for record in records:
        groups.setdefault(record.difficulty, []).append(record)
    by_difficulty = (
        {level: _aggregate_flat(recs) for level, recs in sorted(groups.items())}
        if len(groups) > 1
        else {}
    )
    return replace(overall, by_difficulty=by_difficulty)


def _aggregate_flat(records: list[EpisodeRecord]) -> SuiteMetrics:
    metrics = [r.metrics or compute_metrics(r) for r in records]
    count = len(metrics)
    return SuiteMetrics(
        episodes=count,
        mean_hints_used=sum(m.hints_used for m in metrics) / count,
        mean_total_steps=sum(m.total_steps for m in metrics) / count,
        early_exit_progress=_percent(
            sum(m.pre_hint_progress for m in metrics), sum(m.progress_total for m in metrics)
        ),
        tool_hint_percent=_percent(
            sum(m.tool_hints.count for m in metrics), sum(m.total_tools for m in metrics)
        ),
        key_step_hint_percent=_percent(
            sum(m.key_step_hints.count for m in metrics), sum(m.total_key_steps for m in metrics)
        ),
    )


# --------------------------------------------------------------------------
# Transcript persistence and replay
# --------------------------------------------------------------------------


def dump_record(record: EpisodeRecord, path: str | Path) -> None:
    """One step per line, hint events interleaved, metrics trailing."""
    Path(path).write_text(render_transcript(record), encoding="utf-8")


def render_transcript(record: EpisodeRecord) -> str:
    lines = [
        json.dumps(
            {
                "type": "header",
                "format_version": 1,
                "scenario": record.scenario_name,
                "difficulty": record.difficulty,
                "config": record.config.to_json(),
                "role": record.role,
                "total_tools": record.total_tools,
                "total_key_steps": record.total_key_steps,
                "chain_length": record.chain_length,
                "completed": record.completed,
                "cap_exceeded": record.cap_exceeded,
            }
        )
    ]
    events_by_step: dict[int, list[HintEvent]] = {}
    for event in record.hint_events:
        events_by_step.setdefault(event.after_step, []).append(event)
    for event in events_by_step.get(0, []):
        lines.append(json.dumps(event.to_json()))  # hint requested before any action
    for entry in record.steps:
        lines.append(json.dumps(entry.to_json()))
        for event in events_by_step.get(entry.index, []):
            lines.append(json.dumps(event.to_json()))
    metrics = record.metrics or compute_metrics(record)
    lines.append(json.dumps(metrics.to_json()))
    return "\n".join(lines) + "\n"


def load_record(path: str | Path) -> EpisodeRecord:
    return parse_transcript(Path(path).read_text(encoding="utf-8"))


def parse_transcript(text: str) -> EpisodeRecord:
    header = None
    steps: list[StepEntry] = []
    hint_events: list[HintEvent] = []
    metrics = None
    for line in text.splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        kind = doc.get("type")
        if kind == "header":
            header = doc
        elif kind == "step":
            steps.append(StepEntry.from_json(doc))
        elif kind == "hint":
            hint_events.append(HintEvent.from_json(doc))
        elif kind == "metrics":
            metrics = EpisodeMetrics.from_json(doc)
        else:
            raise ValueError(f"unknown transcript line type {kind!r}")
    if header is None:
        raise ValueError("transcript has no header line")
    return EpisodeRecord(
        scenario_name=header["scenario"],
        difficulty=header["difficulty"],
        config=EpisodeConfig.from_json(header["config"]),
        total_tools=header["total_tools"],
        total_key_steps=header["total_key_steps"],
        chain_length=header["chain_length"],
        role=header.get("role", "agent"),
        steps=steps,
        hint_events=hint_events,
        completed=header["completed"],
        cap_exceeded=header["cap_exceeded"],
        metrics=metrics,
    )


def replay_record(
    record: EpisodeRecord, scenario: Scenario, chain: OracleChain | None = None
) -> EpisodeRecord:
    """Re-execute a transcript's action column through a fresh session.

    Threshold hints are re-derived; explicit (requested) hints are
    injected where the record says they happened.
    """
    if chain is None:
        chain = obtain_chain(scenario)
    tracker = SessionTracker(scenario, record.config, chain, role=record.role)
    explicit_after = {event.after_step for event in record.hint_events if event.explicit}
    if 0 in explicit_after:
        tracker.request_hint()
    for old in record.steps:
        if tracker.finished:
            break
        entry = tracker.record_step(old.action_raw, old.action)
        entry.task_delta = old.task_delta
        if entry.index in explicit_after and not tracker.finished:
            tracker.request_hint()
    return tracker.finalize()


def verify_replay(
    record: EpisodeRecord, scenario: Scenario, chain: OracleChain | None = None
) -> list[str]:
    """Differences between a record and its replay; empty means faithful."""
    fresh = replay_record(record, scenario, chain=chain)
    problems: list[str] = []
    if len(fresh.steps) != len(record.steps):
        problems.append(f"step count {len(record.steps)} != replay {len(fresh.steps)}")
    for old, new in zip(record.steps, fresh.steps):
        for field_name in ("observation_digest", "hint_active", "hint_issued"):
            if getattr(old, field_name) != getattr(new, field_name):
                problems.append(
                    f"step {old.index}: {field_name} {getattr(old, field_name)!r} "
                    f"!= replay {getattr(new, field_name)!r}"
                )
        if old.outcome != new.outcome:
            problems.append(f"step {old.index}: outcome differs")
    if record.completed != fresh.completed:
        problems.append(f"completed {record.completed} != replay {fresh.completed}")
    old_metrics = record.metrics or compute_metrics(record)
    if old_metrics != fresh.metrics:
        problems.append("metrics differ on replay")
    return problems
