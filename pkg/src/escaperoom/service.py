"""HTTP session service for human play and external agent processes.

Sessions live in a registry keyed by unguessable ids; requests for one
session are serialized behind its lock while distinct sessions proceed
concurrently.  Idle sessions spill to disk and restore transparently on
the next request, so long human games survive restarts.  The wire format
is plain JSON; errors carry machine-readable codes.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .actions import ActionParseError, parse_action
from .engine import Observation
from .harness import EpisodeConfig, SessionTracker, render_transcript
from .scenario import DIFFICULTIES, Scenario, load_scenario
from .solver import OracleChain, obtain_chain
from .validate import validate_scenario

DEFAULT_IDLE_TIMEOUT_S = 30 * 60


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


# --------------------------------------------------------------------------
# Registry
# --------------------------------------------------------------------------


@dataclass
class Session:
    id: str
    scenario_id: str
    role: str
    created_at: float
    tracker: SessionTracker
    lock: threading.Lock = field(default_factory=threading.Lock)
    last_active: float = 0.0
    idempotency: dict[str, dict] = field(default_factory=dict)


class SessionRegistry:
    def __init__(
        self,
        scenario_dir: str | Path | None = None,
        persist_dir: str | Path | None = None,
        idle_timeout_s: float = DEFAULT_IDLE_TIMEOUT_S,
    ):
        self.scenarios: dict[str, Scenario] = {}
        self.chains: dict[str, OracleChain] = {}
        self.sessions: dict[str, Session] = {}
        self.persist_dir = Path(persist_dir) if persist_dir else None
        self.idle_timeout_s = idle_timeout_s
        self._lock = threading.Lock()
        self._load_scenarios(scenario_dir)
        if self.persist_dir:
            self.persist_dir.mkdir(parents=True, exist_ok=True)

    def _load_scenarios(self, scenario_dir) -> None:
        from . import bundled_scenario_dir

        directories = [bundled_scenario_dir()]
        if scenario_dir:
            directories.append(Path(scenario_dir))
        for directory in directories:
            for path in sorted(directory.glob("*.yaml")):
                scenario = load_scenario(path)
                report = validate_scenario(scenario)
                if report.errors:
                    continue  # unplayable definitions never reach the registry
                self.scenarios[scenario.name] = scenario

    def chain_for(self, scenario_id: str) -> OracleChain:
        with self._lock:
            if scenario_id not in self.chains:
                self.chains[scenario_id] = obtain_chain(self.scenarios[scenario_id])
            return self.chains[scenario_id]

    def create(self, scenario_id: str, difficulty: str, role: str) -> Session:
        scenario = self.scenarios.get(scenario_id)
        if scenario is None:
            raise ServiceError(404, "unknown_scenario", f"no scenario named {scenario_id!r}")
        if difficulty not in DIFFICULTIES:
            raise ServiceError(400, "bad_difficulty", f"difficulty must be one of {DIFFICULTIES}")
        if role not in ("human", "agent"):
            raise ServiceError(400, "bad_role", "role must be 'human' or 'agent'")
        chain = self.chain_for(scenario_id)
        tracker = SessionTracker(
            scenario, EpisodeConfig(difficulty=difficulty), chain, role=role
        )
        session = Session(
            id=uuid.uuid4().hex,
            scenario_id=scenario_id,
            role=role,
            created_at=time.time(),
            tracker=tracker,
            last_active=time.time(),
        )
        with self._lock:
            self.sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self.sessions.get(session_id)
        if session is None:
            session = self._restore(session_id)
        if session is None:
            raise ServiceError(404, "unknown_session", f"no session {session_id!r}")
        session.last_active = time.time()
        return session

    # -- idle persistence ---------------------------------------------------

    def sweep_idle(self) -> int:
        """Persist and evict sessions idle beyond the timeout."""
        if not self.persist_dir:
            return 0
        now = time.time()
        evicted = 0
        with self._lock:
            for session_id, session in list(self.sessions.items()):
                if now - session.last_active < self.idle_timeout_s:
                    continue
                self._persist(session)
                del self.sessions[session_id]
                evicted += 1
        return evicted

    def _session_path(self, session_id: str) -> Path:
        return self.persist_dir / f"{session_id}.json"

    def _persist(self, session: Session) -> None:
        doc = {
            "id": session.id,
            "scenario_id": session.scenario_id,
            "role": session.role,
            "created_at": session.created_at,
            "tracker": session.tracker.to_json(),
        }
        self._session_path(session.id).write_text(json.dumps(doc), encoding="utf-8")

    def _restore(self, session_id: str) -> Session | None:
        if not self.persist_dir:
            return None
        path = self._session_path(session_id)
        if not path.exists():
            return None
        doc = json.loads(path.read_text(encoding="utf-8"))
        scenario = self.scenarios.get(doc["scenario_id"])
        if scenario is None:
            return None
        tracker = SessionTracker.from_json(
            doc["tracker"], scenario, self.chain_for(doc["scenario_id"])
        )
        session = Session(
            id=doc["id"],
            scenario_id=doc["scenario_id"],
            role=doc["role"],
            created_at=doc["created_at"],
            tracker=tracker,
            last_active=time.time(),
        )
        with self._lock:
            self.sessions[session.id] = session
        return session


# --------------------------------------------------------------------------
# Wire models
# --------------------------------------------------------------------------


class CreateSessionBody(BaseModel):
    scenario_id: str
    difficulty: str = "normal"
    role: str = "human"


class ActionBody(BaseModel):
    text: str
    idempotency_key: str | None = None


def _observation_json(observation: Observation) -> dict:
    return {
        "scene_name": observation.scene_name,
        "scene_text": observation.scene_text,
        "item_texts": list(observation.item_texts),
        "interactable_items": list(observation.interactable_items),
        "nearby_scenes": [
            {"label": label, "target": target} for label, target in observation.nearby_scenes
        ],
        "bag": [{"name": name, "desc": desc} for name, desc in observation.bag_texts],
        "text": observation.render(),
    }


def _progress_json(tracker: SessionTracker) -> dict:
    state = tracker.state
    return {
        "completed_key_steps": list(state.completed_key_steps),
        "total_key_steps": tracker.record.total_key_steps,
        "collected_tools": state.collected_tools,
        "total_tools": tracker.record.total_tools,
        "step_count": len(tracker.record.steps),
        "game_over": state.game_over,
        "hints_used": len(tracker.record.hint_events),
    }


def _session_payload(session: Session, include_observation: bool = True) -> dict:
    tracker = session.tracker
    payload = {
        "session_id": session.id,
        "scenario_id": session.scenario_id,
        "difficulty": tracker.config.difficulty,
        "role": session.role,
        "finished": tracker.finished,
        "progress": _progress_json(tracker),
        "hint": tracker.active_hint.text if tracker.active_hint else None,
    }
    if include_observation and not tracker.state.game_over:
        payload["observation"] = _observation_json(tracker.observation())
    else:
        payload["observation"] = None
    return payload


# --------------------------------------------------------------------------
# Application
# --------------------------------------------------------------------------


def create_app(
    scenario_dir: str | Path | None = None,
    persist_dir: str | Path | None = None,
    idle_timeout_s: float = DEFAULT_IDLE_TIMEOUT_S,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="escaperoom service")
    registry = SessionRegistry(
        scenario_dir=scenario_dir, persist_dir=persist_dir, idle_timeout_s=idle_timeout_s
    )
    app.state.registry = registry

    @app.exception_handler(ServiceError)
    async def service_error_handler(request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    @app.middleware("http")
    async def sweep_middleware(request: Request, call_next):
        registry.sweep_idle()
        return await call_next(request)

    @app.get("/scenarios")
    def list_scenarios():
        entries = []
        for scenario in registry.scenarios.values():
            stats = scenario.stats()
            entries.append(
                {
                    "id": scenario.name,
                    "name": scenario.name,
                    "scenes": stats.scenes,
                    "items": stats.items,
                    "tools": stats.tools,
                    "key_steps": stats.key_steps,
                    "difficulties": list(DIFFICULTIES),
                }
            )
        return {"scenarios": entries}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        session = registry.create(body.scenario_id, body.difficulty, body.role)
        return _session_payload(session)

    @app.get("/sessions/{session_id}/observation")
    def get_observation(session_id: str):
        session = registry.get(session_id)
        with session.lock:
            return _session_payload(session)

    @app.post("/sessions/{session_id}/actions")
    def post_action(session_id: str, body: ActionBody):
        session = registry.get(session_id)
        with session.lock:
            if body.idempotency_key and body.idempotency_key in session.idempotency:
                return session.idempotency[body.idempotency_key]
            tracker = session.tracker
            if tracker.finished:
                raise ServiceError(409, "session_finished", "the game is already over")
            try:
                action = parse_action(body.text)
                parse_error = None
            except ActionParseError as exc:
                action = None
                parse_error = str(exc)
            entry = tracker.record_step(body.text, action)
            response = {
                "outcome": entry.outcome.to_json(),
                "parse_error": parse_error,
                "metrics": tracker.metrics().to_json(),
                **_session_payload(session),
            }
            if body.idempotency_key:
                session.idempotency[body.idempotency_key] = response
            return response

    @app.post("/sessions/{session_id}/hint")
    def post_hint(session_id: str):
        session = registry.get(session_id)
        with session.lock:
            tracker = session.tracker
            if tracker.finished:
                raise ServiceError(409, "session_finished", "the game is already over")
            hint, newly_activated = tracker.request_hint()
            return {
                "hint": hint.text,
                "target_scene": hint.target_scene,
                "target_action": hint.target_action.render(),
                "newly_activated": newly_activated,
                "hints_used": len(tracker.record.hint_events),
            }

    @app.get("/sessions/{session_id}/metrics")
    def get_metrics(session_id: str):
        session = registry.get(session_id)
        with session.lock:
            return session.tracker.metrics().to_json()

    @app.get("/sessions/{session_id}/transcript")
    def get_transcript(session_id: str):
        session = registry.get(session_id)
        with session.lock:
            record = session.tracker.record
            if session.tracker.finished:
                record = session.tracker.finalize()
            return PlainTextResponse(render_transcript(record))

    if ui_dir and Path(ui_dir).exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
