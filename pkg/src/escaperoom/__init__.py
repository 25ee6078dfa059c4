"""Room-escape game engine, solvability solver, and agent evaluation harness."""

from importlib import resources
from pathlib import Path

from .actions import Action, ActionParseError, make_action, parse_action
from .engine import (
    ActionOutcome,
    GameState,
    Observation,
    new_session,
    observe,
    restore,
    snapshot,
    step,
)
from .harness import (
    EpisodeConfig,
    EpisodeMetrics,
    EpisodeRecord,
    aggregate,
    compute_metrics,
    provide_hint,
    run_episode,
)
from .scenario import Scenario, ScenarioError, load_scenario, parse_scenario, serialize_scenario
from .solver import OracleChain, obtain_chain, solve, verify_key_steps
from .validate import ValidationReport, validate_scenario

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ActionOutcome",
    "ActionParseError",
    "EpisodeConfig",
    "EpisodeMetrics",
    "EpisodeRecord",
    "GameState",
    "Observation",
    "OracleChain",
    "Scenario",
    "ScenarioError",
    "ValidationReport",
    "aggregate",
    "bundled_scenario_dir",
    "bundled_scenario_names",
    "compute_metrics",
    "load_bundled_scenario",
    "load_scenario",
    "make_action",
    "new_session",
    "observe",
    "obtain_chain",
    "parse_action",
    "parse_scenario",
    "provide_hint",
    "restore",
    "run_episode",
    "serialize_scenario",
    "snapshot",
    "solve",
    "step",
    "validate_scenario",
    "verify_key_steps",
]


def bundled_scenario_dir() -> Path:
    """Directory holding the demo scenario files shipped with the package."""
    return Path(resources.files(__name__) / "data")


def bundled_scenario_names() -> list[str]:
    return sorted(p.stem for p in bundled_scenario_dir().glob("*.yaml"))


def load_bundled_scenario(name: str) -> Scenario:
    path = bundled_scenario_dir() / f"{name}.yaml"
    if not path.exists():
        raise ScenarioError("scenario", f"no bundled scenario named {name!r}")
    return load_scenario(path)
