"""Command-line interface: validate, solve, bench, replay, serve."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import bundled_scenario_dir, load_bundled_scenario
from .harness import EpisodeConfig, aggregate, dump_record, load_record, run_episode, verify_replay
from .scenario import DIFFICULTIES, Scenario, load_scenario
from .solver import BoundExceeded, OracleChain, Unsolvable, obtain_chain, solve, verify_key_steps
from .validate import validate_scenario


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="escaperoom")
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a scenario file")
    p_validate.add_argument("file")
    p_validate.add_argument("--strict", action="store_true", help="warnings also fail")

    p_solve = sub.add_parser("solve", help="prove solvability and print the oracle chain")
    p_solve.add_argument("file")
    p_solve.add_argument("--max-states", type=int, default=1_000_000)
    p_solve.add_argument("--emit-chain", metavar="OUT", help="write the chain as JSONL")

    p_bench = sub.add_parser("bench", help="run a policy over scenarios and report metrics")
    p_bench.add_argument("scenarios", nargs="+", help="scenario files or bundled names")
    p_bench.add_argument("--policy", default="oracle")
    p_bench.add_argument("--agent", choices=["base", "reflective"], default="reflective")
    p_bench.add_argument("--difficulty", choices=list(DIFFICULTIES), default="normal")
    p_bench.add_argument("--hint-threshold", type=int, default=50)
    p_bench.add_argument("--memory", type=int, default=10)
    p_bench.add_argument("--max-steps", type=int, default=5000)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--parallel", type=int, default=1)
    p_bench.add_argument("--out", help="directory for transcripts")
    p_bench.add_argument(
        "--chain", help="use an exported chain file (single scenario only)"
    )

    p_replay = sub.add_parser("replay", help="re-verify a transcript and print metrics")
    p_replay.add_argument("transcript")
    p_replay.add_argument("--scenario-dir", help="extra directory to resolve scenarios")

    p_serve = sub.add_parser("serve", help="run the HTTP session service")
    p_serve.add_argument("--addr", default="127.0.0.1:8000")
    p_serve.add_argument("--scenario-dir")
    p_serve.add_argument("--persist-dir")
    p_serve.add_argument("--ui", action="store_true", help="serve the web client at /ui")

    return parser


def _resolve_scenario(ref: str, extra_dir: str | None = None) -> Scenario:
    path = Path(ref)
    if path.exists():
        return load_scenario(path)
    if extra_dir:
        candidate = Path(extra_dir) / f"{ref}.yaml"
        if candidate.exists():
            return load_scenario(candidate)
    bundled = bundled_scenario_dir() / f"{ref}.yaml"
    if bundled.exists():
        return load_bundled_scenario(ref)
    raise SystemExit(f"error: cannot resolve scenario {ref!r}")


def _make_policy(spec: str, agent: str, seed: int):
    from .agents import BaseAgent, ReflectiveAgent
    from .policies import HintObedientNoopPolicy, NoopPolicy, OraclePolicy, RandomPolicy
    from .providers import HTTPProvider, ReplayProvider

    if spec == "oracle":
        return OraclePolicy()
    if spec == "random":
        return RandomPolicy(seed=seed)
    if spec == "noop":
        return NoopPolicy()
    if spec == "obedient-noop":
        return HintObedientNoopPolicy()
    agent_cls = BaseAgent if agent == "base" else ReflectiveAgent
    if spec.startswith("replay:"):
        return agent_cls(ReplayProvider(spec.split(":", 1)[1]))
    if spec.startswith("provider:"):
        return agent_cls(HTTPProvider(model=spec.split(":", 1)[1]))
    raise SystemExit(f"error: unknown policy {spec!r}")


def cmd_validate(args) -> int:
    scenario = load_scenario(args.file)
    report = validate_scenario(scenario)
    for finding in report.findings:
        print(f"{finding.severity}: {finding.path}: {finding.message}")
    ok = report.ok(strict=args.strict)
    print(f"{scenario.name}: {'OK' if ok else 'FAILED'} "
          f"({len(report.errors)} errors, {len(report.warnings)} warnings)")
    return 0 if ok else 1


def cmd_solve(args) -> int:
    scenario = load_scenario(args.file)
    try:
        chain = solve(scenario, bound=args.max_states)
    except Unsolvable as exc:
        print(f"unsolvable: {exc}")
        return 1
    except BoundExceeded as exc:
        print(f"bound exceeded: {exc}")
        return 2
    print(f"{scenario.name}: solvable in {chain.length} actions")
    for element in chain.elements:
        tag = ""
        if element.progress.kind != "none":
            tag = f"  [{element.progress.kind}: {element.progress.target}]"
        print(f"  {element.scene} :: {element.action.render()}{tag}")
    coverage = verify_key_steps(scenario, chain)
    if not coverage.complete:
        print(f"warning: key steps uncovered={coverage.uncovered} duplicated={coverage.duplicated}")
    if args.emit_chain:
        chain.dump(args.emit_chain)
        print(f"chain written to {args.emit_chain}")
    return 0


def cmd_bench(args) -> int:
    scenarios = [_resolve_scenario(ref) for ref in args.scenarios]
    config = EpisodeConfig(
        hint_threshold=args.hint_threshold,
        memory_capacity=args.memory,
        max_total_steps=args.max_steps,
        difficulty=args.difficulty,
    )
    if args.chain and len(scenarios) != 1:
        raise SystemExit("error: --chain applies to exactly one scenario")
    loaded_chain = OracleChain.load(args.chain) if args.chain else None
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    def run_one(scenario: Scenario):
        policy = _make_policy(args.policy, args.agent, args.seed)
        chain = loaded_chain or obtain_chain(scenario)
        record = run_episode(policy, scenario, config, chain=chain)
        if out_dir:
            dump_record(record, out_dir / f"{scenario.name}_{args.difficulty}.jsonl")
        return record

    if args.parallel > 1:
        with ThreadPoolExecutor(max_workers=args.parallel) as pool:
            records = list(pool.map(run_one, scenarios))
    else:
        records = [run_one(s) for s in scenarios]

    for record in records:
        m = record.metrics
        print(
            f"{record.scenario_name} [{record.difficulty}] "
            f"hints={m.hints_used} steps={m.total_steps} "
            f"early_exit={m.early_exit_progress:.1f}% "
            f"tool_hints={m.tool_hints.count} ({m.tool_hints.percent:.1f}%) "
            f"key_step_hints={m.key_step_hints.count} ({m.key_step_hints.percent:.1f}%) "
            f"{'completed' if record.completed else 'CAP EXCEEDED'}"
        )
    print(json.dumps(aggregate(records).to_json(), indent=2))
    return 0


def cmd_replay(args) -> int:
    record = load_record(args.transcript)
    scenario = _resolve_scenario(record.scenario_name, args.scenario_dir)
    problems = verify_replay(record, scenario)
    metrics = record.metrics
    if metrics:
        print(json.dumps(metrics.to_json(), indent=2))
    if problems:
        for problem in problems:
            print(f"mismatch: {problem}")
        return 1
    print("replay OK: outcomes and metrics reproduce")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    host, _, port = args.addr.partition(":")
    ui_dir = None
    if args.ui:
        ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    app = create_app(
        scenario_dir=args.scenario_dir,
        persist_dir=args.persist_dir,
        ui_dir=ui_dir,
    )
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "validate": cmd_validate,
        "solve": cmd_solve,
        "bench": cmd_bench,
        "replay": cmd_replay,
        "serve": cmd_serve,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
