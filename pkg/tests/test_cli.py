from __future__ import annotations

import json

import pytest

from escaperoom import bundled_scenario_dir
from escaperoom.cli import main
from escaperoom.scenario import scenario_to_config, serialize_scenario


@pytest.fixture()
def cabinet_path():
    return str(bundled_scenario_dir() / "locked_cabinet.yaml")


def test_validate_ok(cabinet_path, capsys):
    assert main(["validate", cabinet_path, "--strict"]) == 0
    assert "OK (0 errors, 0 warnings)" in capsys.readouterr().out


def test_validate_strict_fails_on_warnings(tmp_path, locked_cabinet, capsys):
    config = scenario_to_config(locked_cabinet)
    config["scenes"][0]["scene_relations"]["To nowhere useful"] = {
        "target": "blocked path close-up",
        "one_way": False,
    }
    # Duplicate edge is fine, but drop the return edge to force a warning.
    config["scenes"][2]["scene_relations"] = {}
    path = tmp_path / "warned.yaml"
    import yaml

    path.write_text(yaml.safe_dump(config, sort_keys=False))
    assert main(["validate", str(path)]) == 0
    assert main(["validate", str(path), "--strict"]) == 1


def test_solve_emits_consumable_chain(cabinet_path, tmp_path, capsys):
    chain_path = tmp_path / "chain.jsonl"
    assert main(["solve", cabinet_path, "--emit-chain", str(chain_path)]) == 0
    out = capsys.readouterr().out
    assert "solvable in 11 actions" in out
    lines = [json.loads(line) for line in chain_path.read_text().splitlines()]
    assert len(lines) == 11

    # The harness consumes the exported chain directly.
    assert (
        main(
            [
                "bench",
                cabinet_path,
                "--policy",
                "oracle",
                "--chain",
                str(chain_path),
                "--out",
                str(tmp_path / "runs"),
            ]
        )
        == 0
    )
    bench_out = capsys.readouterr().out
    assert "hints=0 steps=11" in bench_out
    assert (tmp_path / "runs" / "locked_cabinet_normal.jsonl").exists()


def test_solve_reports_unsolvable(tmp_path, locked_cabinet, capsys):
    config = scenario_to_config(locked_cabinet)
    for scene in config["scenes"]:
        for item in scene.get("items", []):
            for state in item["states"]:
                for transition in state.get("transitions", []):
                    transition["trigger"] = [
                        e for e in transition["trigger"] if e != "game_end"
                    ]
    path = tmp_path / "dead.yaml"
    path.write_text(serialize_scenario_from(config))
    assert main(["solve", str(path)]) == 1
    assert "unsolvable" in capsys.readouterr().out


def serialize_scenario_from(config) -> str:
    from escaperoom.scenario import scenario_from_config

    return serialize_scenario(scenario_from_config(config))


def test_solve_bound_exceeded(cabinet_path, capsys):
    assert main(["solve", cabinet_path, "--max-states", "2"]) == 2
    assert "bound exceeded" in capsys.readouterr().out


def test_bench_parallel_and_aggregate(cabinet_path, capsys):
    workshop_path = str(bundled_scenario_dir() / "workshop.yaml")
    code = main(
        [
            "bench",
            cabinet_path,
            workshop_path,
            "--policy",
            "oracle",
            "--difficulty",
            "hard",
            "--parallel",
            "2",
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "locked_cabinet [hard] hints=0 steps=11" in out
    assert "workshop [hard] hints=0 steps=8" in out
    assert '"mean_total_steps": 9.5' in out


def test_bench_accepts_bundled_names(capsys):
    assert main(["bench", "workshop", "--policy", "obedient-noop", "--hint-threshold", "3"]) == 0
    assert "completed" in capsys.readouterr().out


def test_replay_round_trip(tmp_path, capsys):
    out_dir = tmp_path / "runs"
    assert (
        main(
            [
                "bench",
                "workshop",
                "--policy",
                "obedient-noop",
                "--hint-threshold",
                "5",
                "--out",
                str(out_dir),
            ]
        )
        == 0
    )
    capsys.readouterr()
    transcript = out_dir / "workshop_normal.jsonl"
    assert main(["replay", str(transcript)]) == 0
    assert "replay OK" in capsys.readouterr().out


def test_replay_flags_tampering(tmp_path, capsys):
    out_dir = tmp_path / "runs"
    main(["bench", "workshop", "--policy", "oracle", "--out", str(out_dir)])
    capsys.readouterr()
    transcript = out_dir / "workshop_normal.jsonl"
    lines = transcript.read_text().splitlines()
    doc = json.loads(lines[1])
    doc["success"] = False
    lines[1] = json.dumps(doc)
    transcript.write_text("\n".join(lines) + "\n")
    assert main(["replay", str(transcript)]) == 1
    assert "mismatch" in capsys.readouterr().out


def test_unknown_policy_and_scenario_are_errors(cabinet_path):
    with pytest.raises(SystemExit):
        main(["bench", cabinet_path, "--policy", "telepathy"])
    with pytest.raises(SystemExit):
        main(["bench", "no_such_scenario"])
