from __future__ import annotations

import pytest

from escaperoom.actions import parse_action
from escaperoom.scenario import (
    LeveledText,
    ScenarioError,
    parse_scenario,
    scenario_from_config,
    scenario_to_config,
    serialize_scenario,
)
from escaperoom.validate import validate_scenario

from conftest import ONE_CLICK_CONFIG
from oracles import generate_scenario


# --------------------------------------------------------------------------
# Parsing the reference configuration blocks
# --------------------------------------------------------------------------


def test_digital_lock_block_parses_to_three_states(locked_cabinet):
    lock = locked_cabinet.find_item("digital lock")
    assert lock is not None
    assert len(lock.states) == 3

    first = lock.states[0]
    assert first.desc.default == "A digital lock linked to a card reader, power on now."
    assert len(first.transitions) == 1
    transition = first.transitions[0]
    assert transition.event.kind == "apply"
    assert transition.event.arg == "card"
    assert [e.kind for e in transition.effects] == ["change_self_state"]
    assert transition.effects[0].state_index == 1
    assert transition.reward.default == (
        "Authorization succeeds, you have to input a 4-digit password."
    )

    second = lock.states[1]
    transition = second.transitions[0]
    assert transition.event.kind == "input"
    assert transition.event.arg == "1672"
    assert [(e.kind, e.target, e.state_index) for e in transition.effects] == [
        ("change_item_state", "cabinet door", 2),
        ("change_self_state", None, 2),
    ]
    assert transition.reward.default == "The password is correct. A door opens somewhere ..."


def test_key_tool_block(locked_cabinet):
    key = locked_cabinet.find_tool("key")
    assert key is not None
    assert key.visible is False
    assert len(key.states) == 2
    assert key.states[0].desc.default == "A rusty silver key"
    assert [w.tool for w in key.states[0].wait_for] == ["lubricant"]
    assert key.states[1].apply_to == ("safe",)
    assert key.states[1].wait_for == ()


def test_scene_relations_parse(locked_cabinet):
    hallway = locked_cabinet.find_scene("hallway")
    labels = [label for label, _ in hallway.connectors]
    assert labels == ["To the blocked path close-up", "To the cabinet close-up"]
    targets = {c.target for _, c in hallway.connectors}
    assert targets == {"blocked path close-up", "cabinet close-up"}


def test_dangling_connector_is_an_error():
    config = """
name: broken
scenes:
- name: lobby
  desc: A lobby.
  scene_relations:
    To the vault: vault
"""
    with pytest.raises(ScenarioError) as excinfo:
        parse_scenario(config)
    assert "vault" in str(excinfo.value)
    assert "dangling" in str(excinfo.value)


def test_unknown_field_is_an_error():
    config = """
name: broken
scenes:
- name: lobby
  desc: A lobby.
  colour: blue
"""
    with pytest.raises(ScenarioError) as excinfo:
        parse_scenario(config)
    assert "unknown field" in str(excinfo.value)
    assert "colour" in str(excinfo.value)


def test_duplicate_name_is_an_error():
    config = """
name: broken
scenes:
- name: lobby
  desc: A lobby.
  items:
  - name: lamp
    states:
    - desc: A lamp.
  tools:
  - name: lamp
    states:
    - desc: Also a lamp.
"""
    with pytest.raises(ScenarioError) as excinfo:
        parse_scenario(config)
    assert "duplicate" in str(excinfo.value)


def test_syntax_error_reports_position():
    with pytest.raises(ScenarioError) as excinfo:
        parse_scenario("scenes:\n- name: [unclosed")
    assert "syntax error" in str(excinfo.value)


def test_bare_scene_list_document():
    scenario = parse_scenario(
        """
- name: hall
  desc: A hall.
""",
        name="from_filename",
    )
    assert scenario.name == "from_filename"
    assert scenario.start_scene == "hall"


def test_non_alphanumeric_input_code_rejected():
    config = """
name: broken
scenes:
- name: lobby
  desc: A lobby.
  items:
  - name: lock
    states:
    - desc: A lock.
      transitions:
      - wait_for:
        - input, 12-34
        trigger:
        - game_end
"""
    with pytest.raises(ScenarioError) as excinfo:
        parse_scenario(config)
    assert "digits and letters" in str(excinfo.value)


# --------------------------------------------------------------------------
# Round-trips
# --------------------------------------------------------------------------


@pytest.mark.parametrize("fixture_name", ["locked_cabinet", "workshop"])
def test_serialize_round_trip(fixture_name, request):
    scenario = request.getfixturevalue(fixture_name)
    text = serialize_scenario(scenario)
    again = parse_scenario(text)
    assert again == scenario
    assert serialize_scenario(again) == text


def test_round_trip_one_click():
    scenario = parse_scenario(ONE_CLICK_CONFIG)
    assert parse_scenario(serialize_scenario(scenario)) == scenario


def test_round_trip_generated_scenarios():
    for seed in range(10):
        scenario = generate_scenario(seed)
        assert parse_scenario(serialize_scenario(scenario)) == scenario


def test_leveled_text_resolution():
    text = LeveledText(default="plain", hard="curt")
    assert text.resolve("easy") == "plain"
    assert text.resolve("normal") == "plain"
    assert text.resolve("hard") == "curt"


# --------------------------------------------------------------------------
# Difficulty sibling files
# --------------------------------------------------------------------------


def test_sibling_difficulty_files_merge(tmp_path):
    base = """
name: halls
scenes:
- name: hall
  desc: {desc}
  items:
  - name: door
    states:
    - desc: {door}
      transitions:
      - wait_for:
        - click
        trigger:
        - game_end
        reward: {reward}
"""
    (tmp_path / "halls_easy.yaml").write_text(
        base.format(desc="A hall, door to the north.", door="A door with a shiny handle.", reward="Out!")
    )
    (tmp_path / "halls_normal.yaml").write_text(
        base.format(desc="A hall.", door="A door.", reward="Out!")
    )
    (tmp_path / "halls_hard.yaml").write_text(
        base.format(desc="A room.", door="A door.", reward="Out!")
    )
    from escaperoom.scenario import load_scenario

    scenario = load_scenario(tmp_path / "halls_normal.yaml")
    assert scenario.name == "halls"
    hall = scenario.find_scene("hall")
    assert hall.desc.resolve("normal") == "A hall."
    assert hall.desc.resolve("easy") == "A hall, door to the north."
    assert hall.desc.resolve("hard") == "A room."
    door = scenario.find_item("door")
    assert door.states[0].desc.resolve("easy") == "A door with a shiny handle."
    assert door.states[0].desc.resolve("hard") == "A door."


def test_sibling_files_with_diverging_logic_fail(tmp_path):
    (tmp_path / "bad_easy.yaml").write_text(
        "name: bad\nscenes:\n- name: a\n  desc: x\n- name: b\n  desc: y\n"
    )
    (tmp_path / "bad_hard.yaml").write_text("name: bad\nscenes:\n- name: a\n  desc: x\n")
    from escaperoom.scenario import load_scenario

    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "bad_easy.yaml")


# --------------------------------------------------------------------------
# Validation findings
# --------------------------------------------------------------------------


def test_bundled_scenarios_validate_clean(locked_cabinet, workshop):
    for scenario in (locked_cabinet, workshop):
        report = validate_scenario(scenario)
        assert report.errors == []
        assert report.warnings == []


def test_removing_goal_transition_yields_no_goal_error(locked_cabinet):
    config = scenario_to_config(locked_cabinet)
    for scene in config["scenes"]:
        for item in scene.get("items", []):
            for state in item["states"]:
                for transition in state.get("transitions", []):
                    transition["trigger"] = [
                        e for e in transition["trigger"] if e != "game_end"
                    ]
    crippled = scenario_from_config(config)
    report = validate_scenario(crippled)
    assert any(f.code == "no-goal" for f in report.errors)
    assert any(f.code == "goal-not-last-key-step" for f in report.errors)


def test_ambiguous_click_triggers_flagged():
    config = """
name: clash
scenes:
- name: room
  desc: A room.
  items:
  - name: button
    states:
    - desc: A button.
      transitions:
      - wait_for:
        - click
        trigger:
        - change_state, 1
      - wait_for:
        - click
        trigger:
        - game_end
    - desc: A pressed button.
key_steps:
- id: press
  scene: room
  action: click(button)
  hint: Press it.
"""
    report = validate_scenario(parse_scenario(config))
    assert any(f.code == "ambiguous-trigger" for f in report.errors)


def test_unreachable_scene_is_a_warning():
    config = """
name: island
scenes:
- name: mainland
  desc: Mainland.
  items:
  - name: exit
    states:
    - desc: An exit.
      transitions:
      - wait_for:
        - click
        trigger:
        - game_end
- name: island
  desc: Unreachable island.
key_steps:
- id: out
  scene: mainland
  action: click(exit)
  hint: Leave.
"""
    report = validate_scenario(parse_scenario(config))
    assert any(f.code == "unreachable-scene" for f in report.warnings)
    assert report.errors == []


def test_asymmetric_connector_warning_and_one_way_opt_out():
    template = """
name: drop
scenes:
- name: ledge
  desc: A ledge.
  scene_relations:
    Drop down: {connector}
  items:
  - name: exit
    states:
    - desc: An exit.
      transitions:
      - wait_for:
        - click
        trigger:
        - game_end
- name: pit
  desc: A pit.
key_steps:
- id: out
  scene: ledge
  action: click(exit)
  hint: Leave.
"""
    report = validate_scenario(parse_scenario(template.format(connector="pit")))
    assert any(f.code == "asymmetric-connector" for f in report.warnings)

    one_way = template.format(connector="{target: pit, one_way: true}")
    report = validate_scenario(parse_scenario(one_way))
    assert not any(f.code == "asymmetric-connector" for f in report.warnings)


def test_never_fireable_transition_warning():
    config = """
name: dead
scenes:
- name: room
  desc: A room.
  items:
  - name: exit
    states:
    - desc: Sealed.
      transitions:
      - wait_for:
        - click
        trigger:
        - game_end
    - desc: Unreachable state.
      transitions:
      - wait_for:
        - click
        trigger:
        - change_state, 0
key_steps:
- id: out
  scene: room
  action: click(exit)
  hint: Click.
"""
    report = validate_scenario(parse_scenario(config))
    assert any(f.code == "never-fireable-transition" for f in report.warnings)


def test_generated_scenarios_validate_and_load():
    # Soundness: anything that parses with zero errors must start a
    # session without reference errors; exercised further in test_engine.
    for seed in range(25):
        scenario = generate_scenario(seed)
        report = validate_scenario(scenario)
        assert report.errors == [], (seed, [f.message for f in report.errors])


def test_key_step_actions_resolve():
    with pytest.raises(ScenarioError) as excinfo:
        parse_scenario(
            ONE_CLICK_CONFIG.replace("action: click(panel)", "action: click(trapdoor)")
        )
    assert "trapdoor" in str(excinfo.value)


def test_parse_action_on_key_step_templates(locked_cabinet):
    templates = [step.action for step in locked_cabinet.key_steps]
    assert templates[0] == parse_action("apply(card, digital lock)")
    assert templates[1].args == ("1672", "digital lock")
