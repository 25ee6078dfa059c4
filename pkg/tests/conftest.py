from __future__ import annotations

import pytest

from escaperoom import load_bundled_scenario
from escaperoom.solver import obtain_chain

# (criterion name, passed) pairs filled in by test_acceptance.py
ACCEPTANCE_RESULTS: list[tuple[str, bool]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")

UNDERNEATH_VAN_CONFIG = """
name: van_exterior
start_scene: underneath part of the van
scenes:
- name: underneath part of the van
  desc: There is a stepladder on the right side. There is a license plate on the left side.
  scene_relations:
    Back to the back of the van: back of the van
  items:
  - name: license plate space
    position: On the left side
    states:
    - desc: The license plate is currently fixed to the van, with four screws on each corner
      transitions:
      - wait_for:
        - apply, screwdriver
        trigger:
        - change_state, 1
        - game_end
        reward: The screws come loose and the plate drops into your hand.
    - desc: An empty plate space.
- name: back of the van
  desc:
    default: The van's rear doors are dented but shut.
    easy: The van's rear doors are dented but shut. Pry marks suggest a flat blade would open them.
  scene_relations:
    To the underneath part: underneath part of the van
  tools:
  - name: screwdriver
    position: On the right side
    states:
    - desc: A stubby flathead screwdriver.
      apply_to:
      - license plate space
key_steps:
- id: take-plate
  scene: underneath part of the van
  action: apply(screwdriver, license plate space)
  hint: Unscrew the license plate.
"""


@pytest.fixture(scope="session")
def locked_cabinet():
    return load_bundled_scenario("locked_cabinet")


@pytest.fixture(scope="session")
def workshop():
    return load_bundled_scenario("workshop")


@pytest.fixture(scope="session")
def locked_cabinet_chain(locked_cabinet):
    return obtain_chain(locked_cabinet)


@pytest.fixture(scope="session")
def workshop_chain(workshop):
    return obtain_chain(workshop)


ONE_CLICK_CONFIG = """
name: one_click
start_scene: cell
scenes:
- name: cell
  desc: A bare cell with a loose panel.
  items:
  - name: panel
    states:
    - desc: A loose wall panel.
      transitions:
      - wait_for:
        - click
        trigger:
        - change_state, 1
        - game_end
        reward: The panel swings open. You crawl out!
    - desc: An open gap in the wall.
key_steps:
- id: escape
  scene: cell
  action: click(panel)
  hint: Click the loose panel.
"""
