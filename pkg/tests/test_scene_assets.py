"""The shipped kitchen scene must be internally consistent: every object at
rest exactly where the file says, key relations holding, and the save/load
round trip byte-stable."""

import json

import pytest

from oikos.assets import scene_path, task_path
from oikos.predicates import Condition, holds, parse_condition_lines
from oikos.world import canonical_scene_bytes, load_scene, save_scene

TASK_NAMES = [
    "grasping_book",
    "soaking_towel",
    "cleaning_stained_shelf",
    "cooking_meat",
    "slicing_fruit",
    "bimanual_pick_place",
]


@pytest.fixture
def kitchen(taxonomy):
    return load_scene(scene_path("kitchen"), taxonomy)


def test_every_object_is_at_rest(kitchen):
    for instance in kitchen.live_ids():
        before = kitchen.obj(instance).pose.pos
        kitchen.settle(instance)
        after = kitchen.obj(instance).pose.pos
        assert after == before, f"{instance} moved from {before} to {after}"


def test_everything_sits_in_the_room(kitchen):
    for instance in kitchen.live_ids():
        center = kitchen.com(instance)
        assert kitchen.room_at((center[0], center[1])).id == "kitchen", instance


def test_expected_relations_hold(kitchen):
    expected = [
        ("OnTopOf", ("book_1", "table_1")),
        ("OnTopOf", ("knife_1", "table_1")),
        ("OnTopOf", ("meat_1", "table_1")),
        ("OnTopOf", ("peach_1", "table_1")),
        ("OnTopOf", ("scrubber_1", "table_1")),
        ("OnTopOf", ("book_2", "shelf_1")),
        ("OnTopOf", ("cup_1", "counter_1")),
        ("OnTopOf", ("towel_1", "counter_1")),
        ("OnTopOf", ("basin_1", "counter_1")),
        ("InsideOf", ("milk_1", "fridge_1")),
        ("OnFloor", ("cauldron_1",)),
        ("OnFloor", ("block_1",)),
    ]
    for name, args in expected:
        assert holds(kitchen, Condition(name, args, True)), f"{name}{args}"


def test_faucet_spout_is_over_the_basin(kitchen):
    spout = kitchen.link_world_aabb("faucet_1", "spout")
    basin = kitchen.object_aabb("basin_1")
    cx, cy, _ = spout.center()
    assert basin.min[0] <= cx <= basin.max[0]
    assert basin.min[1] <= cy <= basin.max[1]
    assert spout.min[2] > basin.max[2]


def test_round_trip_is_byte_stable(taxonomy, kitchen):
    scene = save_scene(kitchen)
    reloaded = load_scene(scene, taxonomy)
    assert canonical_scene_bytes(save_scene(reloaded)) == canonical_scene_bytes(scene)


@pytest.mark.parametrize("name", TASK_NAMES)
def test_task_files_parse_and_reference_real_things(taxonomy, name):
    spec = json.loads(task_path(name).read_text())
    assert spec["id"] == name
    assert spec["time_limit_steps"] > 0
    world = load_scene(scene_path(spec["scene"]), taxonomy)
    instances = set(world.live_ids())
    for line in spec["initial"] + spec["goal"]:
        (condition,) = parse_condition_lines(line)
        for arg in condition.args:
            assert arg in instances, f"{name}: unknown instance {arg!r} in {line!r}"
    assert spec["goal"], "a task needs at least one goal line"
