import pytest

from oikos.assets import default_taxonomy_path
from oikos.geometry import Pose
from oikos.taxonomy import load_taxonomy
from oikos.world import Grasp, Room, World

KITCHEN = Room(
    id="kitchen",
    kind="kitchen",
    polygon=((-2.0, -2.0), (2.0, -2.0), (2.0, 2.0), (-2.0, 2.0)),
    floor_z=0.0,
)


@pytest.fixture(scope="session")
def taxonomy():
    return load_taxonomy(default_taxonomy_path())


@pytest.fixture
def world(taxonomy):
    return World(taxonomy, rooms=[KITCHEN])


def place(world, model, x, y, z, instance_id=None, orn=(1.0, 0.0, 0.0, 0.0)):
    """Add an object at an explicit pose without settling."""
    return world.add_object(model, Pose((x, y, z), orn), instance_id)


def grab(world, hand, instance, press=0.0):
    """Fabricate a grasp without running the ray test (unit-level shortcut)."""
    hand_state = world.agent.hands[hand]
    rel = hand_state.pose.inverse().compose(world.obj(instance).pose)
    hand_state.grasp = Grasp(instance, rel)
    hand_state.press = press
    world.grasp_order.setdefault(instance, []).append(hand)
