"""Boolean queries over world state, and the goal-condition grammar.

Conditions are written ``Name(arg)`` / ``Name(a, b)`` with an ``=true`` or
``=false`` target, one per line in task files.  Extended-state queries keep
answering for consumed instances (a sliced whole still reports its latched
temperature); geometric and agent-relative queries insist the instance is
still live and raise otherwise.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Optional

from .constants import (
    DEFAULT_DUSTY_LEVEL,
    DEFAULT_NEXTTO_FACTOR,
    DEFAULT_STAINED_LEVEL,
    DEFAULT_T_FROZEN,
    DEFAULT_W_SOAKED,
    OPEN_JOINT_FRACTION,
    REACH_RADIUS,
)
from .errors import (
    AbilityMissing,
    ArityMismatch,
    ParseError,
    UnknownPredicate,
)
from .geometry import Ray, quat_rotate, v_dist, v_norm, v_sub
from .taxonomy import Ability
from .world import World


@dataclass(frozen=True)
class Condition:
    name: str
    args: tuple[str, ...]
    target: bool = True

    def __str__(self) -> str:
        return f"{self.name}({', '.join(self.args)})={'true' if self.target else 'false'}"


_LINE = re.compile(
    r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\(\s*([^()]*?)\s*\)\s*=\s*(true|false)\s*$"
)
_ARG = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_.\-]*$")


def parse_condition(text: str, line: int = 0) -> Condition:
    m = _LINE.match(text)
    if not m:
        raise ParseError(text, line)
    name, raw_args, target = m.group(1), m.group(2), m.group(3)
    args = tuple(a.strip() for a in raw_args.split(",")) if raw_args.strip() else ()
    if any(not _ARG.match(a) for a in args):
        raise ParseError(text, line)
    if name not in REGISTRY:
        raise UnknownPredicate(name)
    arity = REGISTRY[name].arity
    if len(args) != arity:
        raise ArityMismatch(name, arity, len(args))
    return Condition(name, args, target == "true")


def parse_condition_lines(text: str) -> list[Condition]:
    out = []
    for line_no, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        out.append(parse_condition(stripped, line_no))
    return out


# --- extended-state queries -------------------------------------------------------


def _require(world: World, instance: str, ability: Ability, name: str) -> None:
    if not world.resolved_of(instance).has(ability):
        raise AbilityMissing(name, instance, ability.value)


def is_cooked(world: World, instance: str) -> bool:
    _require(world, instance, Ability.COOKABLE, "Cooked")
    resolved = world.resolved_of(instance)
    state = world.obj(instance)
    cooked_at = resolved.threshold("T_cooked", math.inf)
    if state.max_temperature < cooked_at:
        return False
    if resolved.has(Ability.BURNABLE):
        return state.max_temperature < resolved.threshold("T_burnt", math.inf)
    return True


def is_burnt(world: World, instance: str) -> bool:
    _require(world, instance, Ability.BURNABLE, "Burnt")
    burnt_at = world.resolved_of(instance).threshold("T_burnt", math.inf)
    return world.obj(instance).max_temperature >= burnt_at


def is_frozen(world: World, instance: str) -> bool:
    _require(world, instance, Ability.FREEZABLE, "Frozen")
    freeze_at = world.resolved_of(instance).threshold("T_frozen", DEFAULT_T_FROZEN)
    return world.obj(instance).temperature <= freeze_at


def is_soaked(world: World, instance: str) -> bool:
    _require(world, instance, Ability.SOAKABLE, "Soaked")
    need = world.resolved_of(instance).threshold("w_soaked", DEFAULT_W_SOAKED)
    return world.obj(instance).wetness >= need


def is_dusty(world: World, instance: str) -> bool:
    _require(world, instance, Ability.DUSTYABLE, "Dusty")
    level = world.resolved_of(instance).threshold("dusty_level", DEFAULT_DUSTY_LEVEL)
    return world.obj(instance).dust_level() > level


def is_stained(world: World, instance: str) -> bool:
    _require(world, instance, Ability.STAINABLE, "Stained")
    level = world.resolved_of(instance).threshold("stained_level", DEFAULT_STAINED_LEVEL)
    return world.obj(instance).stain_level() > level


def is_toggled_on(world: World, instance: str) -> bool:
    _require(world, instance, Ability.TOGGLEABLE, "ToggledOn")
    return world.obj(instance).toggled


def is_sliced(world: World, instance: str) -> bool:
    _require(world, instance, Ability.SLICEABLE, "Sliced")
    return world.obj(instance).sliced


def is_open(world: World, instance: str) -> bool:
    _require(world, instance, Ability.OPENABLE, "Open")
    state = world.obj(instance)
    model = world.model_of(instance)
    joint_ids = model.relevant_joints or tuple(
        l.id for l in model.links if l.joint is not None
    )
    for link_id in joint_ids:
        joint = model.link(link_id).joint
        threshold = joint.lower + OPEN_JOINT_FRACTION * (joint.upper - joint.lower)
        if state.joints.get(link_id, joint.lower) > threshold:
            return True
    return False


# --- kinematic queries --------------------------------------------------------------


def is_inside_of(world: World, a: str, b: str) -> bool:
    world.live(a), world.live(b)
    return world.is_inside(a, b)


def is_on_top_of(world: World, a: str, b: str) -> bool:
    world.live(a), world.live(b)
    below = world.vertical_axis_objs(a, up=False)
    return bool(below) and below[0] == b and world.in_contact(a, b)


def is_under(world: World, a: str, b: str) -> bool:
    world.live(a), world.live(b)
    return b in world.vertical_axis_objs(a, up=True)


def is_next_to(world: World, a: str, b: str) -> bool:
    world.live(a), world.live(b)
    if a == b:
        return False
    box_a, box_b = world.object_aabb(a), world.object_aabb(b)
    limit = DEFAULT_NEXTTO_FACTOR * 0.5 * (box_a.diagonal() + box_b.diagonal())
    if box_a.distance_to_aabb(box_b) > limit:
        return False
    return b in world.horizontal_plane_objs(a) or a in world.horizontal_plane_objs(b)


def is_on_floor(world: World, instance: str) -> bool:
    world.live(instance)
    return world.floor_contact(instance) is not None


# --- agent-relative queries ----------------------------------------------------------


def _fov_points(world: World, instance: str):
    box = world.object_aabb(instance)
    lo, hi = box.min, box.max
    yield box.center()
    for x in (lo[0], hi[0]):
        for y in (lo[1], hi[1]):
            for z in (lo[2], hi[2]):
                yield (x, y, z)


def in_fov_of_agent(world: World, instance: str) -> bool:
    world.live(instance)
    head = world.agent.head_pose
    forward = quat_rotate(head.orn, (1.0, 0.0, 0.0))
    cos_limit = math.cos(world.agent.fov_half_angle)
    for point in _fov_points(world, instance):
        offset = v_sub(point, head.pos)
        dist = v_norm(offset)
        if dist < 1e-9:
            return True
        direction = tuple(c / dist for c in offset)
        if sum(d * f for d, f in zip(direction, forward)) < cos_limit:
            continue
        hits = world.raycast(Ray(head.pos, direction, dist - 1e-9))
        if all(h.object_id == instance for h in hits):
            return True
    return False


def in_hand_of_agent(world: World, instance: str) -> bool:
    world.live(instance)
    return bool(world.grasp_order.get(instance))


def in_reach_of_agent(world: World, instance: str) -> bool:
    world.live(instance)
    box = world.object_aabb(instance)
    return box.distance_to_point(world.agent.base_pos) <= REACH_RADIUS


def in_same_room_as_agent(world: World, instance: str) -> bool:
    world.live(instance)
    com = world.com(instance)
    room = world.room_at((com[0], com[1]))
    return room is not None and room.id == world.agent.base_room


# --- registry and evaluation ----------------------------------------------------------


@dataclass(frozen=True)
class PredicateSpec:
    name: str
    arity: int
    kind: str  # "state" | "kinematic" | "agent"
    fn: Callable


REGISTRY: dict[str, PredicateSpec] = {
    spec.name: spec
    for spec in (
        PredicateSpec("Cooked", 1, "state", is_cooked),
        PredicateSpec("Burnt", 1, "state", is_burnt),
        PredicateSpec("Frozen", 1, "state", is_frozen),
        PredicateSpec("Soaked", 1, "state", is_soaked),
        PredicateSpec("Dusty", 1, "state", is_dusty),
        PredicateSpec("Stained", 1, "state", is_stained),
        PredicateSpec("ToggledOn", 1, "state", is_toggled_on),
        PredicateSpec("Sliced", 1, "state", is_sliced),
        PredicateSpec("Open", 1, "state", is_open),
        PredicateSpec("InsideOf", 2, "kinematic", is_inside_of),
        PredicateSpec("OnTopOf", 2, "kinematic", is_on_top_of),
        PredicateSpec("Under", 2, "kinematic", is_under),
        PredicateSpec("NextTo", 2, "kinematic", is_next_to),
        PredicateSpec("OnFloor", 1, "kinematic", is_on_floor),
        PredicateSpec("InFoVOfAgent", 1, "agent", in_fov_of_agent),
        PredicateSpec("InHandOfAgent", 1, "agent", in_hand_of_agent),
        PredicateSpec("InReachOfAgent", 1, "agent", in_reach_of_agent),
        PredicateSpec("InSameRoomAsAgent", 1, "agent", in_same_room_as_agent),
    )
}


def evaluate(world: World, condition: Condition) -> bool:
    spec = REGISTRY.get(condition.name)
    if spec is None:
        raise UnknownPredicate(condition.name)
    if len(condition.args) != spec.arity:
        raise ArityMismatch(condition.name, spec.arity, len(condition.args))
    return bool(spec.fn(world, *condition.args))


def holds(world: World, condition: Condition) -> bool:
    return evaluate(world, condition) == condition.target


def evaluate_all(world: World, conditions) -> list[dict]:
    """Evaluate every condition, trapping per-slot errors.

    Returns one record per condition: ``value`` is the raw truth (None on
    error), ``ok`` whether it matched its target.
    """
    out = []
    for condition in conditions:
        record = {"condition": str(condition), "value": None, "ok": False, "error": None}
        try:
            value = evaluate(world, condition)
        except Exception as exc:  # noqa: BLE001 - reported, not swallowed
            record["error"] = f"{type(exc).__name__}: {exc}"
        else:
            record["value"] = value
            record["ok"] = value == condition.target
        out.append(record)
    return out


_TAG_CHECKS: tuple[tuple[str, Ability, Callable], ...] = (
    ("Cooked", Ability.COOKABLE, is_cooked),
    ("Burnt", Ability.BURNABLE, is_burnt),
    ("Frozen", Ability.FREEZABLE, is_frozen),
    ("Soaked", Ability.SOAKABLE, is_soaked),
    ("Dusty", Ability.DUSTYABLE, is_dusty),
    ("Stained", Ability.STAINABLE, is_stained),
    ("On", Ability.TOGGLEABLE, is_toggled_on),
    ("Sliced", Ability.SLICEABLE, is_sliced),
)


def visual_tags(world: World, instance: str) -> set[str]:
    """Appearance tags for an instance, each gated by the matching ability."""
    resolved = world.resolved_of(instance)
    tags = set()
    for tag, ability, fn in _TAG_CHECKS:
        if resolved.has(ability) and fn(world, instance):
            tags.add(tag)
    if "Burnt" in tags:
        tags.discard("Cooked")
    return tags
