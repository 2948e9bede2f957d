"""Scripted waypoint policies, one per shipped task.

Each policy is a generator taking the live session and yielding one list of
action commands per step; it reads the world between yields to react to
where things actually settled.  Everything is derived from live poses, so a
policy keeps working if a scene file nudges the furniture.

The driver pads with Noop once a script runs out, until the session reports
done (success or time limit).
"""

from __future__ import annotations

from typing import Iterator

from .constants import ACTION_DT
from .geometry import v_add, v_dist, v_norm, v_scale, v_sub
from .runtime import MoveHand, Noop, SetTrigger, Session, StepResult, step

ZERO = (0.0, 0.0, 0.0)

Actions = list
PolicyGen = Iterator[Actions]


def _hand_pos(session: Session, hand: str):
    return session.world.agent.hands[hand].pose.pos


def _reach(session: Session, hand: str, target, press: float = 0.0,
           tol: float = 0.004, max_steps: int = 500) -> PolicyGen:
    """Move one hand to a point; stops early if an obstacle clamps it."""
    for _ in range(max_steps):
        pos = _hand_pos(session, hand)
        delta = v_sub(target, pos)
        if v_norm(delta) <= tol:
            return
        yield [MoveHand(hand, v_scale(delta, 1.0 / ACTION_DT), ZERO, press)]
        if v_dist(_hand_pos(session, hand), pos) < 1e-9:
            return  # clamped against something; close enough by design


def _reach_both(session: Session, targets: dict, press: float = 0.0,
                tol: float = 0.004, max_steps: int = 500) -> PolicyGen:
    """Move both hands simultaneously (same clamping rules per hand)."""
    for _ in range(max_steps):
        commands = []
        before = {}
        for hand, target in sorted(targets.items()):
            pos = _hand_pos(session, hand)
            before[hand] = pos
            delta = v_sub(target, pos)
            if v_norm(delta) > tol:
                commands.append(
                    MoveHand(hand, v_scale(delta, 1.0 / ACTION_DT), ZERO, press))
        if not commands:
            return
        yield commands
        if all(v_dist(_hand_pos(session, h), p) < 1e-9 for h, p in before.items()):
            return


def _descend_to_contact(session: Session, hand: str, press: float = 0.0,
                        speed: float = 0.25, max_steps: int = 300) -> PolicyGen:
    for _ in range(max_steps):
        z_before = _hand_pos(session, hand)[2]
        yield [MoveHand(hand, (0.0, 0.0, -speed), ZERO, press)]
        if abs(_hand_pos(session, hand)[2] - z_before) < 1e-9:
            return


def _descend_both_to_contact(session: Session, speed: float = 0.25,
                             max_steps: int = 300) -> PolicyGen:
    for _ in range(max_steps):
        before = {h: _hand_pos(session, h)[2] for h in ("left", "right")}
        yield [MoveHand(h, (0.0, 0.0, -speed), ZERO, 0.0) for h in sorted(before)]
        if all(abs(_hand_pos(session, h)[2] - z) < 1e-9 for h, z in before.items()):
            return


def _grasp_from_above(session: Session, hand: str, instance: str,
                      hover: float = 0.08) -> PolicyGen:
    """Hover over the object, lower until touch, close the trigger."""
    box = session.world.object_aabb(instance)
    cx, cy, _ = box.center()
    yield from _reach(session, hand, (cx, cy, box.max[2] + hover))
    yield from _descend_to_contact(session, hand)
    yield [SetTrigger(hand, 1.0)]


def _toggle_at(session: Session, hand: str, instance: str, link: str,
               approach_dy: float = 0.2) -> PolicyGen:
    """Touch a toggle control: come in high from +y, drop level, push in.

    The final leg aims at the control's center and lets collision clamping
    stop the hand flush against the housing; the hand volume then overlaps
    the control, which is what flips it.
    """
    knob = session.world.link_world_aabb(instance, link).center()
    staging = (knob[0], knob[1] + approach_dy, knob[2])
    yield from _reach(session, hand, (staging[0], staging[1], knob[2] + 0.3))
    yield from _reach(session, hand, staging)
    yield from _reach(session, hand, knob)


# --- the six task scripts ----------------------------------------------------------


def grasping_book(session: Session) -> PolicyGen:
    yield from _grasp_from_above(session, "right", "book_1")
    pos = _hand_pos(session, "right")
    yield from _reach(session, "right", v_add(pos, (0.0, 0.0, 0.2)))


def soaking_towel(session: Session) -> PolicyGen:
    world = session.world
    yield from _grasp_from_above(session, "right", "towel_1")
    pos = _hand_pos(session, "right")
    yield from _reach(session, "right", (pos[0], pos[1], 1.05))
    # lay the towel right under the faucet mouth; approach in an L so the
    # carry never clips the faucet column
    spout = world.link_world_aabb("faucet_1", "spout").center()
    yield from _reach(session, "right", (spout[0], spout[1] - 0.35, 1.05))
    yield from _reach(session, "right", (spout[0], spout[1], 1.05))
    yield [SetTrigger("right", 0.0)]
    # clear the hand so it is not standing in the stream
    yield from _reach(session, "right", (spout[0], spout[1] - 0.35, 1.05))
    yield from _toggle_at(session, "left", "faucet_1", "knob")
    # water falls; the driver pads until the towel reports soaked


def cleaning_stained_shelf(session: Session) -> PolicyGen:
    world = session.world
    yield from _grasp_from_above(session, "right", "scrubber_1")
    hand_z = _hand_pos(session, "right")[2]
    pad = world.link_world_aabb("scrubber_1", "pad")
    pad_bottom_rel = pad.min[2] - hand_z
    shelf = world.object_aabb("shelf_1")
    # hold the pad a hair above the shelf face so the wipe reaches the grime
    sweep_z = shelf.max[2] + 0.012 - pad_bottom_rel
    pos = _hand_pos(session, "right")
    yield from _reach(session, "right", (pos[0], pos[1], 1.0))
    lanes = 3
    span_y = shelf.max[1] - shelf.min[1]
    for lane in range(lanes):
        y = shelf.min[1] + span_y * (2 * lane + 1) / (2 * lanes)
        entry_x, exit_x = shelf.min[0] + 0.05, shelf.max[0] - 0.05
        yield from _reach(session, "right", (entry_x, y, sweep_z + 0.3))
        yield from _reach(session, "right", (entry_x, y, sweep_z))
        yield from _reach(session, "right", (exit_x, y, sweep_z))
        yield from _reach(session, "right", (exit_x, y, sweep_z + 0.3))


def cooking_meat(session: Session) -> PolicyGen:
    world = session.world
    yield from _grasp_from_above(session, "right", "meat_1")
    pos = _hand_pos(session, "right")
    yield from _reach(session, "right", (pos[0], pos[1], 1.0))
    stove = world.object_aabb("stove_1")
    sx, sy, _ = stove.center()
    yield from _reach(session, "right", (sx, sy, 1.0))
    yield from _reach(session, "right", (sx, sy, 0.30))
    yield [SetTrigger("right", 0.0)]
    yield from _reach(session, "right", (sx, sy, 0.60))
    yield from _toggle_at(session, "left", "stove_1", "knob")
    # heat does the rest; the driver pads until cooked


def slicing_fruit(session: Session) -> PolicyGen:
    world = session.world
    yield from _grasp_from_above(session, "right", "knife_1")
    pos = _hand_pos(session, "right")
    yield from _reach(session, "right", (pos[0], pos[1], 0.95))
    blade = world.link_world_aabb("knife_1", "blade").center()
    target = world.com("peach_1")
    offset = v_sub(target, blade)
    hand = _hand_pos(session, "right")
    yield from _reach(session, "right",
                      v_add(hand, (offset[0], offset[1], 0.0)), press=12.0)
    hand = _hand_pos(session, "right")
    yield from _reach(session, "right",
                      (hand[0], hand[1], hand[2] + offset[2]), press=12.0)
    yield [MoveHand("right", ZERO, ZERO, 12.0)]


def bimanual_pick_place(session: Session) -> PolicyGen:
    world = session.world
    top = world.object_aabb("cauldron_1")
    cx, cy, _ = top.center()
    yield from _reach_both(session, {
        "right": (cx, cy - 0.02, top.max[2] + 0.15),
        "left": (cx, cy + 0.02, top.max[2] + 0.15),
    })
    yield from _descend_both_to_contact(session)
    yield [SetTrigger("right", 1.0), SetTrigger("left", 1.0)]
    # grasp geometry: palms sit on the rim; the pot hangs 0.14 below the palms
    table = world.object_aabb("table_1")
    tx, ty, _ = table.center()
    carry_z = table.max[2] + 0.16  # pot bottom 2 cm above the tabletop
    right = _hand_pos(session, "right")
    left = _hand_pos(session, "left")
    yield from _reach_both(session, {
        "right": (right[0], right[1], carry_z),
        "left": (left[0], left[1], carry_z),
    })
    yield from _reach_both(session, {
        "right": (tx, ty - 0.02, carry_z),
        "left": (tx, ty + 0.02, carry_z),
    })
    lower_z = carry_z - 0.015
    yield from _reach_both(session, {
        "right": (tx, ty - 0.02, lower_z),
        "left": (tx, ty + 0.02, lower_z),
    })
    yield [SetTrigger("right", 0.0), SetTrigger("left", 0.0)]


POLICIES = {
    "grasping_book": grasping_book,
    "soaking_towel": soaking_towel,
    "cleaning_stained_shelf": cleaning_stained_shelf,
    "cooking_meat": cooking_meat,
    "slicing_fruit": slicing_fruit,
    "bimanual_pick_place": bimanual_pick_place,
}


def run_policy(session: Session, policy) -> list[StepResult]:
    """Drive the session with a script until done; Noop-pad after it ends."""
    factory = POLICIES[policy] if isinstance(policy, str) else policy
    gen = factory(session)
    results: list[StepResult] = []
    pending = _next_actions(gen)
    while not session.done:
        actions = pending if pending is not None else [Noop()]
        results.append(step(session, actions))
        if session.done:
            break
        if pending is not None:
            pending = _next_actions(gen)
    return results


def _next_actions(gen: PolicyGen):
    try:
        return next(gen)
    except StopIteration:
        return None
