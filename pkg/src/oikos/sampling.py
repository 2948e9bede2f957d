"""Generative counterparts to the predicates.

Each supported condition can be *imposed* on the world: pose conditions
re-place the subject with rejection sampling (random candidate, then the
matching predicate is re-checked before accepting), state conditions draw
values that satisfy the target.  Every accepted sample therefore passes its
own predicate by construction — callers rely on that round trip.
"""

from __future__ import annotations

import math
from typing import Optional

from .constants import (
    DEFAULT_T_FROZEN,
    DEFAULT_W_SOAKED,
    EPS_CONTACT,
    FLAT_NORMAL_COS,
    OPEN_JOINT_FRACTION,
    ROOM_TEMP_C,
    SAMPLE_MAX_ATTEMPTS,
    SAMPLE_PARTICLE_COUNT,
)
from .errors import (
    PenetrationUnresolvable,
    SamplingExhausted,
    SurfaceNotFound,
    UnsupportedSampler,
)
from .geometry import Pose, Ray, ray_hits
from .predicates import Condition, evaluate, holds, parse_condition
from .rng import DetRng
from .states import slice_object
from .taxonomy import Ability
from .world import Particle, World


def sample(world: World, condition: Condition, rng: DetRng,
           line: Optional[int] = None) -> None:
    """Mutate the world until ``condition`` holds (predicate == target)."""
    fn = _SAMPLERS.get(condition.name)
    if fn is None:
        raise UnsupportedSampler(condition.name, condition.target)
    fn(world, condition, rng, line)


def apply_condition_lines(world: World, text: str, rng: DetRng) -> list[Condition]:
    """Impose conditions line by line; failures carry their line number.

    Each line gets its own RNG substream so a retry-heavy line does not
    shift the draws of the lines after it.
    """
    applied = []
    for line_no, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        condition = parse_condition(stripped, line_no)
        sample(world, condition, rng.substream(f"{line_no}:{stripped}"), line=line_no)
        applied.append(condition)
    return applied


# --- shared helpers ---------------------------------------------------------------


def _object_shapes(world: World, instance: str):
    return [
        (instance, g.link_id, g.shape, g.world_pose)
        for g in world._link_geoms(instance)
        if g.colliding
    ]


def _place_with(world: World, instance: str, orn, center_xy, base_z) -> None:
    """Pose the instance so its AABB is centered on ``center_xy`` with its
    base at ``base_z``, under orientation ``orn``."""
    state = world.obj(instance)
    world.set_pose(instance, Pose(state.pose.pos, tuple(orn)))
    box = world.object_aabb(instance)
    cx, cy = box.center()[0], box.center()[1]
    pos = state.pose.pos
    world.set_pose(
        instance,
        Pose(
            (
                pos[0] + (center_xy[0] - cx),
                pos[1] + (center_xy[1] - cy),
                pos[2] + (base_z - box.min[2]),
            ),
            tuple(orn),
        ),
    )


def _clear_of_others(world: World, instance: str) -> bool:
    try:
        world._check_penetration(instance)
    except PenetrationUnresolvable:
        return False
    return True


def _fully_supported_by(world: World, instance: str, support: str) -> bool:
    """Downward rays from the base corners and center must all strike the
    support surface just below — no overhang, no bridging."""
    box = world.object_aabb(instance)
    z0 = box.min[2] + EPS_CONTACT
    cx, cy = box.center()[0], box.center()[1]
    shapes = _object_shapes(world, support)
    for origin in (
        (box.min[0], box.min[1], z0),
        (box.min[0], box.max[1], z0),
        (box.max[0], box.min[1], z0),
        (box.max[0], box.max[1], z0),
        (cx, cy, z0),
    ):
        hits = ray_hits(shapes, Ray(origin, (0.0, 0.0, -1.0), 0.05))
        if not hits:
            return False
    return True


def _pose_attempts(world: World, condition: Condition, rng: DetRng,
                   line: Optional[int], propose) -> None:
    """Shared rejection loop for pose conditions: propose, check, restore."""
    if not condition.target:
        raise UnsupportedSampler(condition.name, condition.target)
    subject = condition.args[0]
    state = world.live(subject)
    original = state.pose
    for _ in range(SAMPLE_MAX_ATTEMPTS):
        if not propose():
            continue
        if _clear_of_others(world, subject) and holds(world, condition):
            return
    world.set_pose(subject, original)
    raise SamplingExhausted(str(condition), SAMPLE_MAX_ATTEMPTS, line)


def _orientations(world: World, instance: str):
    return world.model_of(instance).stable_orientations


# --- pose samplers ----------------------------------------------------------------


def _sample_on_top_of(world: World, condition: Condition, rng: DetRng,
                      line: Optional[int]) -> None:
    subject, base = condition.args
    world.live(base)
    base_shapes = _object_shapes(world, base)
    base_box = world.object_aabb(base)

    def propose() -> bool:
        orn = rng.choice(_orientations(world, subject))
        x = rng.uniform(base_box.min[0], base_box.max[0])
        y = rng.uniform(base_box.min[1], base_box.max[1])
        probe = Ray((x, y, base_box.max[2] + 1.0), (0.0, 0.0, -1.0), 2.0 + base_box.extents()[2])
        hits = ray_hits(base_shapes, probe)
        if not hits or hits[0].normal[2] < FLAT_NORMAL_COS:
            return False
        _place_with(world, subject, orn, (x, y), hits[0].point[2])
        return _fully_supported_by(world, subject, base)

    _pose_attempts(world, condition, rng, line, propose)


def _sample_inside_of(world: World, condition: Condition, rng: DetRng,
                      line: Optional[int]) -> None:
    subject, container = condition.args
    world.live(container)
    box = world.object_aabb(container)

    def propose() -> bool:
        orn = rng.choice(_orientations(world, subject))
        state = world.obj(subject)
        world.set_pose(subject, Pose(state.pose.pos, tuple(orn)))
        half = [e * 0.5 for e in world.object_aabb(subject).extents()]
        lo = [box.min[i] + half[i] for i in range(3)]
        hi = [box.max[i] - half[i] for i in range(3)]
        if any(lo[i] >= hi[i] for i in range(3)):
            return False
        x, y, z = (rng.uniform(lo[i], hi[i]) for i in range(3))
        _place_with(world, subject, orn, (x, y), z - half[2])
        if not _clear_of_others(world, subject):
            return False
        world.settle(subject)
        return True

    _pose_attempts(world, condition, rng, line, propose)


def _sample_under(world: World, condition: Condition, rng: DetRng,
                  line: Optional[int]) -> None:
    subject, cover = condition.args
    world.live(cover)
    box = world.object_aabb(cover)

    def propose() -> bool:
        orn = rng.choice(_orientations(world, subject))
        x = rng.uniform(box.min[0], box.max[0])
        y = rng.uniform(box.min[1], box.max[1])
        room = world.room_at((x, y))
        if room is None:
            return False
        _place_with(world, subject, orn, (x, y), room.floor_z)
        return True

    _pose_attempts(world, condition, rng, line, propose)


def _sample_on_floor(world: World, condition: Condition, rng: DetRng,
                     line: Optional[int]) -> None:
    if not world.rooms:
        raise SamplingExhausted(str(condition), 0, line)
    subject = condition.args[0]
    room_ids = sorted(world.rooms)

    def propose() -> bool:
        room = world.rooms[rng.choice(room_ids)]
        xs = [p[0] for p in room.polygon]
        ys = [p[1] for p in room.polygon]
        x = rng.uniform(min(xs), max(xs))
        y = rng.uniform(min(ys), max(ys))
        if world.room_at((x, y)) is not room:
            return False
        orn = rng.choice(_orientations(world, subject))
        _place_with(world, subject, orn, (x, y), room.floor_z)
        return True

    _pose_attempts(world, condition, rng, line, propose)


# --- state samplers ---------------------------------------------------------------


def _state_attempts(world: World, condition: Condition, rng: DetRng,
                    line: Optional[int], draw) -> None:
    for _ in range(SAMPLE_MAX_ATTEMPTS):
        draw()
        if holds(world, condition):
            return
    raise SamplingExhausted(str(condition), SAMPLE_MAX_ATTEMPTS, line)


def _thresholds(world: World, instance: str):
    return world.resolved_of(instance)


def _sample_cooked(world: World, condition: Condition, rng: DetRng,
                   line: Optional[int]) -> None:
    instance = condition.args[0]
    resolved = _thresholds(world, instance)
    cooked_at = resolved.threshold("T_cooked", math.inf)
    burnt_at = resolved.threshold("T_burnt", math.inf)
    state = world.obj(instance)

    def draw() -> None:
        if condition.target:
            hi = burnt_at if math.isfinite(burnt_at) else cooked_at + 60.0
            state.max_temperature = rng.uniform(cooked_at, hi)
        else:
            state.max_temperature = rng.uniform(ROOM_TEMP_C, cooked_at)
        state.temperature = min(state.temperature, state.max_temperature)

    _state_attempts(world, condition, rng, line, draw)


def _sample_burnt(world: World, condition: Condition, rng: DetRng,
                  line: Optional[int]) -> None:
    instance = condition.args[0]
    burnt_at = _thresholds(world, instance).threshold("T_burnt", math.inf)
    state = world.obj(instance)

    def draw() -> None:
        if condition.target:
            state.max_temperature = burnt_at + rng.uniform(0.0, 100.0)
        else:
            state.max_temperature = rng.uniform(ROOM_TEMP_C, burnt_at)
        state.temperature = min(state.temperature, state.max_temperature)

    _state_attempts(world, condition, rng, line, draw)


def _sample_frozen(world: World, condition: Condition, rng: DetRng,
                   line: Optional[int]) -> None:
    instance = condition.args[0]
    freeze_at = _thresholds(world, instance).threshold("T_frozen", DEFAULT_T_FROZEN)
    state = world.obj(instance)

    def draw() -> None:
        if condition.target:
            state.temperature = freeze_at - rng.uniform(10.0, 50.0)
        else:
            state.temperature = freeze_at + rng.uniform(5.0, 30.0)
        state.max_temperature = max(state.max_temperature, state.temperature)

    _state_attempts(world, condition, rng, line, draw)


def _sample_soaked(world: World, condition: Condition, rng: DetRng,
                   line: Optional[int]) -> None:
    instance = condition.args[0]
    need = int(_thresholds(world, instance).threshold("w_soaked", DEFAULT_W_SOAKED))
    state = world.obj(instance)

    def draw() -> None:
        if condition.target:
            state.wetness = need + rng.randint(0, 2)
        else:
            state.wetness = rng.randint(0, max(need - 1, 0))

    _state_attempts(world, condition, rng, line, draw)


def _sample_dirt(kind: str):
    def sampler(world: World, condition: Condition, rng: DetRng,
                line: Optional[int]) -> None:
        instance = condition.args[0]
        state = world.obj(instance)
        if condition.target:
            points = sample_surface_particles(world, instance, rng)
            state.particles = [p for p in state.particles if p.kind != kind]
            state.particles.extend(
                Particle(
                    id=world.new_particle_id(),
                    kind=kind,
                    link_id=link_id,
                    local_point=local,
                )
                for link_id, local in points
            )
            if kind == "dust":
                state.initial_dust = len(points)
            else:
                state.initial_stain = len(points)
        else:
            for particle in state.particles:
                if particle.kind == kind:
                    particle.active = False
        if not holds(world, condition):
            raise SamplingExhausted(str(condition), 1, line)

    return sampler


def _sample_toggled(world: World, condition: Condition, rng: DetRng,
                    line: Optional[int]) -> None:
    world.obj(condition.args[0]).toggled = condition.target
    if not holds(world, condition):
        raise SamplingExhausted(str(condition), 1, line)


def _sample_open(world: World, condition: Condition, rng: DetRng,
                 line: Optional[int]) -> None:
    instance = condition.args[0]
    model = world.model_of(instance)
    joint_ids = model.relevant_joints or tuple(
        l.id for l in model.links if l.joint is not None
    )
    if not joint_ids:
        raise UnsupportedSampler(condition.name, condition.target)

    def draw() -> None:
        if condition.target:
            chosen = [j for j in joint_ids if rng.random() < 0.5] or [rng.choice(joint_ids)]
            for link_id in joint_ids:
                joint = model.link(link_id).joint
                span = joint.upper - joint.lower
                if link_id in chosen:
                    fraction = OPEN_JOINT_FRACTION * 2 + rng.random() * (1.0 - OPEN_JOINT_FRACTION * 2)
                    world.set_joint(instance, link_id, joint.lower + fraction * span)
                else:
                    world.set_joint(instance, link_id, joint.lower)
        else:
            for link_id in joint_ids:
                world.set_joint(instance, link_id, model.link(link_id).joint.lower)

    _state_attempts(world, condition, rng, line, draw)


def _sample_sliced(world: World, condition: Condition, rng: DetRng,
                   line: Optional[int]) -> None:
    instance = condition.args[0]
    already = world.obj(instance).sliced
    if condition.target:
        if not already:
            slice_object(world, instance)
    elif already:
        # Slicing is irreversible; a sliced whole can never go back.
        raise UnsupportedSampler(condition.name, condition.target)
    if not holds(world, condition):
        raise SamplingExhausted(str(condition), 1, line)


# --- surface particle placement ------------------------------------------------------


def sample_surface_particles(world: World, instance: str, rng: DetRng,
                             count: int = SAMPLE_PARTICLE_COUNT):
    """Scatter ``count`` points on the instance's surface.

    Top-down rays land points on upward, near-flat patches; if the shape has
    too little horizontal surface the remainder comes from side rays.
    Returns ``(link_id, local_point)`` pairs.
    """
    shapes = _object_shapes(world, instance)
    if not shapes:
        raise SurfaceNotFound(instance)
    box = world.object_aabb(instance)
    points = []
    budget = count * 50
    while len(points) < count and budget > 0:
        budget -= 1
        x = rng.uniform(box.min[0], box.max[0])
        y = rng.uniform(box.min[1], box.max[1])
        ray = Ray((x, y, box.max[2] + 0.5), (0.0, 0.0, -1.0), 1.0 + box.extents()[2])
        hits = ray_hits(shapes, ray)
        if hits and hits[0].normal[2] >= FLAT_NORMAL_COS:
            points.append(_to_link_local(world, instance, hits[0]))
    budget = count * 50
    while len(points) < count and budget > 0:
        budget -= 1
        z = rng.uniform(box.min[2], box.max[2])
        angle = rng.uniform(0.0, 2.0 * math.pi)
        direction = (math.cos(angle), math.sin(angle), 0.0)
        span = max(box.extents()[0], box.extents()[1]) + 0.5
        origin = (
            box.center()[0] - direction[0] * span,
            box.center()[1] - direction[1] * span,
            z,
        )
        hits = ray_hits(shapes, Ray(origin, direction, 2.0 * span))
        if hits:
            points.append(_to_link_local(world, instance, hits[0]))
    if len(points) < count:
        raise SurfaceNotFound(instance)
    return points


def _to_link_local(world: World, instance: str, hit):
    link_pose = world.link_world_pose(instance, hit.link_id)
    return hit.link_id, link_pose.inverse_transform_point(hit.point)


_SAMPLERS = {
    "OnTopOf": _sample_on_top_of,
    "InsideOf": _sample_inside_of,
    "Under": _sample_under,
    "OnFloor": _sample_on_floor,
    "Cooked": _sample_cooked,
    "Burnt": _sample_burnt,
    "Frozen": _sample_frozen,
    "Soaked": _sample_soaked,
    "Dusty": _sample_dirt("dust"),
    "Stained": _sample_dirt("stain"),
    "ToggledOn": _sample_toggled,
    "Open": _sample_open,
    "Sliced": _sample_sliced,
}
