"""Non-kinematic object dynamics stepped once per action frame.

Five stages run in a fixed order — droplets, cleaning, toggling, slicing,
heat — and every stage walks instances in sorted id order, so a step is a
pure function of world state (plus the session RNG for droplet jitter).
"""

from __future__ import annotations

import math
from typing import Optional

from .constants import (
    ACTION_DT,
    AMBIENT_RATE,
    CLEANING_RADIUS,
    DEFAULT_SLICE_FORCE,
    DEFAULT_W_SOAKED,
    DROPLET_RADIUS,
    EPS_CONTACT,
    GRAVITY,
    POUR_TILT_COS,
    ROOM_TEMP_C,
    SUBSTEPS,
)
from .geometry import DISJOINT, Pose, Vec3, overlap, quat_rotate, v_add, v_scale, v_sub
from .rng import DetRng
from .taxonomy import Ability, VirtualLinkKind
from .world import (
    DROPLET_ABSORBED,
    DROPLET_CONTAINED,
    DROPLET_DESTROYED,
    DROPLET_FREE,
    Droplet,
    Particle,
    World,
)

# Lateral spawn jitter at a droplet source, meters.
EMIT_JITTER = 0.004
# Free droplets below every room floor by this much are gone for good.
KILL_PLANE_DROP = 1.0


def _virtual_aabb(world: World, instance: str, kind: VirtualLinkKind):
    link_id = world.model_of(instance).virtual_links[kind.value]
    return world.link_world_aabb(instance, link_id)


def _upright(world: World, instance: str) -> bool:
    up = quat_rotate(world.obj(instance).pose.orn, (0.0, 0.0, 1.0))
    return up[2] >= POUR_TILT_COS


def _grip_force(world: World, instance: str) -> float:
    """Largest press force among hands currently holding the instance."""
    force = 0.0
    for hand_name in world.grasp_order.get(instance, ()):
        force = max(force, world.agent.hands[hand_name].press)
    return force


# --- droplets ---------------------------------------------------------------------


def step_droplets(world: World, rng: DetRng, dt: float = ACTION_DT,
                  substeps: int = SUBSTEPS) -> None:
    _release_poured(world)
    _emit(world, rng, dt)
    # Integrate at the finer physics step so falling droplets cannot tunnel
    # through thin absorbers between resolution checks.
    sub_dt = dt / substeps
    for _ in range(substeps):
        _integrate_free(world, sub_dt)
        _resolve_free(world)
    _follow_containers(world)


def _release_poured(world: World) -> None:
    for droplet_id in sorted(world.droplets):
        d = world.droplets[droplet_id]
        if d.status != DROPLET_CONTAINED:
            continue
        holder = world.objects.get(d.container or "")
        if holder is None or holder.consumed or not _upright(world, d.container):
            if holder is not None and not holder.consumed:
                d.position = holder.pose.transform_point(d.container_offset)
            d.status = DROPLET_FREE
            d.velocity = (0.0, 0.0, 0.0)
            d.container = None
            d.container_offset = None


def _emit(world: World, rng: DetRng, dt: float) -> None:
    for instance in world.live_ids():
        resolved = world.resolved_of(instance)
        profile = resolved.droplets
        if profile is None or not resolved.has(Ability.DROPLET_SOURCE):
            continue
        state = world.obj(instance)
        if profile.requires_toggled and not state.toggled:
            continue
        acc = world.source_accumulators.get(instance, 0.0) + profile.emit_rate * dt
        spout = _virtual_aabb(world, instance, VirtualLinkKind.DROPLET_SOURCE).center()
        while acc >= 1.0:
            acc -= 1.0
            jitter = (
                rng.uniform(-EMIT_JITTER, EMIT_JITTER),
                rng.uniform(-EMIT_JITTER, EMIT_JITTER),
                0.0,
            )
            droplet = Droplet(
                id=world.new_droplet_id(),
                position=v_add(spout, jitter),
                velocity=(0.0, 0.0, 0.0),
            )
            world.droplets[droplet.id] = droplet
            world.droplets_emitted += 1
        world.source_accumulators[instance] = acc


def _integrate_free(world: World, dt: float) -> None:
    for droplet_id in sorted(world.droplets):
        d = world.droplets[droplet_id]
        if d.status != DROPLET_FREE:
            continue
        vx, vy, vz = d.velocity
        vz -= GRAVITY * dt
        d.velocity = (vx, vy, vz)
        d.position = v_add(d.position, v_scale(d.velocity, dt))


def _resolve_free(world: World) -> None:
    live = world.live_ids()
    boxes = {i: [g.aabb for g in world._link_geoms(i) if g.colliding] for i in live}
    for droplet_id in sorted(world.droplets):
        d = world.droplets[droplet_id]
        if d.status != DROPLET_FREE:
            continue
        touching = [
            i
            for i in live
            if any(b.distance_to_point(d.position) <= DROPLET_RADIUS for b in boxes[i])
        ]
        if _classify_touch(world, d, touching):
            continue
        _check_floor(world, d)


def _classify_touch(world: World, d: Droplet, touching: list[str]) -> bool:
    """Apply the first matching outcome; soaking wins over sinks, sinks over
    containment, anything else solid destroys the droplet."""
    for instance in touching:
        if world.resolved_of(instance).has(Ability.SOAKABLE):
            world.obj(instance).wetness += 1
            d.status = DROPLET_ABSORBED
            return True
    for instance in touching:
        if world.resolved_of(instance).has(Ability.DROPLET_SINK):
            d.status = DROPLET_DESTROYED
            return True
    for instance in touching:
        if world.resolved_of(instance).has(Ability.RECEPTACLE) and _upright(world, instance):
            d.status = DROPLET_CONTAINED
            d.container = instance
            d.container_offset = world.obj(instance).pose.inverse_transform_point(d.position)
            d.velocity = (0.0, 0.0, 0.0)
            return True
    if touching:
        d.status = DROPLET_DESTROYED
        return True
    return False


def _check_floor(world: World, d: Droplet) -> None:
    room = world.room_at((d.position[0], d.position[1]))
    if room is not None:
        if d.position[2] - DROPLET_RADIUS <= room.floor_z:
            d.status = DROPLET_DESTROYED
        return
    floors = [r.floor_z for r in world.rooms.values()]
    kill_z = (min(floors) if floors else 0.0) - KILL_PLANE_DROP
    if d.position[2] < kill_z:
        d.status = DROPLET_DESTROYED


def _follow_containers(world: World) -> None:
    for droplet_id in sorted(world.droplets):
        d = world.droplets[droplet_id]
        if d.status == DROPLET_CONTAINED and d.container is not None:
            holder = world.objects.get(d.container)
            if holder is not None:
                d.position = holder.pose.transform_point(d.container_offset)


# --- cleaning ---------------------------------------------------------------------


def step_cleaning(world: World) -> None:
    live = world.live_ids()
    tools = [i for i in live if world.resolved_of(i).has(Ability.CLEANING_TOOL)]
    if not tools:
        return
    for tool in tools:
        tool_aabb = _virtual_aabb(world, tool, VirtualLinkKind.CLEANING_TOOL)
        resolved = world.resolved_of(tool)
        w_soaked = resolved.threshold("w_soaked", DEFAULT_W_SOAKED)
        tool_soaked = world.obj(tool).wetness >= w_soaked
        for target in live:
            if target == tool:
                continue
            state = world.obj(target)
            for particle in state.particles:
                if not particle.active:
                    continue
                if particle.kind == "stain" and not tool_soaked:
                    continue
                link_pose = world.link_world_pose(target, particle.link_id)
                point = link_pose.transform_point(particle.local_point)
                if tool_aabb.distance_to_point(point) <= CLEANING_RADIUS:
                    particle.active = False


# --- toggling ---------------------------------------------------------------------


def step_toggle(world: World) -> None:
    current: set[str] = set()
    flipped: set[str] = set()
    for instance in world.live_ids():
        if not world.resolved_of(instance).has(Ability.TOGGLEABLE):
            continue
        switch_aabb = _virtual_aabb(world, instance, VirtualLinkKind.TOGGLING)
        for hand_name in sorted(world.agent.hands):
            if overlap(world.hand_aabb(hand_name), switch_aabb, EPS_CONTACT).kind == DISJOINT:
                continue
            key = f"{hand_name}|{instance}"
            current.add(key)
            # One flip per object per frame, on the rising edge of contact.
            if key not in world.toggle_contact_prev and instance not in flipped:
                state = world.obj(instance)
                state.toggled = not state.toggled
                flipped.add(instance)
    world.toggle_contact_prev = current


# --- slicing ----------------------------------------------------------------------


def step_slicing(world: World) -> None:
    live = world.live_ids()
    for slicer in live:
        if not world.resolved_of(slicer).has(Ability.SLICING_TOOL):
            continue
        force = _grip_force(world, slicer)
        if force <= 0.0:
            continue
        blade = _virtual_aabb(world, slicer, VirtualLinkKind.SLICING)
        for target in live:
            if target == slicer:
                continue
            state = world.obj(target)
            if state.consumed or state.sliced or state.half_of is not None:
                continue
            resolved = world.resolved_of(target)
            if not resolved.has(Ability.SLICEABLE):
                continue
            if force < resolved.threshold("f_sliced", DEFAULT_SLICE_FORCE):
                continue
            hit = any(
                overlap(g.aabb, blade, EPS_CONTACT).kind != DISJOINT
                for g in world._link_geoms(target)
                if g.colliding
            )
            if hit:
                slice_object(world, target)


def slice_object(world: World, instance: str) -> tuple[str, str]:
    """Replace a whole with two axis-split halves; returns their ids.

    The cut plane passes through the center of mass, perpendicular to the
    longest horizontal extent.  Halves inherit temperature, latched maximum,
    wetness, toggle state, category and copies of the dirt particles; the
    whole stays behind as a consumed record so state queries keep answering.
    """
    state = world.obj(instance)
    box = world.object_aabb(instance)
    com = world.com(instance)
    size = box.extents()
    axis = 0 if size[0] >= size[1] else 1

    half_ids = []
    bounds = (
        (box.min[axis], com[axis]),
        (com[axis], box.max[axis]),
    )
    for suffix, (lo, hi) in zip(("a", "b"), bounds):
        width = max(hi - lo, 2.0 * EPS_CONTACT)
        half_extents = [size[0] * 0.5, size[1] * 0.5, size[2] * 0.5]
        half_extents[axis] = width * 0.5
        center = list(box.center())
        center[axis] = (lo + hi) * 0.5
        model_id = f"{instance}_half_{suffix}"
        world.register_box_model(
            model_id,
            state.category,
            tuple(half_extents),
            mass=world.mass(instance) * 0.5,
        )
        half_id = world.add_object(model_id, Pose(tuple(center)), instance_id=model_id)
        half = world.obj(half_id)
        half.temperature = state.temperature
        half.max_temperature = state.max_temperature
        half.wetness = state.wetness
        half.toggled = state.toggled
        half.half_of = instance
        half.initial_dust = state.initial_dust
        half.initial_stain = state.initial_stain
        for particle in state.particles:
            world_pt = world.link_world_pose(instance, particle.link_id).transform_point(
                particle.local_point
            )
            half.particles.append(
                Particle(
                    id=world.new_particle_id(),
                    kind=particle.kind,
                    link_id="body",
                    local_point=v_sub(world_pt, tuple(center)),
                    active=particle.active,
                )
            )
        half_ids.append(half_id)

    for hand_name in list(world.grasp_order.get(instance, ())):
        world.release(hand_name)
    state.consumed = True
    state.sliced = True
    state.bump()
    world.dirty.discard(instance)
    for droplet_id in sorted(world.droplets):
        d = world.droplets[droplet_id]
        if d.status == DROPLET_CONTAINED and d.container == instance:
            d.status = DROPLET_FREE
            d.container = None
            d.container_offset = None
    world.dirty.update(half_ids)
    world.settle_dirty()
    return tuple(half_ids)  # type: ignore[return-value]


# --- heat -------------------------------------------------------------------------


def step_temperature(world: World, dt: float = ACTION_DT) -> None:
    live = world.live_ids()

    # Resolve who is being driven before touching any temperature: ambient
    # drift applies only to objects no active source or sink reaches.
    blends: dict[str, list[tuple[float, float]]] = {}
    for source in live:
        resolved = world.resolved_of(source)
        profile = resolved.heat
        if profile is None or not resolved.has(Ability.HEAT_SOURCE_SINK):
            continue
        if profile.requires_toggled and not world.obj(source).toggled:
            continue
        gain = dt * profile.rate
        for target in _heat_targets(world, source, profile, live):
            blends.setdefault(target, []).append((gain, profile.source_temp))

    ambient = min(1.0, dt * AMBIENT_RATE)
    for instance in live:
        state = world.obj(instance)
        driven = blends.get(instance)
        if driven is None:
            state.temperature += ambient * (ROOM_TEMP_C - state.temperature)
        else:
            for gain, source_temp in driven:
                if world.config.literal_temperature:
                    # Historical recurrence, kept verbatim behind a switch;
                    # the additive form below is the supported default.
                    state.temperature *= (
                        1.0 + gain * (source_temp - state.temperature))
                else:
                    state.temperature += min(1.0, gain) * (
                        source_temp - state.temperature)
        if state.temperature > state.max_temperature:
            state.max_temperature = state.temperature


def _heat_targets(world: World, source: str, profile, live: list[str]) -> list[str]:
    if profile.mode == "Inside":
        return [o for o in live if o != source and world.is_inside(o, source)]
    heat_aabb = _virtual_aabb(world, source, VirtualLinkKind.HEAT_SOURCE_SINK)
    out = []
    for other in live:
        if other == source:
            continue
        near = any(
            g.aabb.distance_to_aabb(heat_aabb) <= profile.radius
            for g in world._link_geoms(other)
            if g.colliding
        )
        if near:
            out.append(other)
    return out


# --- pipeline ---------------------------------------------------------------------


def step_all(world: World, rng: DetRng, dt: float = ACTION_DT) -> None:
    step_droplets(world, rng, dt)
    step_cleaning(world)
    step_toggle(world)
    step_slicing(world)
    step_temperature(world, dt)
