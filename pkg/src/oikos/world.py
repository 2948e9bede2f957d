"""World state: posed object instances, rooms, droplets and the agent.

The kinematic model is quasi-static. Nothing carries momentum: objects sit
where they were put until something (agent motion, settling, a sampler)
moves them, and support is resolved by straight-down ray casts rather than
dynamics. Contacts are resolved at the level of per-link world AABBs with a
shared tolerance ``EPS_CONTACT``; resting contact carries zero force and
agent-driven contact carries the hand's declared press force.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .constants import (
    EPS_CONTACT,
    GRASP_BREAK_DIST,
    GRASP_GAP,
    GRASP_TRIGGER,
    GRAVITY,
    HAND_ANG_SPEED_MAX,
    HAND_FORCE_BUDGET,
    HAND_LIN_SPEED_MAX,
    N_HORIZONTAL_RAYS,
    ROOM_TEMP_C,
)
from .errors import (
    NoSupportFound,
    PenetrationUnresolvable,
    TargetOutsideRooms,
    UnknownInstance,
)
from .geometry import (
    Aabb,
    Box,
    ConvexHull,
    DISJOINT,
    Hit,
    IDENTITY_QUAT,
    Pose,
    Quat,
    Ray,
    Vec3,
    aabb_of_points,
    overlap,
    point_in_polygon,
    quat_conj,
    quat_from_axis_angle,
    quat_mul,
    quat_normalize,
    quat_rotate,
    ray_hits,
    sweep_max_fraction,
    v_add,
    v_dist,
    v_norm,
    v_scale,
    v_sub,
    world_aabb,
)
from .taxonomy import Ability, Joint, Link, ObjectModel, ResolvedCategory, Taxonomy

logger = logging.getLogger(__name__)

# Droplet lifecycle states.
DROPLET_FREE = "Free"
DROPLET_CONTAINED = "ContainedIn"
DROPLET_ABSORBED = "Absorbed"
DROPLET_DESTROYED = "Destroyed"

# Hand box half extents: palm plane is the -z face, the grasp volume hangs
# below it.
HAND_HALF_EXTENTS: Vec3 = (0.05, 0.06, 0.02)

# 16 in-hand test rays: 8 fixed origins on the hand's center plane at two
# depths inside the grasp volume, each cast along +x and -x of the hand frame.
# The shallow depth sits 1 cm under the palm so thin objects are caught.
_IN_HAND_ORIGINS: tuple[Vec3, ...] = tuple(
    (0.0, y, -(HAND_HALF_EXTENTS[2] + f * GRASP_GAP))
    for f in (0.1, 0.5)
    for y in (-0.03, -0.01, 0.01, 0.03)
)


@dataclass
class Particle:
    id: str
    kind: str  # "dust" | "stain"
    link_id: str
    local_point: Vec3
    active: bool = True


@dataclass
class Droplet:
    id: str
    position: Vec3
    velocity: Vec3
    status: str = DROPLET_FREE
    container: Optional[str] = None
    container_offset: Optional[Vec3] = None


@dataclass
class ObjectState:
    instance: str
    model_id: str
    category: str
    pose: Pose
    joints: dict[str, float] = field(default_factory=dict)
    temperature: float = ROOM_TEMP_C
    max_temperature: float = ROOM_TEMP_C
    wetness: int = 0
    toggled: bool = False
    sliced: bool = False
    particles: list[Particle] = field(default_factory=list)
    initial_dust: int = 0
    initial_stain: int = 0
    consumed: bool = False      # replaced by slice halves; keeps state queries alive
    half_of: Optional[str] = None  # set on slice halves; halves cannot be sliced again
    version: int = 0

    def bump(self) -> None:
        self.version += 1

    def dust_level(self) -> float:
        if self.initial_dust <= 0:
            return 0.0
        active = sum(1 for p in self.particles if p.kind == "dust" and p.active)
        return active / self.initial_dust

    def stain_level(self) -> float:
        if self.initial_stain <= 0:
            return 0.0
        active = sum(1 for p in self.particles if p.kind == "stain" and p.active)
        return active / self.initial_stain


@dataclass
class Grasp:
    object_id: str
    rel: Pose  # object pose expressed in the hand frame


@dataclass
class HandState:
    name: str
    pose: Pose
    trigger: float = 0.0
    grasp: Optional[Grasp] = None
    press: float = 0.0


@dataclass
class AgentState:
    base_pos: Vec3
    base_room: str
    head_pose: Pose
    fov_half_angle: float
    hands: dict[str, HandState]


@dataclass(frozen=True)
class Room:
    id: str
    kind: str
    polygon: tuple[tuple[float, float], ...]
    floor_z: float = 0.0


@dataclass(frozen=True)
class Contact:
    a: str
    link_a: str
    b: str
    link_b: str
    force: float


@dataclass
class WorldConfig:
    # Temperature updates use the additive exponential approach by default;
    # this switch selects the historical multiplicative recurrence instead.
    literal_temperature: bool = False


@dataclass(frozen=True)
class _LinkGeom:
    link_id: str
    shape: object
    world_pose: Pose
    aabb: Aabb
    colliding: bool


class World:
    def __init__(self, taxonomy: Taxonomy, rooms: Iterable[Room] = (),
                 config: Optional[WorldConfig] = None):
        self.taxonomy = taxonomy
        self.config = config or WorldConfig()
        self.rooms: dict[str, Room] = {r.id: r for r in rooms}
        self.objects: dict[str, ObjectState] = {}
        self.dynamic_models: dict[str, ObjectModel] = {}
        self.droplets: dict[str, Droplet] = {}
        self.droplets_emitted: int = 0
        self.source_accumulators: dict[str, float] = {}
        self.toggle_contact_prev: set[str] = set()
        self.dirty: set[str] = set()
        self.grasp_order: dict[str, list[str]] = {}  # object -> hand names, oldest first
        self.agent = self._default_agent()
        self._counters: dict[str, int] = {}
        self._droplet_counter = 0
        self._particle_counter = 0
        self._geom_cache: dict[str, tuple[int, list[_LinkGeom]]] = {}
        self.scene_digest: Optional[str] = None

    # --- agent defaults ----------------------------------------------------

    def _default_agent(self) -> AgentState:
        base = (0.0, 0.0, 0.0)
        return AgentState(
            base_pos=base,
            base_room=self._room_id_at((base[0], base[1])) or "",
            head_pose=Pose((base[0], base[1], 1.5)),
            fov_half_angle=1.0,
            hands={
                "right": HandState("right", Pose((base[0] + 0.35, base[1] - 0.2, 1.0))),
                "left": HandState("left", Pose((base[0] + 0.35, base[1] + 0.2, 1.0))),
            },
        )

    # --- lookups -------------------------------------------------------------

    def obj(self, instance: str) -> ObjectState:
        try:
            return self.objects[instance]
        except KeyError:
            raise UnknownInstance(instance) from None

    def live(self, instance: str) -> ObjectState:
        state = self.obj(instance)
        if state.consumed:
            raise UnknownInstance(instance)
        return state

    def model_of(self, instance: str) -> ObjectModel:
        state = self.obj(instance)
        if state.model_id in self.dynamic_models:
            return self.dynamic_models[state.model_id]
        return self.taxonomy.model(state.model_id)

    def resolved_of(self, instance: str) -> ResolvedCategory:
        return self.taxonomy.resolved(self.obj(instance).category)

    def live_ids(self) -> list[str]:
        return sorted(i for i, s in self.objects.items() if not s.consumed)

    # --- construction ----------------------------------------------------------

    def register_box_model(self, model_id: str, category: str, half_extents: Vec3,
                           mass: float = 1.0) -> ObjectModel:
        """Register a synthesized single-box model (slice halves, test props)."""
        self.taxonomy.resolved(category)  # validate category exists
        model = ObjectModel(
            id=model_id,
            category=category,
            links=(Link(id="body", shape=Box(half_extents)),),
            mass=mass,
        )
        self.dynamic_models[model_id] = model
        return model

    def add_object(self, model_id: str, pose: Pose, instance_id: Optional[str] = None) -> str:
        model = self.dynamic_models.get(model_id) or self.taxonomy.model(model_id)
        if instance_id is None:
            n = self._counters.get(model_id, 0)
            while True:
                n += 1
                instance_id = f"{model_id}_{n}"
                if instance_id not in self.objects:
                    break
            self._counters[model_id] = n
        if instance_id in self.objects:
            raise ValueError(f"instance id {instance_id!r} already present")
        joints = {l.id: l.joint.lower for l in model.links if l.joint is not None}
        self.objects[instance_id] = ObjectState(
            instance=instance_id,
            model_id=model_id,
            category=model.category,
            pose=pose,
            joints=joints,
        )
        return instance_id

    def set_pose(self, instance: str, pose: Pose) -> None:
        state = self.obj(instance)
        state.pose = pose
        state.bump()

    def set_joint(self, instance: str, link_id: str, q: float) -> None:
        state = self.obj(instance)
        link = self.model_of(instance).link(link_id)
        if link.joint is None:
            raise ValueError(f"link {link_id!r} of {instance!r} has no joint")
        state.joints[link_id] = min(max(q, link.joint.lower), link.joint.upper)
        state.bump()

    # --- link geometry -----------------------------------------------------------

    def _link_geoms(self, instance: str) -> list[_LinkGeom]:
        state = self.obj(instance)
        cached = self._geom_cache.get(instance)
        if cached is not None and cached[0] == state.version:
            return cached[1]
        model = self.model_of(instance)
        poses: dict[str, Pose] = {}
        geoms: list[_LinkGeom] = []
        remaining = list(model.links)
        while remaining:
            progressed = False
            for link in list(remaining):
                if link.parent is None:
                    parent_pose = state.pose
                elif link.parent in poses:
                    parent_pose = poses[link.parent]
                else:
                    continue
                local = link.local_pose
                if link.joint is not None:
                    q = state.joints.get(link.id, link.joint.lower)
                    local = local.compose(_joint_motion(link.joint, q))
                pose = parent_pose.compose(local)
                poses[link.id] = pose
                geoms.append(
                    _LinkGeom(link.id, link.shape, pose, world_aabb(link.shape, pose),
                              link.colliding)
                )
                remaining.remove(link)
                progressed = True
            if not progressed:
                raise ValueError(f"link hierarchy of {model.id!r} is not a tree")
        self._geom_cache[instance] = (state.version, geoms)
        return geoms

    def link_world_pose(self, instance: str, link_id: str) -> Pose:
        for g in self._link_geoms(instance):
            if g.link_id == link_id:
                return g.world_pose
        raise KeyError(link_id)

    def link_world_aabb(self, instance: str, link_id: str) -> Aabb:
        for g in self._link_geoms(instance):
            if g.link_id == link_id:
                return g.aabb
        raise KeyError(link_id)

    def object_aabb(self, instance: str, colliding_only: bool = True) -> Aabb:
        geoms = self._link_geoms(instance)
        picked = [g.aabb for g in geoms if g.colliding] if colliding_only else [g.aabb for g in geoms]
        if not picked:
            picked = [g.aabb for g in geoms]
        box = picked[0]
        for a in picked[1:]:
            box = box.union(a)
        return box

    def com(self, instance: str) -> Vec3:
        """Center of mass proxy: center of the colliding-geometry AABB."""
        return self.object_aabb(instance).center()

    def mass(self, instance: str) -> float:
        return self.model_of(instance).mass

    # --- queries --------------------------------------------------------------------

    def collidable_shapes(self, exclude: frozenset[str] = frozenset()):
        shapes = []
        for instance in self.live_ids():
            if instance in exclude:
                continue
            for g in self._link_geoms(instance):
                if g.colliding:
                    shapes.append((instance, g.link_id, g.shape, g.world_pose))
        return shapes

    def raycast(self, ray: Ray, exclude: frozenset[str] = frozenset()) -> list[Hit]:
        return ray_hits(self.collidable_shapes(exclude), ray)

    def world_diameter(self) -> float:
        boxes = [self.object_aabb(i) for i in self.live_ids()]
        lo, hi = [math.inf] * 3, [-math.inf] * 3
        for b in boxes:
            for i in range(3):
                lo[i] = min(lo[i], b.min[i])
                hi[i] = max(hi[i], b.max[i])
        for room in self.rooms.values():
            (x0, y0), (x1, y1) = _poly_bounds(room.polygon)
            lo[0], lo[1] = min(lo[0], x0), min(lo[1], y0)
            hi[0], hi[1] = max(hi[0], x1), max(hi[1], y1)
            lo[2] = min(lo[2], room.floor_z)
            hi[2] = max(hi[2], room.floor_z + 3.0)
        if not boxes and not self.rooms:
            return 10.0
        span = v_dist(tuple(lo), tuple(hi))
        return max(span, 10.0)

    def contacts(self) -> list[Contact]:
        """All touching/penetrating link pairs between live objects.

        Force is the largest declared press force among hands currently
        grasping either side; plain resting contact carries 0 N.
        """
        ids = self.live_ids()
        out: list[Contact] = []
        for i, a in enumerate(ids):
            box_a = self.object_aabb(a)
            for b in ids[i + 1:]:
                if overlap(box_a, self.object_aabb(b), EPS_CONTACT).kind == DISJOINT:
                    continue
                force = 0.0
                for side in (a, b):
                    for hand_name in self.grasp_order.get(side, ()):
                        force = max(force, self.agent.hands[hand_name].press)
                for ga in self._link_geoms(a):
                    if not ga.colliding:
                        continue
                    for gb in self._link_geoms(b):
                        if not gb.colliding:
                            continue
                        if overlap(ga.aabb, gb.aabb, EPS_CONTACT).kind != DISJOINT:
                            out.append(Contact(a, ga.link_id, b, gb.link_id, force))
        return out

    def in_contact(self, a: str, b: str) -> bool:
        if a > b:
            a, b = b, a
        return any(c.a == a and c.b == b for c in self.contacts())

    def vertical_axis_objs(self, instance: str, up: bool) -> list[str]:
        """Objects intersected by the vertical ray from the instance's COM,
        nearest first."""
        com = self.com(instance)
        direction = (0.0, 0.0, 1.0) if up else (0.0, 0.0, -1.0)
        hits = self.raycast(Ray(com, direction, self.world_diameter()),
                            exclude=frozenset((instance,)))
        seen: list[str] = []
        for h in hits:
            if h.object_id not in seen:
                seen.append(h.object_id)
        return seen

    def horizontal_plane_objs(self, instance: str) -> set[str]:
        """Objects hit by evenly spaced horizontal rays from the COM."""
        com = self.com(instance)
        diameter = self.world_diameter()
        found: set[str] = set()
        for k in range(N_HORIZONTAL_RAYS):
            ang = 2.0 * math.pi * k / N_HORIZONTAL_RAYS
            direction = (math.cos(ang), math.sin(ang), 0.0)
            for h in self.raycast(Ray(com, direction, diameter),
                                  exclude=frozenset((instance,))):
                found.add(h.object_id)
        return found

    def enclosure_axes(self, instance: str, container: str) -> int:
        """Count principal axes whose rays from the COM hit ``container``
        in both directions.  Occluders don't shadow the container: every
        intersection along the ray is considered, not just the first."""
        com = self.com(instance)
        diameter = self.world_diameter()
        exclude = frozenset((instance,))
        axes = 0
        for axis in ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)):
            hit_both = True
            for sign in (1.0, -1.0):
                ray = Ray(com, v_scale(axis, sign), diameter)
                if not any(h.object_id == container for h in self.raycast(ray, exclude)):
                    hit_both = False
                    break
            if hit_both:
                axes += 1
        return axes

    def is_inside(self, instance: str, container: str) -> bool:
        """Enclosure test: surrounded by the container on at least two of
        the three principal axes."""
        if instance == container:
            return False
        return self.enclosure_axes(instance, container) >= 2

    # --- rooms ------------------------------------------------------------------------

    def _room_id_at(self, xy: tuple[float, float]) -> Optional[str]:
        for room_id in sorted(self.rooms):
            if point_in_polygon(xy, self.rooms[room_id].polygon):
                return room_id
        return None

    def room_at(self, xy: tuple[float, float]) -> Optional[Room]:
        room_id = self._room_id_at(xy)
        return self.rooms[room_id] if room_id else None

    def floor_contact(self, instance: str) -> Optional[str]:
        """Room id if the instance rests on that room's floor."""
        box = self.object_aabb(instance)
        c = box.center()
        room = self.room_at((c[0], c[1]))
        if room is None:
            return None
        if abs(box.min[2] - room.floor_z) <= EPS_CONTACT:
            return room.id
        return None

    # --- settling ----------------------------------------------------------------------

    def settle(self, instance: str) -> None:
        """Drop the instance straight down onto the first support below it.

        Casts downward rays from the four base corners plus the base center
        (starting a contact-tolerance above the base so resting objects see
        their own support), takes the highest hit as the support height, and
        falls back to the room floor when nothing is underneath.
        """
        state = self.live(instance)
        if self.grasp_order.get(instance):
            return  # held objects do not settle
        box = self.object_aabb(instance)
        z0 = box.min[2] + EPS_CONTACT
        cx, cy = box.center()[0], box.center()[1]
        origins = [
            (box.min[0], box.min[1], z0),
            (box.min[0], box.max[1], z0),
            (box.max[0], box.min[1], z0),
            (box.max[0], box.max[1], z0),
            (cx, cy, z0),
        ]
        diameter = self.world_diameter()
        support_z = None
        for origin in origins:
            hits = self.raycast(Ray(origin, (0.0, 0.0, -1.0), diameter),
                                exclude=frozenset((instance,)))
            if hits:
                z = hits[0].point[2]
                support_z = z if support_z is None else max(support_z, z)
        if support_z is None:
            room = self.room_at((cx, cy))
            if room is None:
                raise NoSupportFound(instance)
            support_z = room.floor_z
        dz = support_z - box.min[2]
        # Sub-picometer corrections are float noise from the ray transform;
        # suppressing them makes a resting pose an exact fixed point.
        if abs(dz) > 1e-12:
            state.pose = Pose(v_add(state.pose.pos, (0.0, 0.0, dz)), state.pose.orn)
            state.bump()
        self._check_penetration(instance)

    def _check_penetration(self, instance: str) -> None:
        for other in self.live_ids():
            if other == instance:
                continue
            if overlap(self.object_aabb(instance), self.object_aabb(other),
                       EPS_CONTACT).kind == DISJOINT:
                continue
            for ga in self._link_geoms(instance):
                if not ga.colliding:
                    continue
                for gb in self._link_geoms(other):
                    if not gb.colliding:
                        continue
                    res = overlap(ga.aabb, gb.aabb, EPS_CONTACT)
                    if res.kind == "penetrating":
                        raise PenetrationUnresolvable(instance, other, res.depth)

    def settle_dirty(self) -> None:
        """Settle everything marked dirty, tolerating unresolvable spots."""
        for instance in sorted(self.dirty):
            if instance not in self.objects or self.objects[instance].consumed:
                continue
            try:
                self.settle(instance)
            except (NoSupportFound, PenetrationUnresolvable) as exc:
                logger.warning("settle skipped: %s", exc)
        self.dirty.clear()

    def mark_riders_dirty(self, instance: str) -> None:
        """Flag objects resting on top of ``instance`` for re-settling."""
        top = self.object_aabb(instance).max[2]
        for c in self.contacts():
            other = None
            if c.a == instance:
                other = c.b
            elif c.b == instance:
                other = c.a
            if other is None or self.grasp_order.get(other):
                continue
            if self.object_aabb(other).min[2] >= top - 1e-3:
                self.dirty.add(other)

    # --- agent: hands -------------------------------------------------------------------

    def hand(self, name: str) -> HandState:
        return self.agent.hands[name]

    def hand_aabb(self, name: str) -> Aabb:
        return world_aabb(Box(HAND_HALF_EXTENTS), self.hand(name).pose)

    def hand_palm_center(self, name: str) -> Vec3:
        return self.hand(name).pose.pos

    def in_hand_objects(self, name: str) -> list[str]:
        """Objects crossed by the 16 in-hand test rays, sorted by id."""
        pose = self.hand(name).pose
        shapes = self.collidable_shapes()
        found: set[str] = set()
        for local_origin in _IN_HAND_ORIGINS:
            origin = pose.transform_point(local_origin)
            for sign in (1.0, -1.0):
                direction = quat_rotate(pose.orn, (sign, 0.0, 0.0))
                for h in ray_hits(shapes, Ray(origin, direction, GRASP_GAP)):
                    found.add(h.object_id)
        return sorted(found)

    def grasped_by(self, instance: str) -> list[str]:
        return list(self.grasp_order.get(instance, ()))

    def set_trigger(self, name: str, value: float) -> Optional[str]:
        """Update the trigger; returns the newly grasped object id, if any.

        Grasp forms on the rising edge through the threshold when some object
        is simultaneously (a) crossed by the in-hand rays, (b) the nearest
        candidate COM to the palm, and (c) in contact with the hand volume.
        Falling through the threshold releases.
        """
        hand = self.hand(name)
        prev = hand.trigger
        hand.trigger = min(max(value, 0.0), 1.0)
        if prev < GRASP_TRIGGER <= hand.trigger and hand.grasp is None:
            return self._try_grasp(name)
        if prev >= GRASP_TRIGGER > hand.trigger and hand.grasp is not None:
            self.release(name)
        return None

    def _try_grasp(self, name: str) -> Optional[str]:
        hand = self.hand(name)
        candidates = self.in_hand_objects(name)
        if not candidates:
            return None
        palm = self.hand_palm_center(name)
        candidates.sort(key=lambda i: (v_dist(self.com(i), palm), i))
        best = candidates[0]
        hand_box = self.hand_aabb(name)
        touching = any(
            g.colliding and overlap(hand_box, g.aabb, EPS_CONTACT).kind != DISJOINT
            for g in self._link_geoms(best)
        )
        if not touching:
            return None
        obj = self.obj(best)
        hand.grasp = Grasp(best, hand.pose.inverse().compose(obj.pose))
        self.grasp_order.setdefault(best, []).append(name)
        return best

    def release(self, name: str) -> None:
        hand = self.hand(name)
        if hand.grasp is None:
            return
        obj_id = hand.grasp.object_id
        hand.grasp = None
        order = self.grasp_order.get(obj_id, [])
        if name in order:
            order.remove(name)
        if not order:
            self.grasp_order.pop(obj_id, None)
            if obj_id in self.objects and not self.objects[obj_id].consumed:
                self.dirty.add(obj_id)

    def move_hand(self, name: str, linear: Vec3, angular: Vec3, press: float,
                  dt: float) -> None:
        """Integrate one hand twist over ``dt`` with collision clamping.

        Linear and angular speeds saturate at the hand limits. Translation is
        clamped by a swept-volume test against every non-grasped object;
        rotation is applied only if it does not create penetration. A grasped
        object rides along rigidly (its own collisions do not clamp).
        """
        hand = self.hand(name)
        hand.press = max(press, 0.0)

        lin_speed = v_norm(linear)
        if lin_speed > HAND_LIN_SPEED_MAX:
            linear = v_scale(linear, HAND_LIN_SPEED_MAX / lin_speed)
        ang_speed = v_norm(angular)
        if ang_speed > HAND_ANG_SPEED_MAX:
            angular = v_scale(angular, HAND_ANG_SPEED_MAX / ang_speed)
            ang_speed = HAND_ANG_SPEED_MAX

        grabbed = hand.grasp.object_id if hand.grasp is not None else None
        obstacles = [
            g.aabb
            for inst in self.live_ids()
            if inst != grabbed
            for g in self._link_geoms(inst)
            if g.colliding
        ]

        moved = False
        if ang_speed > 1e-12:
            spin = quat_from_axis_angle(angular, ang_speed * dt)
            new_orn = quat_normalize(quat_mul(spin, hand.pose.orn))
            candidate = Pose(hand.pose.pos, new_orn)
            cand_box = world_aabb(Box(HAND_HALF_EXTENTS), candidate)
            if all(overlap(cand_box, ob, EPS_CONTACT).kind != "penetrating"
                   for ob in obstacles):
                hand.pose = candidate
                moved = True

        delta = v_scale(linear, dt)
        if v_norm(delta) > 1e-12:
            frac = sweep_max_fraction(self.hand_aabb(name), delta, obstacles, EPS_CONTACT)
            if frac > 0.0:
                hand.pose = Pose(v_add(hand.pose.pos, v_scale(delta, frac)), hand.pose.orn)
                moved = True

        if moved and hand.grasp is not None:
            obj_id = hand.grasp.object_id
            primary = self.grasp_order.get(obj_id, [None])[0]
            if primary == name:
                self.mark_riders_dirty(obj_id)
                self.set_pose(obj_id, hand.pose.compose(hand.grasp.rel))

    def maintain_grasps(self) -> list[str]:
        """Enforce grasp break rules; returns the objects released.

        A grasp snaps when the palm drifts too far from the object COM, and
        every grasp on an object breaks when its static weight exceeds the
        combined hand force budget while nothing else supports it.
        """
        released: list[str] = []
        for obj_id in sorted(self.grasp_order):
            hands = list(self.grasp_order.get(obj_id, ()))
            if not hands:
                continue
            weight = self.mass(obj_id) * GRAVITY
            budget = HAND_FORCE_BUDGET * len(hands)
            if weight > budget and not self._is_supported(obj_id):
                for hand_name in hands:
                    self.hand(hand_name).grasp = None
                self.grasp_order.pop(obj_id, None)
                self.dirty.add(obj_id)
                released.append(obj_id)
                continue
            for hand_name in hands:
                hand = self.hand(hand_name)
                if hand.grasp is None:
                    continue
                if v_dist(self.hand_palm_center(hand_name), self.com(obj_id)) > GRASP_BREAK_DIST:
                    self.release(hand_name)
                    if obj_id not in self.grasp_order:
                        released.append(obj_id)
        return released

    def _is_supported(self, instance: str) -> bool:
        """True when something other than the agent holds the weight."""
        if self.floor_contact(instance) is not None:
            return True
        base = self.object_aabb(instance).min[2]
        for c in self.contacts():
            other = c.b if c.a == instance else c.a if c.b == instance else None
            if other is None or self.grasp_order.get(other):
                continue
            if self.object_aabb(other).max[2] <= base + 1e-3 + EPS_CONTACT:
                return True
        return False

    def hands_touching_aabb(self, box: Aabb) -> bool:
        return any(
            overlap(self.hand_aabb(n), box, EPS_CONTACT).kind != DISJOINT
            for n in sorted(self.agent.hands)
        )

    # --- agent: base ---------------------------------------------------------------------

    def teleport_base(self, target: tuple[float, float]) -> None:
        room_id = self._room_id_at(target)
        if room_id is None:
            raise TargetOutsideRooms(target)
        old = self.agent.base_pos
        floor_z = self.rooms[room_id].floor_z
        delta = (target[0] - old[0], target[1] - old[1], floor_z - old[2])
        self.agent.base_pos = (target[0], target[1], floor_z)
        self.agent.base_room = room_id
        self.agent.head_pose = Pose(v_add(self.agent.head_pose.pos, delta),
                                    self.agent.head_pose.orn)
        for hand in self.agent.hands.values():
            hand.pose = Pose(v_add(hand.pose.pos, delta), hand.pose.orn)
            if hand.grasp is not None:
                self.set_pose(hand.grasp.object_id, hand.pose.compose(hand.grasp.rel))

    # --- particles and droplets ------------------------------------------------------------

    def new_particle_id(self) -> str:
        self._particle_counter += 1
        return f"p_{self._particle_counter}"

    def new_droplet_id(self) -> str:
        self._droplet_counter += 1
        return f"drop_{self._droplet_counter}"

    def droplet_ledger(self) -> dict[str, int]:
        counts = {DROPLET_FREE: 0, DROPLET_CONTAINED: 0, DROPLET_ABSORBED: 0,
                  DROPLET_DESTROYED: 0}
        for d in self.droplets.values():
            counts[d.status] += 1
        counts["emitted"] = self.droplets_emitted
        return counts


def _joint_motion(joint: Joint, q: float) -> Pose:
    if joint.kind == "Prismatic":
        return Pose(v_scale(joint.axis, q))
    return Pose((0.0, 0.0, 0.0), quat_from_axis_angle(joint.axis, q))


def _poly_bounds(polygon) -> tuple[tuple[float, float], tuple[float, float]]:
    xs = [p[0] for p in polygon]
    ys = [p[1] for p in polygon]
    return (min(xs), min(ys)), (max(xs), max(ys))


# --- scene files ---------------------------------------------------------------------------


def _pose_to_json(pose: Pose) -> dict:
    return {"pos": list(pose.pos), "orn": list(pose.orn)}


def _pose_from_json(data: dict) -> Pose:
    return Pose(tuple(data["pos"]), tuple(data.get("orn", IDENTITY_QUAT)))


def load_scene(source, taxonomy: Taxonomy, config: Optional[WorldConfig] = None) -> World:
    """Build a world from a scene file path, JSON text or dict."""
    if isinstance(source, (str, Path)) and Path(str(source)).exists():
        raw = Path(source).read_bytes()
        data = json.loads(raw)
    elif isinstance(source, (str, bytes)):
        raw = source.encode() if isinstance(source, str) else source
        data = json.loads(raw)
    elif isinstance(source, dict):
        raw = json.dumps(source, sort_keys=True, separators=(",", ":")).encode()
        data = source
    else:
        raise TypeError(f"cannot load scene from {type(source).__name__}")

    rooms = [
        Room(r["id"], r.get("kind", "room"),
             tuple(tuple(p) for p in r["polygon"]), float(r.get("floor_z", 0.0)))
        for r in data.get("rooms", ())
    ]
    world = World(taxonomy, rooms, config)
    world.scene_digest = hashlib.sha256(raw).hexdigest()

    for dm in data.get("dynamic_models", ()):
        world.register_box_model(dm["id"], dm["category"],
                                 tuple(dm["half_extents"]), float(dm.get("mass", 1.0)))

    for entry in data.get("objects", ()):
        instance = world.add_object(entry["model"], _pose_from_json(entry["pose"]),
                                    entry.get("id"))
        state = world.objects[instance]
        for link_id, q in entry.get("joints", {}).items():
            world.set_joint(instance, link_id, float(q))
        st = entry.get("state")
        if st:
            state.temperature = float(st.get("T", state.temperature))
            state.max_temperature = float(st.get("T_max", state.max_temperature))
            state.wetness = int(st.get("w", state.wetness))
            state.toggled = bool(st.get("toggled", state.toggled))
            state.sliced = bool(st.get("sliced", state.sliced))
            state.consumed = bool(st.get("consumed", state.consumed))
            state.half_of = st.get("half_of", state.half_of)
            state.initial_dust = int(st.get("initial_dust", 0))
            state.initial_stain = int(st.get("initial_stain", 0))
            for p in st.get("particles", ()):
                state.particles.append(
                    Particle(world.new_particle_id(), p["kind"], p["link"],
                             tuple(p["point"]), bool(p.get("active", True)))
                )

    agent = data.get("agent")
    if agent:
        base_xy = agent.get("base", (0.0, 0.0))
        room_id = world._room_id_at(tuple(base_xy)) or ""
        floor_z = world.rooms[room_id].floor_z if room_id else 0.0
        base = (float(base_xy[0]), float(base_xy[1]), floor_z)
        head = (_pose_from_json(agent["head"]) if "head" in agent
                else Pose((base[0], base[1], base[2] + 1.5)))
        hands = {}
        for hand_name in ("right", "left"):
            spec = agent.get("hands", {}).get(hand_name)
            if spec:
                pose = _pose_from_json(spec)
            else:
                dy = -0.2 if hand_name == "right" else 0.2
                pose = Pose((base[0] + 0.35, base[1] + dy, base[2] + 1.0))
            hands[hand_name] = HandState(hand_name, pose)
        world.agent = AgentState(base, room_id, head,
                                 float(agent.get("fov_half_angle", 1.0)), hands)
    else:
        world.agent = world._default_agent()
    return world


def save_scene(world: World) -> dict:
    """Serialize the world back to the scene schema (round-trips load_scene)."""
    data: dict = {
        "rooms": [
            {
                "id": r.id,
                "kind": r.kind,
                "polygon": [list(p) for p in r.polygon],
                "floor_z": r.floor_z,
            }
            for _, r in sorted(world.rooms.items())
        ],
        "objects": [],
        "agent": {
            "base": [world.agent.base_pos[0], world.agent.base_pos[1]],
            "head": _pose_to_json(world.agent.head_pose),
            "fov_half_angle": world.agent.fov_half_angle,
            "hands": {
                name: _pose_to_json(h.pose)
                for name, h in sorted(world.agent.hands.items())
            },
        },
    }
    if world.dynamic_models:
        data["dynamic_models"] = [
            {
                "id": m.id,
                "category": m.category,
                "half_extents": list(m.links[0].shape.half_extents),
                "mass": m.mass,
            }
            for _, m in sorted(world.dynamic_models.items())
        ]
    for instance in sorted(world.objects):
        state = world.objects[instance]
        entry: dict = {
            "id": instance,
            "model": state.model_id,
            "pose": _pose_to_json(state.pose),
        }
        if state.joints:
            entry["joints"] = {k: v for k, v in sorted(state.joints.items())}
        st: dict = {}
        if state.temperature != ROOM_TEMP_C:
            st["T"] = state.temperature
        if state.max_temperature != state.temperature:
            st["T_max"] = state.max_temperature
        if state.wetness:
            st["w"] = state.wetness
        if state.toggled:
            st["toggled"] = True
        if state.sliced:
            st["sliced"] = True
        if state.consumed:
            st["consumed"] = True
        if state.half_of:
            st["half_of"] = state.half_of
        if state.initial_dust:
            st["initial_dust"] = state.initial_dust
        if state.initial_stain:
            st["initial_stain"] = state.initial_stain
        if state.particles:
            st["particles"] = [
                {
                    "kind": p.kind,
                    "link": p.link_id,
                    "point": list(p.local_point),
                    "active": p.active,
                }
                for p in state.particles
            ]
        if st:
            entry["state"] = st
        data["objects"].append(entry)
    return data


def canonical_scene_bytes(scene: dict) -> bytes:
    return json.dumps(scene, sort_keys=True, separators=(",", ":")).encode()
