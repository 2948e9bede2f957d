"""Canonical wire encoding of world state, digests and snapshot deltas.

Every float crossing the wire is rendered as the 16-hex-digit big-endian
IEEE-754 bit pattern of the double, so the wire form carries exact bits and
the canonical JSON layer only ever sees strings, integers, booleans and
nulls.  That makes byte-identical canonicalization trivial to reproduce in
any language: sort keys by code unit, no whitespace, ASCII only.

The state digest is a SHA-256 over that canonical JSON.  It covers
everything that can influence future evolution (poses, joints, extended
object state, droplets, accumulators, grasp bookkeeping, counters and the
session RNG) and deliberately excludes the step index, so two sessions that
reach the same state by different paths agree.
"""

from __future__ import annotations

import hashlib
import json
import struct
from typing import Any, Iterable, Optional

from .geometry import Box, ConvexHull, Pose, Vec3
from .rng import DetRng
from .world import Droplet, HandState, ObjectState, World

__all__ = [
    "encode_f64",
    "decode_f64",
    "encode_vec",
    "decode_vec",
    "encode_pose",
    "decode_pose",
    "canonical_json",
    "wire_state",
    "state_digest",
    "digest_of",
    "diff_states",
    "fold_delta",
    "static_payload",
]


# --- scalar codecs --------------------------------------------------------------


def encode_f64(x: float) -> str:
    """Big-endian IEEE-754 bits of ``x`` as 16 lowercase hex digits."""
    return struct.pack(">d", float(x)).hex()


def decode_f64(s: str) -> float:
    if len(s) != 16:
        raise ValueError(f"expected 16 hex digits, got {s!r}")
    return struct.unpack(">d", bytes.fromhex(s))[0]


def encode_vec(v: Iterable[float]) -> list[str]:
    return [encode_f64(x) for x in v]


def decode_vec(items: Iterable[str]) -> tuple[float, ...]:
    return tuple(decode_f64(s) for s in items)


def encode_pose(pose: Pose) -> dict[str, list[str]]:
    return {"orn": encode_vec(pose.orn), "pos": encode_vec(pose.pos)}


def decode_pose(d: dict[str, list[str]]) -> Pose:
    pos = decode_vec(d["pos"])
    orn = decode_vec(d["orn"])
    return Pose(pos, orn)  # type: ignore[arg-type]


def hex_u64(value: int) -> str:
    return format(value & 0xFFFFFFFFFFFFFFFF, "016x")


def _reject_floats(node: Any) -> None:
    if isinstance(node, float):
        raise ValueError(f"raw float {node!r} in canonical JSON; hex-encode it")
    if isinstance(node, dict):
        for v in node.values():
            _reject_floats(v)
    elif isinstance(node, (list, tuple)):
        for v in node:
            _reject_floats(v)


def canonical_json(value: Any) -> str:
    """Deterministic JSON: sorted keys, compact, ASCII, no floats allowed."""
    _reject_floats(value)
    return json.dumps(
        value, sort_keys=True, separators=(",", ":"), ensure_ascii=True,
        allow_nan=False,
    )


# --- wire state -----------------------------------------------------------------


def _wire_object(state: ObjectState) -> dict[str, Any]:
    return {
        "category": state.category,
        "consumed": state.consumed,
        "half_of": state.half_of,
        "initial_dust": state.initial_dust,
        "initial_stain": state.initial_stain,
        "joints": {k: encode_f64(v) for k, v in state.joints.items()},
        "max_temperature": encode_f64(state.max_temperature),
        "model": state.model_id,
        "particles": [
            {
                "active": p.active,
                "id": p.id,
                "kind": p.kind,
                "link": p.link_id,
                "point": encode_vec(p.local_point),
            }
            for p in state.particles
        ],
        "pose": encode_pose(state.pose),
        "sliced": state.sliced,
        "temperature": encode_f64(state.temperature),
        "toggled": state.toggled,
        "wetness": state.wetness,
    }


def _wire_droplet(d: Droplet) -> dict[str, Any]:
    return {
        "container": d.container,
        "offset": None if d.container_offset is None else encode_vec(d.container_offset),
        "position": encode_vec(d.position),
        "status": d.status,
        "velocity": encode_vec(d.velocity),
    }


def _wire_hand(hand: HandState) -> dict[str, Any]:
    grasp = None
    if hand.grasp is not None:
        grasp = {"object": hand.grasp.object_id, "rel": encode_pose(hand.grasp.rel)}
    return {
        "grasp": grasp,
        "pose": encode_pose(hand.pose),
        "press": encode_f64(hand.press),
        "trigger": encode_f64(hand.trigger),
    }


def wire_state(world: World, rng: Optional[DetRng] = None) -> dict[str, Any]:
    """Full canonical wire form of the mutable world (plus session RNG)."""
    agent = world.agent
    return {
        "agent": {
            "base_pos": encode_vec(agent.base_pos),
            "base_room": agent.base_room,
            "fov_half_angle": encode_f64(agent.fov_half_angle),
            "hands": {name: _wire_hand(h) for name, h in agent.hands.items()},
            "head_pose": encode_pose(agent.head_pose),
        },
        "config": {"literal_temperature": world.config.literal_temperature},
        "counters": {
            "droplet": world._droplet_counter,
            "instances": dict(world._counters),
            "particle": world._particle_counter,
        },
        "dirty": sorted(world.dirty),
        "droplets": {d.id: _wire_droplet(d) for d in world.droplets.values()},
        "droplets_emitted": world.droplets_emitted,
        "dynamic_models": {
            mid: {
                "category": m.category,
                "half_extents": encode_vec(m.links[0].shape.half_extents),  # type: ignore[union-attr]
                "mass": encode_f64(m.mass),
            }
            for mid, m in world.dynamic_models.items()
        },
        "grasp_order": {k: list(v) for k, v in world.grasp_order.items()},
        "objects": {i: _wire_object(s) for i, s in world.objects.items()},
        "rng": None if rng is None else hex_u64(rng.state),
        "source_accumulators": {
            k: encode_f64(v) for k, v in world.source_accumulators.items()
        },
        "toggle_contact_prev": sorted(world.toggle_contact_prev),
    }


def state_digest(wire: dict[str, Any]) -> str:
    return hashlib.sha256(canonical_json(wire).encode("ascii")).hexdigest()


def digest_of(world: World, rng: Optional[DetRng] = None) -> str:
    return state_digest(wire_state(world, rng))


# --- deltas ---------------------------------------------------------------------

_MAP_KEYS = ("objects", "droplets", "dynamic_models")


def diff_states(old: dict[str, Any], new: dict[str, Any]) -> dict[str, Any]:
    """Minimal delta such that ``fold_delta(old, delta) == new``.

    The big instance maps diff per entry (upsert whole entries, list
    removals); every other top-level key is replaced wholesale when changed.
    """
    delta: dict[str, Any] = {}
    for key in _MAP_KEYS:
        old_map, new_map = old[key], new[key]
        removed = sorted(k for k in old_map if k not in new_map)
        changed = {k: v for k, v in new_map.items() if old_map.get(k) != v}
        entry: dict[str, Any] = {}
        if removed:
            entry["remove"] = removed
        if changed:
            entry["set"] = changed
        if entry:
            delta[key] = entry
    top = {
        k: v
        for k, v in new.items()
        if k not in _MAP_KEYS and old.get(k) != v
    }
    if top:
        delta["top"] = top
    return delta


def fold_delta(base: dict[str, Any], delta: dict[str, Any]) -> dict[str, Any]:
    """Apply a delta produced by :func:`diff_states`; returns a new dict."""
    out = {k: (dict(v) if k in _MAP_KEYS else v) for k, v in base.items()}
    for key in _MAP_KEYS:
        entry = delta.get(key)
        if not entry:
            continue
        target = out[key]
        for removed in entry.get("remove", ()):
            target.pop(removed, None)
        target.update(entry.get("set", {}))
    out.update(delta.get("top", {}))
    return out


# --- static scene payload (geometry for clients) --------------------------------


def _wire_shape(shape: Any) -> dict[str, Any]:
    if isinstance(shape, Box):
        return {"kind": "box", "half_extents": encode_vec(shape.half_extents)}
    if isinstance(shape, ConvexHull):
        return {"kind": "hull", "vertices": [encode_vec(v) for v in shape.vertices]}
    raise TypeError(f"unsupported shape {type(shape).__name__}")


def _wire_model(model: Any) -> dict[str, Any]:
    links = []
    for link in model.links:
        joint = None
        if link.joint is not None:
            joint = {
                "axis": encode_vec(link.joint.axis),
                "kind": link.joint.kind,
                "range": [encode_f64(link.joint.lower), encode_f64(link.joint.upper)],
            }
        links.append(
            {
                "colliding": link.colliding,
                "id": link.id,
                "joint": joint,
                "local_pose": encode_pose(link.local_pose),
                "parent": link.parent,
                "shape": _wire_shape(link.shape),
            }
        )
    return {
        "category": model.category,
        "links": links,
        "mass": encode_f64(model.mass),
        "virtual_links": dict(model.virtual_links),
    }


def static_payload(world: World) -> dict[str, Any]:
    """Scene geometry a client needs to render: rooms plus referenced models."""
    model_ids = sorted({s.model_id for s in world.objects.values()})
    models = {}
    for mid in model_ids:
        models[mid] = _wire_model(
            world.dynamic_models.get(mid) or world.taxonomy.model(mid)
        )
    return {
        "models": models,
        "rooms": {
            r.id: {
                "floor_z": encode_f64(r.floor_z),
                "kind": r.kind,
                "polygon": [encode_vec(p) for p in r.polygon],
            }
            for r in world.rooms.values()
        },
    }
