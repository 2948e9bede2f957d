"""Wire encoding, digests and delta folding."""

from __future__ import annotations

import re
import struct

import pytest
from hypothesis import given, strategies as st

from oikos.geometry import Pose
from oikos.rng import DetRng
from oikos.serialize import (
    canonical_json,
    decode_f64,
    decode_pose,
    decode_vec,
    diff_states,
    digest_of,
    encode_f64,
    encode_pose,
    encode_vec,
    fold_delta,
    state_digest,
    static_payload,
    wire_state,
)

from conftest import place

HEX64 = re.compile(r"^[0-9a-f]{16}$")

# Hand-derived IEEE-754 bit patterns (sign / biased exponent / mantissa).
FROZEN_BITS = {
    1.0: "3ff0000000000000",
    -2.0: "c000000000000000",
    0.5: "3fe0000000000000",
    23.0: "4037000000000000",
    0.0: "0000000000000000",
    1 / 3: "3fd5555555555555",
    9.81: "40239eb851eb851f",
}


def test_encode_f64_frozen_values():
    for value, expected in FROZEN_BITS.items():
        assert encode_f64(value) == expected, value
    # Negative zero keeps its sign bit: distinct bits, equal value.
    assert encode_f64(-0.0) == "8000000000000000"
    assert decode_f64("8000000000000000") == 0.0
    assert struct.pack(">d", decode_f64("8000000000000000"))[0] == 0x80


def test_decode_rejects_bad_length():
    with pytest.raises(ValueError):
        decode_f64("3ff0")


@given(st.floats(allow_nan=False, width=64))
def test_f64_round_trip_bit_exact(x):
    back = decode_f64(encode_f64(x))
    assert struct.pack(">d", back) == struct.pack(">d", x)


def test_vec_and_pose_round_trip():
    pose = Pose((0.25, -3.5, 1.0), (1.0, 0.0, 0.0, 0.0))
    assert decode_pose(encode_pose(pose)) == pose
    assert decode_vec(encode_vec((0.1, 0.2, 0.3))) == (0.1, 0.2, 0.3)


def test_canonical_json_sorted_and_compact():
    value = {"b": 1, "a": [True, None, "x"], "c": {"z": 0, "y": 2}}
    assert canonical_json(value) == '{"a":[true,null,"x"],"b":1,"c":{"y":2,"z":0}}'


def test_canonical_json_rejects_floats():
    with pytest.raises(ValueError):
        canonical_json({"x": 0.5})


def _assert_no_raw_floats(node):
    if isinstance(node, float):
        raise AssertionError(f"raw float {node!r} leaked into wire state")
    if isinstance(node, dict):
        for k, v in node.items():
            assert isinstance(k, str)
            _assert_no_raw_floats(v)
    elif isinstance(node, (list, tuple)):
        for v in node:
            _assert_no_raw_floats(v)


def test_wire_state_is_float_free_and_hex_encoded(world):
    place(world, "table", 0.0, 0.0, 0.0)
    place(world, "block", 0.0, 0.0, 1.0)
    world.settle_dirty()
    wire = wire_state(world, DetRng(7))
    _assert_no_raw_floats(wire)
    block = wire["objects"]["block_1"]
    assert HEX64.match(block["temperature"])
    assert all(HEX64.match(s) for s in block["pose"]["pos"])
    assert HEX64.match(wire["rng"])
    assert "step" not in wire and "step_index" not in wire


def test_digest_deterministic_and_sensitive(world):
    place(world, "block", 0.5, 0.5, 0.05)
    rng = DetRng(1)
    base = digest_of(world, rng)
    assert base == digest_of(world, DetRng(1))
    world.set_pose("block_1", Pose((0.5, 0.5, 0.25), (1.0, 0.0, 0.0, 0.0)))
    assert digest_of(world, rng) != base
    # RNG state is part of the digest.
    moved = digest_of(world, rng)
    rng.next_u64()
    assert digest_of(world, rng) != moved


def test_diff_empty_when_unchanged(world):
    place(world, "block", 0.0, 0.0, 0.05)
    wire = wire_state(world, DetRng(3))
    assert diff_states(wire, wire) == {}
    assert fold_delta(wire, {}) == wire


def test_diff_fold_round_trip_through_mutations(world):
    from oikos.world import Droplet

    place(world, "table", 0.0, 0.0, 0.0)
    place(world, "block", 0.0, 0.0, 1.0)
    world.settle_dirty()
    rng = DetRng(42)
    snapshots = [wire_state(world, rng)]

    world.set_pose("block_1", Pose((0.2, 0.1, 1.0), (1.0, 0.0, 0.0, 0.0)))
    world.settle_dirty()
    snapshots.append(wire_state(world, rng))

    d = Droplet(id="d_1", position=(0.0, 0.0, 1.5), velocity=(0.0, 0.0, -1.0))
    world.droplets[d.id] = d
    world.droplets_emitted += 1
    rng.next_u64()
    snapshots.append(wire_state(world, rng))

    world.register_box_model("block_half_1", "block", (0.05, 0.05, 0.025))
    world.add_object("block_half_1", world.obj("block_1").pose)
    world.obj("block_1").consumed = True
    del world.droplets["d_1"]
    snapshots.append(wire_state(world, rng))

    obj = world.obj("block_half_1_1")
    obj.temperature = 55.0
    obj.max_temperature = 55.0
    world.source_accumulators["faucet_1"] = 0.75
    world.toggle_contact_prev.add("right|stove_1")
    snapshots.append(wire_state(world, rng))

    for old, new in zip(snapshots, snapshots[1:]):
        delta = diff_states(old, new)
        folded = fold_delta(old, delta)
        assert folded == new
        assert state_digest(folded) == state_digest(new)


def test_delta_only_carries_changes(world):
    place(world, "table", 0.0, 0.0, 0.0)
    place(world, "block", 0.0, 0.0, 1.0)
    world.settle_dirty()
    old = wire_state(world, None)
    world.obj("block_1").wetness = 3
    new = wire_state(world, None)
    delta = diff_states(old, new)
    assert set(delta) == {"objects"}
    assert set(delta["objects"]["set"]) == {"block_1"}


def test_static_payload_covers_models_and_rooms(world):
    place(world, "table", 0.0, 0.0, 0.0)
    place(world, "peach", 0.0, 0.0, 1.0)
    payload = static_payload(world)
    assert set(payload["models"]) == {"peach", "table"}
    assert payload["rooms"]["kitchen"]["kind"] == "kitchen"
    shapes = {l["shape"]["kind"] for l in payload["models"]["peach"]["links"]}
    assert shapes == {"hull"}
    _assert_no_raw_floats(payload)
