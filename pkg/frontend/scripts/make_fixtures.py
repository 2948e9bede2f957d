#!/usr/bin/env python3
"""Regenerate the cross-implementation fixtures under tests/fixtures/.

The console must reproduce the kernel's canonical JSON, digests, delta folds
and link geometry byte for byte, so the expected values in these fixtures
are produced by the kernel itself.  Run from anywhere; writes JSON next to
the test suite.  Requires the oikos package to be importable.
"""

import json
import hashlib
import math
import sys
from pathlib import Path

from oikos.assets import default_taxonomy_path, task_path
from oikos.policies import POLICIES
from oikos.runtime import Noop, create_session, encode_action, load_task, step
from oikos.serialize import (
    canonical_json,
    diff_states,
    encode_f64,
    state_digest,
    static_payload,
    wire_state,
)
from oikos.taxonomy import load_taxonomy

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
SNAPSHOT_INTERVAL = 120


def write(name: str, payload) -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    path = FIXTURES / name
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    print(f"wrote {path} ({path.stat().st_size} bytes)")


def codec_fixture() -> None:
    floats = [
        0.0, -0.0, 1.0, -1.0, 0.5, -0.5, 0.1, 1.0 / 3.0, 23.0, 200.0, -40.0,
        math.pi, math.e, 1e308, -1e308, 5e-324, 2.2250738585072014e-308,
        6.283185307179586, 0.030000000000000002, 1e-9, -2.5e-10,
        float("inf"), float("-inf"),
    ]
    json_cases = [
        {"b": 1, "a": [True, False, None], "z": "plain"},
        {"nested": {"y": [1, 2, 3], "x": {"deep": "ok"}}, "empty": {}, "list": []},
        {"text": 'quote " backslash \\ slash / tab \t newline \n bell '},
        {"unicode": "café ☃ \U0001f600", "del": ""},
        {"keys out of order": 1, "Keys": 2, "_keys": 3, "0keys": 4},
        {"ints": [0, -1, 7, 123456789, -987654321]},
    ]
    actions = [
        ("noop", {}),
        ("move_hand", {"hand": "right", "linear": (0.25, -1.5, 0.0),
                       "angular": (0.0, 0.0, 1.2), "press": 12.0}),
        ("set_trigger", {"hand": "left", "fraction": 0.65}),
        ("teleport_base", {"point": (-2.0, 1.25)}),
    ]
    from oikos.runtime import MoveHand, SetTrigger, TeleportBase

    built = [Noop(), MoveHand(**actions[1][1]), SetTrigger(**actions[2][1]),
             TeleportBase(**actions[3][1])]
    write("codec.json", {
        "floats": [{"value": repr(x), "hex": encode_f64(x)} for x in floats],
        "canonical": [
            {
                "value": case,
                "text": canonical_json(case),
                "sha256": hashlib.sha256(canonical_json(case).encode()).hexdigest(),
            }
            for case in json_cases
        ],
        "actions": [encode_action(a) for a in built],
    })


def geom_fixture() -> None:
    taxonomy = load_taxonomy(default_taxonomy_path())
    session = create_session(load_task(task_path("cooking_meat")), taxonomy, 0)
    world = session.world
    # Exercise a revolute joint so the client's joint math is covered too.
    fridge = world.obj("fridge_1")
    fridge.joints["door"] = 0.7
    fridge.version += 1

    objects = {}
    for instance in sorted(world.objects):
        state = world.obj(instance)
        if state.consumed:
            continue
        links = {}
        for geom in world._link_geoms(instance):
            links[geom.link_id] = {
                "min": [encode_f64(v) for v in geom.aabb.min],
                "max": [encode_f64(v) for v in geom.aabb.max],
            }
        objects[instance] = links
    write("geom.json", {
        "static": static_payload(world),
        "state": wire_state(world, session.rng),
        "expected_link_aabbs": objects,
    })


def fold_fixture() -> None:
    """Synthetic delta folds, including removals, which live sessions never
    produce (the kernel's instance maps are append-only) but the delta
    contract still defines."""
    from oikos.serialize import fold_delta

    def shell(objects, droplets, models, extra):
        base = {
            "agent": {"hands": {}},
            "config": {"literal_temperature": False},
            "counters": {"droplet": 0, "instances": {}, "particle": 0},
            "dirty": [],
            "droplets": droplets,
            "droplets_emitted": len(droplets),
            "dynamic_models": models,
            "grasp_order": {},
            "objects": objects,
            "rng": "00000000000000ff",
            "source_accumulators": {},
            "toggle_contact_prev": [],
        }
        base.update(extra)
        return base

    a = shell(
        {"cup_1": {"category": "cup", "toggled": False},
         "jug_1": {"category": "jug", "toggled": False}},
        {"1": {"status": "Free"}, "2": {"status": "Free"}},
        {"blob": {"category": "block", "mass": encode_f64(1.0)}},
        {},
    )
    b = shell(
        {"cup_1": {"category": "cup", "toggled": True}},
        {"2": {"status": "Absorbed"}, "3": {"status": "Free"}},
        {},
        {"dirty": ["cup_1"], "droplets_emitted": 3, "rng": "0000000000000100"},
    )
    cases = []
    for old, new in [(a, b), (b, a), (a, a)]:
        delta = diff_states(old, new)
        folded = fold_delta(old, delta)
        assert folded == new
        cases.append({
            "base": old,
            "delta": delta,
            "result": new,
            "result_digest": state_digest(new),
        })
    write("fold.json", {"cases": cases})


def stream_fixture() -> None:
    taxonomy = load_taxonomy(default_taxonomy_path())
    task = load_task(task_path("soaking_towel"))
    session = create_session(task, taxonomy, 0)
    policy = POLICIES["soaking_towel"](session)

    prev = wire_state(session.world, session.rng)
    steps = []
    snapshot0 = {
        "digest": session.last_digest,
        "state": prev,
        "static": static_payload(session.world),
        "step": 0,
    }
    for _ in range(600):
        if session.done:
            break
        try:
            actions = next(policy)
        except StopIteration:
            actions = [Noop()]
        result = step(session, actions)
        new = wire_state(session.world, session.rng)
        entry = {
            "actions": [encode_action(a) for a in actions],
            "digest": result.digest,
            "done": result.done,
            "events": result.events,
            "step": result.step_index,
            "success": result.success,
        }
        if result.step_index % SNAPSHOT_INTERVAL == 0:
            entry["snapshot"] = {
                "digest": result.digest,
                "state": new,
                "static": static_payload(session.world),
                "step": result.step_index,
            }
        else:
            entry["changes"] = diff_states(prev, new)
        assert state_digest(new) == result.digest
        prev = new
        steps.append(entry)

    counts = {
        "deltas": sum(1 for s in steps if "changes" in s),
        "snapshots": sum(1 for s in steps if "snapshot" in s),
        "droplet_upserts": sum(
            len(s.get("changes", {}).get("droplets", {}).get("set", {}))
            for s in steps
        ),
        "events": sum(len(s["events"]) for s in steps),
    }
    assert counts["snapshots"] >= 1, "stream must cross a snapshot interval"
    assert counts["droplet_upserts"] >= 1, "stream must carry droplet changes"
    assert counts["events"] >= 2, "stream must include predicate events"
    assert session.success and session.done
    write("session_stream.json", {
        "task": session.header["task"],
        "initial_digest": session.header["initial_digest"],
        "snapshot": snapshot0,
        "steps": steps,
        "counts": counts,
    })
    print("stream counts:", counts, "steps:", len(steps))


if __name__ == "__main__":
    codec_fixture()
    geom_fixture()
    fold_fixture()
    stream_fixture()
    sys.exit(0)
