"""The command-line surface: run/record, replay, sample, populate, bench."""

import json

import pytest

from oikos.cli import main

BENCH_SCENE = {
    "rooms": [{"id": "r", "kind": "room", "floor_z": 0.0,
               "polygon": [[-1, -1], [1, -1], [1, 1], [-1, 1]]}],
    "objects": [{"id": "block_1", "model": "block", "pose": {"pos": [0, 0, 0.05]}}],
}


@pytest.fixture
def bench_scene(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(BENCH_SCENE))
    return str(path)


def test_run_records_and_replay_verifies(tmp_path, capsys):
    log = tmp_path / "episode.log"
    code = main(["run", "grasping_book", "--seed", "5",
                 "--policy", "scripted:grasping_book", "--record", str(log)])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["success"] is True
    assert summary["task"] == "grasping_book"

    code = main(["replay", str(log)])
    assert code == 0
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["ok"] is True
    assert verdict["final_digest"] == summary["final_digest"]
    assert verdict["steps"] == summary["steps"]


def test_replay_flags_tampering(tmp_path, capsys):
    log = tmp_path / "episode.log"
    assert main(["run", "grasping_book", "--seed", "5",
                 "--policy", "scripted:grasping_book", "--record", str(log)]) == 0
    capsys.readouterr()
    raw = bytearray(log.read_bytes())
    raw[len(raw) // 2] ^= 0x01
    log.write_bytes(bytes(raw))
    code = main(["replay", str(log)])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_policy_is_reported(capsys):
    code = main(["run", "grasping_book", "--policy", "scripted:juggling"])
    assert code == 2
    assert "juggling" in capsys.readouterr().err


def test_unknown_task_is_reported(capsys):
    code = main(["run", "no_such_task"])
    assert code == 2
    assert "no_such_task" in capsys.readouterr().err


def test_sample_writes_scene_with_conditions(tmp_path, capsys):
    conditions = tmp_path / "conditions.txt"
    conditions.write_text("Dusty(table_1)=true\nToggledOn(stove_1)=true\n")
    out = tmp_path / "out.json"
    code = main(["sample", "kitchen", str(conditions), "--seed", "3",
                 "-o", str(out)])
    assert code == 0
    assert "applied 2 condition(s)" in capsys.readouterr().err
    scene = json.loads(out.read_text())
    table = next(o for o in scene["objects"] if o["id"] == "table_1")
    dust = [p for p in table["state"]["particles"] if p["kind"] == "dust"]
    assert len(dust) == 20
    stove = next(o for o in scene["objects"] if o["id"] == "stove_1")
    assert stove["state"]["toggled"] is True


def test_sample_reports_failing_line(tmp_path, capsys):
    conditions = tmp_path / "conditions.txt"
    conditions.write_text("Cooked(block_1)=true\n")
    code = main(["sample", "kitchen", str(conditions)])
    assert code == 2
    assert "block_1" in capsys.readouterr().err


def test_populate_is_seed_stable(tmp_path, capsys):
    out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (out_a, out_b):
        code = main(["populate", "kitchen", "default", "--seed", "9",
                     "-o", str(out)])
        assert code == 0
        assert "placed" in capsys.readouterr().err
    assert out_a.read_bytes() == out_b.read_bytes()


def test_bench_prints_report(bench_scene, capsys):
    code = main(["bench", bench_scene, "--steps", "100"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["steps"] == 100
    assert 0 < report["min_steps_per_s"] <= report["mean_steps_per_s"] <= report["max_steps_per_s"]


def test_bench_rejects_tiny_step_counts(bench_scene, capsys):
    code = main(["bench", bench_scene, "--steps", "5"])
    assert code == 2
    assert "100" in capsys.readouterr().err
