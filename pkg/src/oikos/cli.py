"""Command-line entry points: run, replay, sample, populate, bench, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .assets import default_taxonomy_path, rules_path, scene_path, task_path
from .errors import KernelError
from .populate import load_rules, populate
from .rng import DetRng
from .runtime import bench, create_session, load_task, replay, step
from .sampling import apply_condition_lines
from .taxonomy import load_taxonomy
from .world import load_scene, save_scene


def _resolve(source: str, shipped) -> object:
    """A CLI file argument: an existing path wins, else a shipped asset name."""
    if Path(source).exists():
        return Path(source)
    candidate = shipped(source)
    if candidate.exists():
        return candidate
    raise FileNotFoundError(f"no such file or shipped asset: {source}")


def _emit(data: dict, out: str | None) -> None:
    text = json.dumps(data, indent=2, sort_keys=True)
    if out in (None, "-"):
        print(text)
    else:
        Path(out).write_text(text + "\n")


def cmd_run(args) -> int:
    taxonomy = load_taxonomy(args.taxonomy)
    task = load_task(_resolve(args.task, task_path))
    session = create_session(task, taxonomy, args.seed, record_to=args.record)
    if args.policy:
        scheme, _, name = args.policy.partition(":")
        if scheme != "scripted":
            raise ValueError(f"unknown policy scheme {scheme!r}")
        from .policies import POLICIES, run_policy
        if name not in POLICIES:
            raise ValueError(
                f"unknown scripted policy {name!r}; have {sorted(POLICIES)}")
        run_policy(session, name)
    else:
        while not session.done:
            step(session)
    session.close_log()
    print(json.dumps({
        "task": task.id,
        "steps": session.step_index,
        "success": session.success,
        "final_digest": session.last_digest,
        "record": args.record,
    }, sort_keys=True))
    return 0


def cmd_replay(args) -> int:
    taxonomy = load_taxonomy(args.taxonomy)
    scene = _resolve(args.scene, scene_path) if args.scene else None
    result = replay(Path(args.log), taxonomy, scene=scene)
    print(json.dumps({
        "steps": result.steps,
        "success": result.success,
        "final_digest": result.final_digest,
        "ok": True,
    }, sort_keys=True))
    return 0


def cmd_sample(args) -> int:
    taxonomy = load_taxonomy(args.taxonomy)
    world = load_scene(_resolve(args.scene, scene_path), taxonomy)
    text = Path(args.conditions).read_text()
    applied = apply_condition_lines(world, text, DetRng(args.seed))
    _emit(save_scene(world), args.output)
    print(f"applied {len(applied)} condition(s)", file=sys.stderr)
    return 0


def cmd_populate(args) -> int:
    taxonomy = load_taxonomy(args.taxonomy)
    world = load_scene(_resolve(args.scene, scene_path), taxonomy)
    rules = load_rules(_resolve(args.rules, rules_path))
    report = populate(world, rules, DetRng(args.seed))
    _emit(save_scene(world), args.output)
    print(report.summary(), file=sys.stderr)
    return 0


def cmd_bench(args) -> int:
    taxonomy = load_taxonomy(args.taxonomy)
    report = bench(_resolve(args.scene, scene_path), taxonomy,
                   steps=args.steps, seed=args.seed)
    print(json.dumps(report, sort_keys=True))
    return 0


def cmd_serve(args) -> int:
    from .bridge import serve
    taxonomy = load_taxonomy(args.taxonomy)
    task = load_task(_resolve(args.task, task_path))
    server = serve(task, taxonomy, port=args.port, seed=args.seed,
                   host=args.host, record_to=args.record,
                   static_dir=args.static)
    print(f"serving {task.id} on ws://{server.host}:{server.port}",
          file=sys.stderr)
    try:
        server.wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oikos",
        description="Deterministic household-activity simulation kernel")
    parser.add_argument("--taxonomy", default=str(default_taxonomy_path()),
                        help="taxonomy JSON (defaults to the shipped one)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one task episode")
    p.add_argument("task", help="task JSON path or shipped task name")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--record", default=None, help="write an episode log here")
    p.add_argument("--policy", default=None, help="e.g. scripted:cooking_meat")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="re-run a recorded episode and verify")
    p.add_argument("log")
    p.add_argument("--scene", default=None,
                   help="override the scene (path or shipped name)")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("sample", help="impose condition lines on a scene")
    p.add_argument("scene", help="scene JSON path or shipped scene name")
    p.add_argument("conditions", help="text file, one Predicate(args)=value per line")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("populate", help="add objects to a scene by rules")
    p.add_argument("scene")
    p.add_argument("rules", help="rules JSON path or shipped rules name")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_populate)

    p = sub.add_parser("bench", help="Noop-step throughput")
    p.add_argument("scene")
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="expose a session over the wire protocol")
    p.add_argument("task")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--record", default=None)
    p.add_argument("--static", default=None,
                   help="directory of web console assets to host on the same port")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (KernelError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
