"""The session: fixed-timestep stepping, task goals, episode logs, replay.

A session owns one world and advances it in 1/30 s action steps, each made
of four 1/120 s agent/physics substeps followed by the extended-state
pipeline.  Every step yields a canonical state digest; recording those
digests next to the commanded actions gives bit-exact replay with a
pinpointed first divergence on any mismatch.

Episode log format (binary): one format-version byte, then length-prefixed
records ``type:u8 length:u32be payload``.  Record types: 1 = header JSON,
2 = step JSON, 3 = footer JSON, 4 = mark JSON.  The footer carries a
sha256 over every byte before it, so any flipped bit in the file is
detectable without replaying.
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Optional, Sequence, Union

from .assets import scene_path
from .constants import (
    ACTION_DT,
    LOG_FORMAT_VERSION,
    PHYSICS_DT,
    SUBSTEPS,
)
from .errors import (
    DigestMismatch,
    KernelError,
    LogCorrupt,
    ParseError,
    SessionFinished,
    UnknownInstance,
)
from .predicates import Condition, holds, parse_condition, visual_tags
from .rng import DetRng
from .sampling import apply_condition_lines
from .serialize import decode_f64, digest_of, encode_f64, hex_u64
from .states import step_all
from .taxonomy import Taxonomy
from .world import World, WorldConfig, load_scene

Vec3 = tuple[float, float, float]


# --- action commands --------------------------------------------------------------


@dataclass(frozen=True)
class Noop:
    kind: str = field(default="noop", init=False)


@dataclass(frozen=True)
class MoveHand:
    """One hand twist held for the whole action step (integrated per substep)."""

    hand: str
    linear: Vec3 = (0.0, 0.0, 0.0)
    angular: Vec3 = (0.0, 0.0, 0.0)
    press: float = 0.0
    kind: str = field(default="move_hand", init=False)

    def __post_init__(self):
        if self.press < 0.0:
            raise ValueError(f"press force must be >= 0, got {self.press}")
        object.__setattr__(self, "linear", tuple(float(v) for v in self.linear))
        object.__setattr__(self, "angular", tuple(float(v) for v in self.angular))


@dataclass(frozen=True)
class SetTrigger:
    hand: str
    fraction: float
    kind: str = field(default="set_trigger", init=False)


@dataclass(frozen=True)
class TeleportBase:
    point: tuple[float, float]
    kind: str = field(default="teleport_base", init=False)

    def __post_init__(self):
        object.__setattr__(self, "point", tuple(float(v) for v in self.point))


ActionCommand = Union[Noop, MoveHand, SetTrigger, TeleportBase]


def encode_action(action: ActionCommand) -> dict:
    """Wire/log form: every float as a 16-hex-char IEEE-754 string."""
    if isinstance(action, Noop):
        return {"kind": "noop"}
    if isinstance(action, MoveHand):
        return {
            "kind": "move_hand",
            "hand": action.hand,
            "linear": [encode_f64(v) for v in action.linear],
            "angular": [encode_f64(v) for v in action.angular],
            "press": encode_f64(action.press),
        }
    if isinstance(action, SetTrigger):
        return {
            "kind": "set_trigger",
            "hand": action.hand,
            "fraction": encode_f64(action.fraction),
        }
    if isinstance(action, TeleportBase):
        return {
            "kind": "teleport_base",
            "point": [encode_f64(v) for v in action.point],
        }
    raise TypeError(f"not an action command: {action!r}")


def decode_action(data: dict) -> ActionCommand:
    kind = data.get("kind")
    if kind == "noop":
        return Noop()
    if kind == "move_hand":
        return MoveHand(
            hand=data["hand"],
            linear=tuple(decode_f64(v) for v in data["linear"]),
            angular=tuple(decode_f64(v) for v in data["angular"]),
            press=decode_f64(data["press"]),
        )
    if kind == "set_trigger":
        return SetTrigger(hand=data["hand"], fraction=decode_f64(data["fraction"]))
    if kind == "teleport_base":
        return TeleportBase(point=tuple(decode_f64(v) for v in data["point"]))
    raise ValueError(f"unknown action kind {kind!r}")


def _validate_actions(actions: Sequence[ActionCommand]) -> None:
    hands_used: set[str] = set()
    teleports = 0
    for action in actions:
        if isinstance(action, (MoveHand, SetTrigger)):
            if action.hand in hands_used:
                raise ValueError(f"more than one command for hand {action.hand!r}")
            hands_used.add(action.hand)
        elif isinstance(action, TeleportBase):
            teleports += 1
            if teleports > 1:
                raise ValueError("more than one base teleport in a single step")
        elif not isinstance(action, Noop):
            raise TypeError(f"not an action command: {action!r}")


# --- task specs -------------------------------------------------------------------


@dataclass(frozen=True)
class TaskSpec:
    id: str
    scene: str
    goal: tuple[str, ...]
    initial: tuple[str, ...] = ()
    title: str = ""
    time_limit_steps: int = 600

    def __post_init__(self):
        object.__setattr__(self, "goal", tuple(self.goal))
        object.__setattr__(self, "initial", tuple(self.initial))
        if not self.goal:
            raise ValueError("a task needs at least one goal line")
        if self.time_limit_steps <= 0:
            raise ValueError("time limit must be positive")


def load_task(source) -> TaskSpec:
    if isinstance(source, TaskSpec):
        return source
    if isinstance(source, (str, Path)) and Path(str(source)).exists():
        data = json.loads(Path(source).read_text())
    elif isinstance(source, str):
        data = json.loads(source)
    else:
        data = source
    return TaskSpec(
        id=data["id"],
        scene=data["scene"],
        goal=tuple(data["goal"]),
        initial=tuple(data.get("initial", ())),
        title=data.get("title", ""),
        time_limit_steps=int(data.get("time_limit_steps", 600)),
    )


# --- episode log ------------------------------------------------------------------

REC_HEADER = 1
REC_STEP = 2
REC_FOOTER = 3
REC_MARK = 4


class EpisodeWriter:
    """Streams one episode to disk; the footer seals it with a content hash."""

    def __init__(self, target: Union[str, Path, BinaryIO]):
        if hasattr(target, "write"):
            self._fh: BinaryIO = target
            self._owns = False
        else:
            self._fh = open(target, "wb")
            self._owns = True
        self._hash = hashlib.sha256()
        self._closed = False
        version = bytes([LOG_FORMAT_VERSION])
        self._fh.write(version)
        self._hash.update(version)

    def _record(self, rtype: int, payload: dict, hashed: bool = True) -> None:
        body = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
        blob = struct.pack(">BI", rtype, len(body)) + body
        self._fh.write(blob)
        if hashed:
            self._hash.update(blob)

    def write_header(self, header: dict) -> None:
        self._record(REC_HEADER, header)

    def write_step(self, step: int, actions: list[dict], digest: str) -> None:
        self._record(REC_STEP, {"actions": actions, "digest": digest, "step": step})

    def write_mark(self, step: int, label: str) -> None:
        self._record(REC_MARK, {"label": label, "step": step})

    def finish(self, final_step: int, success: bool, final_digest: str) -> None:
        if self._closed:
            return
        self._record(
            REC_FOOTER,
            {
                "content_sha256": self._hash.hexdigest(),
                "final_digest": final_digest,
                "final_step": final_step,
                "success": success,
            },
            hashed=False,
        )
        self._closed = True
        if self._owns:
            self._fh.close()

    @property
    def closed(self) -> bool:
        return self._closed


@dataclass
class EpisodeLog:
    header: dict
    steps: list[dict]
    marks: list[dict]
    footer: dict
    content_ok: bool = True


def read_log(source: Union[str, Path, bytes],
             verify_content: bool = True) -> EpisodeLog:
    """Parse an episode log; with verify_content any flipped byte in the
    pre-footer body raises LogCorrupt immediately.  Replay passes False so
    a tampered step is instead pinpointed by its digest comparison."""
    raw = Path(source).read_bytes() if not isinstance(source, bytes) else source
    if not raw:
        raise LogCorrupt("empty file")
    if raw[0] != LOG_FORMAT_VERSION:
        raise LogCorrupt(f"unsupported format version {raw[0]}")

    running = hashlib.sha256()
    running.update(raw[:1])
    offset = 1
    header: Optional[dict] = None
    footer: Optional[dict] = None
    steps: list[dict] = []
    marks: list[dict] = []
    while offset < len(raw):
        if footer is not None:
            raise LogCorrupt("data after footer")
        if offset + 5 > len(raw):
            raise LogCorrupt("truncated record head")
        rtype, length = struct.unpack_from(">BI", raw, offset)
        start, end = offset + 5, offset + 5 + length
        if end > len(raw):
            raise LogCorrupt("truncated record body")
        try:
            payload = json.loads(raw[start:end])
        except ValueError as exc:
            raise LogCorrupt(f"bad record JSON: {exc}") from None
        if rtype == REC_HEADER:
            if header is not None or steps or marks:
                raise LogCorrupt("header must be the first record")
            header = payload
        elif rtype == REC_STEP:
            steps.append(payload)
        elif rtype == REC_MARK:
            marks.append(payload)
        elif rtype == REC_FOOTER:
            footer = payload
        else:
            raise LogCorrupt(f"unknown record type {rtype}")
        if rtype != REC_FOOTER:
            running.update(raw[offset:end])
        offset = end

    if header is None:
        raise LogCorrupt("missing header")
    if footer is None:
        raise LogCorrupt("missing footer")
    content_ok = footer.get("content_sha256") == running.hexdigest()
    if verify_content and not content_ok:
        raise LogCorrupt("content hash mismatch")
    expected_steps = list(range(1, len(steps) + 1))
    if [s.get("step") for s in steps] != expected_steps:
        raise LogCorrupt("step records out of order")
    return EpisodeLog(header, steps, marks, footer, content_ok)


# --- session ---------------------------------------------------------------------


@dataclass
class StepResult:
    step_index: int
    digest: str
    events: list[dict]
    success: bool
    done: bool


class Session:
    """One world advanced by one writer; all mutation happens through step()."""

    def __init__(self, world: World, task: Optional[TaskSpec], seed: int,
                 rng: DetRng, goal: list[Condition],
                 writer: Optional[EpisodeWriter] = None,
                 header: Optional[dict] = None):
        self.world = world
        self.task = task
        self.seed = seed
        self.rng = rng
        self.goal = goal
        self.writer = writer
        self.header = header or {}
        self.step_index = 0
        self.success = False
        self.done = False
        self.time_limit_steps = task.time_limit_steps if task else 0
        self.initial_digest = digest_of(world, rng)
        self.last_digest = self.initial_digest
        self._goal_values = {str(c): self._evaluate(c) for c in goal}
        self._tags = {
            instance: tuple(sorted(visual_tags(world, instance)))
            for instance in sorted(world.objects)
        }

    # -- goal bookkeeping --

    def _evaluate(self, condition: Condition) -> bool:
        try:
            return holds(self.world, condition)
        except UnknownInstance:
            # An argument got consumed mid-episode (e.g. sliced away); the
            # condition can no longer hold.
            return False

    def _collect_events(self) -> tuple[list[dict], bool]:
        events: list[dict] = []
        all_true = bool(self.goal)
        for condition in self.goal:
            key = str(condition)
            value = self._evaluate(condition)
            if value != self._goal_values[key]:
                events.append({"kind": "goal", "condition": key, "value": value})
                self._goal_values[key] = value
            all_true = all_true and value
        for instance in sorted(self.world.objects):
            tags = tuple(sorted(visual_tags(self.world, instance)))
            if tags != self._tags.get(instance, ()):
                events.append({"kind": "tags", "instance": instance,
                               "tags": list(tags)})
                self._tags[instance] = tags
        return events, all_true

    def close_log(self) -> None:
        if self.writer is not None and not self.writer.closed:
            self.writer.finish(self.step_index, self.success, self.last_digest)


def create_session(task, taxonomy: Taxonomy, seed: int,
                   scene=None, config: Optional[WorldConfig] = None,
                   record_to: Union[str, Path, BinaryIO, None] = None) -> Session:
    """Load the scene, impose the initial condition lines, parse the goal."""
    task = load_task(task)
    scene_source = scene if scene is not None else scene_path(task.scene)
    world = load_scene(scene_source, taxonomy, config)

    goal: list[Condition] = []
    for line_no, line in enumerate(task.goal, 1):
        condition = parse_condition(line.strip(), line_no)
        for arg in condition.args:
            if arg not in world.objects:
                raise ParseError(line, line_no)
        goal.append(condition)
    for line_no, line in enumerate(task.initial, 1):
        condition = parse_condition(line.strip(), line_no)
        for arg in condition.args:
            if arg not in world.objects:
                raise ParseError(line, line_no)

    root = DetRng(seed)
    apply_condition_lines(world, "\n".join(task.initial), root.substream("init"))
    rng = root.substream("step")

    header = {
        "format_version": LOG_FORMAT_VERSION,
        "scene_digest": world.scene_digest,
        "seed": hex_u64(seed),
        "task": {
            "goal": list(task.goal),
            "id": task.id,
            "initial": list(task.initial),
            "scene": task.scene,
            "time_limit_steps": task.time_limit_steps,
            "title": task.title,
        },
        "taxonomy_digest": taxonomy.digest,
    }
    writer = None
    if record_to is not None:
        writer = EpisodeWriter(record_to)
    session = Session(world, task, seed, rng, goal, writer, header)
    session.header["initial_digest"] = session.initial_digest
    if writer is not None:
        writer.write_header(session.header)
    return session


def step(session: Session, actions: Iterable[ActionCommand] = ()) -> StepResult:
    """Advance one action step: commands, substeps, state pipeline, goal check."""
    if session.done:
        raise SessionFinished(session.step_index)
    actions = list(actions) or [Noop()]
    _validate_actions(actions)

    world = session.world
    move_commands: list[MoveHand] = []
    for action in actions:
        if isinstance(action, TeleportBase):
            world.teleport_base(action.point)
        elif isinstance(action, SetTrigger):
            world.set_trigger(action.hand, action.fraction)
        elif isinstance(action, MoveHand):
            move_commands.append(action)

    for _ in range(SUBSTEPS):
        for command in move_commands:
            world.move_hand(command.hand, command.linear, command.angular,
                            command.press, PHYSICS_DT)
        world.maintain_grasps()
        world.settle_dirty()

    step_all(world, session.rng, ACTION_DT)

    session.step_index += 1
    digest = digest_of(world, session.rng)
    session.last_digest = digest
    events, all_true = session._collect_events()
    session.success = all_true
    session.done = all_true or session.step_index >= session.time_limit_steps > 0

    if session.writer is not None:
        session.writer.write_step(
            session.step_index, [encode_action(a) for a in actions], digest)
        if session.done:
            session.close_log()

    return StepResult(session.step_index, digest, events,
                      session.success, session.done)


# --- replay ----------------------------------------------------------------------


@dataclass
class ReplayResult:
    final_digest: str
    digests: list[str]
    success: bool
    steps: int


def replay(log: Union[str, Path, bytes, EpisodeLog], taxonomy: Taxonomy,
           scene=None, config: Optional[WorldConfig] = None) -> ReplayResult:
    """Re-run a recorded episode; raise DigestMismatch at the first divergence.

    Step 0 stands for the pre-step checks: scene digest, taxonomy digest and
    the initial world digest must all match the header before any stepping.
    """
    episode = (log if isinstance(log, EpisodeLog)
               else read_log(log, verify_content=False))
    header = episode.header
    task = TaskSpec(
        id=header["task"]["id"],
        scene=header["task"]["scene"],
        goal=tuple(header["task"]["goal"]),
        initial=tuple(header["task"]["initial"]),
        title=header["task"].get("title", ""),
        time_limit_steps=int(header["task"]["time_limit_steps"]),
    )
    seed = int(header["seed"], 16)
    session = create_session(task, taxonomy, seed, scene=scene, config=config)

    if session.world.scene_digest != header["scene_digest"]:
        raise DigestMismatch(0, header["scene_digest"], session.world.scene_digest)
    if taxonomy.digest != header["taxonomy_digest"]:
        raise DigestMismatch(0, header["taxonomy_digest"], taxonomy.digest)
    if session.initial_digest != header["initial_digest"]:
        raise DigestMismatch(0, header["initial_digest"], session.initial_digest)

    digests: list[str] = []
    for record in episode.steps:
        try:
            actions = [decode_action(a) for a in record["actions"]]
            result = step(session, actions)
        except (KernelError, KeyError, TypeError, ValueError):
            # A recorded step that cannot even be re-enacted was not written
            # by the recorder; treat it as the first divergence.
            raise DigestMismatch(record["step"], record.get("digest", "?"),
                                 "unreplayable-record") from None
        digests.append(result.digest)
        if result.digest != record["digest"]:
            raise DigestMismatch(record["step"], record["digest"], result.digest)

    footer = episode.footer
    final = digests[-1] if digests else session.initial_digest
    if footer["final_digest"] != final:
        raise DigestMismatch(footer["final_step"], footer["final_digest"], final)
    if footer["final_step"] != session.step_index:
        raise LogCorrupt("final step mismatch")
    if bool(footer["success"]) != session.success:
        raise LogCorrupt("success flag mismatch")
    if not episode.content_ok:
        # every semantic field checked out, so the flipped byte is in a
        # field replay does not consume (e.g. the task title)
        raise LogCorrupt("content hash mismatch")
    return ReplayResult(final, digests, session.success, session.step_index)


# --- benchmark --------------------------------------------------------------------


def bench(scene, taxonomy: Taxonomy, steps: int, seed: int = 0,
          config: Optional[WorldConfig] = None) -> dict:
    """Noop-step throughput: wall-clock steps/s (mean, min, max) plus digest."""
    if steps < 100:
        raise ValueError("bench needs at least 100 steps")
    world = load_scene(scene, taxonomy, config)
    session = Session(world, None, seed, DetRng(seed).substream("step"), [])
    session.time_limit_steps = steps + 1
    rates = []
    start = time.perf_counter()
    for _ in range(steps):
        t0 = time.perf_counter()
        step(session, [Noop()])
        dt = max(time.perf_counter() - t0, 1e-9)
        rates.append(1.0 / dt)
    total = max(time.perf_counter() - start, 1e-9)
    return {
        "steps": steps,
        "wall_seconds": total,
        "mean_steps_per_s": steps / total,
        "min_steps_per_s": min(rates),
        "max_steps_per_s": max(rates),
        "final_digest": session.last_digest,
    }
