"""Rule-driven scene population.

A rule names an object model to spawn, the relation to impose, host
categories and a probability.  Population only ever adds instances and
poses them — existing objects keep their extended state untouched.  Hosts
whose placement cannot be satisfied are skipped and reported rather than
aborting the whole pass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import SamplingError, UnknownCategoryInRules
from .geometry import Pose
from .predicates import Condition
from .rng import DetRng
from .sampling import sample
from .world import World

_RELATIONS = ("OnTopOf", "InsideOf")


@dataclass(frozen=True)
class PopulationRule:
    object_model: str
    relation: str
    hosts: tuple[str, ...]  # host categories (subcategories match too)
    probability: float = 1.0
    count: tuple[int, int] = (1, 1)

    def __post_init__(self):
        if self.relation not in _RELATIONS:
            raise ValueError(f"relation must be one of {_RELATIONS}, got {self.relation!r}")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability {self.probability} outside [0, 1]")
        lo, hi = self.count
        if lo < 0 or hi < lo:
            raise ValueError(f"bad count range {self.count}")


@dataclass
class PopulateReport:
    placed: list[dict] = field(default_factory=list)
    failed: list[dict] = field(default_factory=list)

    def summary(self) -> str:
        return f"placed {len(self.placed)}, failed {len(self.failed)}"


def load_rules(source) -> list[PopulationRule]:
    if isinstance(source, (str, Path)) and Path(source).exists():
        data = json.loads(Path(source).read_text())
    elif isinstance(source, str):
        data = json.loads(source)
    else:
        data = source
    rules = []
    for entry in data["rules"]:
        rules.append(
            PopulationRule(
                object_model=entry["object"],
                relation=entry.get("relation", "OnTopOf"),
                hosts=tuple(entry["hosts"]),
                probability=float(entry.get("p", 1.0)),
                count=tuple(entry.get("count", (1, 1))),
            )
        )
    return rules


def _validate_rules(world: World, rules: Iterable[PopulationRule]) -> None:
    for rule in rules:
        if rule.object_model not in world.taxonomy.models:
            raise UnknownCategoryInRules(rule.object_model)
        for host in rule.hosts:
            if host not in world.taxonomy.categories:
                raise UnknownCategoryInRules(host)


def _host_instances(world: World, rule: PopulationRule) -> list[str]:
    out = []
    for instance in world.live_ids():
        category = world.obj(instance).category
        if category in world.taxonomy.categories and any(
            world.taxonomy.is_a(category, host) for host in rule.hosts
        ):
            out.append(instance)
    return out


def populate(world: World, rules: Iterable[PopulationRule], rng: DetRng) -> PopulateReport:
    """Apply every rule; deterministic for a given world, rule list and seed."""
    rules = list(rules)
    _validate_rules(world, rules)
    order = list(range(len(rules)))
    rng.shuffle(order)

    report = PopulateReport()
    for index in order:
        rule = rules[index]
        for host in _host_instances(world, rule):
            if rng.random() >= rule.probability:
                continue
            n = rng.randint(rule.count[0], rule.count[1])
            for _ in range(n):
                _spawn_one(world, rule, host, rng, report)

    # Final settle pass: everything placed must rest exactly where it is.
    for entry in report.placed:
        world.settle(entry["instance"])
    return report


def _spawn_one(world: World, rule: PopulationRule, host: str, rng: DetRng,
               report: PopulateReport) -> None:
    host_box = world.object_aabb(host)
    staging = Pose((host_box.center()[0], host_box.center()[1], host_box.max[2] + 1.0))
    instance = world.add_object(rule.object_model, staging)
    condition = Condition(rule.relation, (instance, host), True)
    try:
        sample(world, condition, rng.substream(f"{rule.object_model}@{host}#{instance}"))
    except SamplingError as exc:
        del world.objects[instance]
        report.failed.append(
            {"host": host, "model": rule.object_model, "reason": str(exc)}
        )
        return
    report.placed.append(
        {
            "condition": str(condition),
            "host": host,
            "instance": instance,
            "model": rule.object_model,
            "relation": rule.relation,
        }
    )
