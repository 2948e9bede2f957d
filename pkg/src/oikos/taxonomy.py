"""Category hierarchy, ability flags and object model library.

A taxonomy file declares a tree of categories (each may add ability flags,
thresholds and heat/droplet profiles) plus a library of rigid object models
built from box and convex-hull links. Categories inherit everything from
their ancestors with nearest-ancestor-wins overriding; resolution is
order-independent and idempotent, so resolved views are precomputed once at
load time.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from .errors import (
    CycleInHierarchy,
    DuplicateCategory,
    MissingParent,
    MissingRequiredThreshold,
    MissingVirtualLink,
    UnknownCategory,
    UnknownModel,
)
from .geometry import Box, ConvexHull, IDENTITY_QUAT, Pose, Quat, Vec3


class Ability(str, Enum):
    COOKABLE = "Cookable"
    BURNABLE = "Burnable"
    FREEZABLE = "Freezable"
    SOAKABLE = "Soakable"
    DUSTYABLE = "Dustyable"
    STAINABLE = "Stainable"
    TOGGLEABLE = "Toggleable"
    SLICEABLE = "Sliceable"
    HEAT_SOURCE_SINK = "HeatSourceSink"
    DROPLET_SOURCE = "DropletSource"
    DROPLET_SINK = "DropletSink"
    CLEANING_TOOL = "CleaningTool"
    SLICING_TOOL = "SlicingTool"
    OPENABLE = "Openable"
    RECEPTACLE = "Receptacle"


class VirtualLinkKind(str, Enum):
    TOGGLING = "TogglingLink"
    SLICING = "SlicingLink"
    CLEANING_TOOL = "CleaningToolLink"
    HEAT_SOURCE_SINK = "HeatSourceSinkLink"
    DROPLET_SOURCE = "DropletSourceLink"
    DROPLET_SINK = "DropletSinkLink"


# Abilities that only function through a dedicated link on the model.
ABILITY_LINK_REQUIREMENTS: dict[Ability, VirtualLinkKind] = {
    Ability.TOGGLEABLE: VirtualLinkKind.TOGGLING,
    Ability.SLICING_TOOL: VirtualLinkKind.SLICING,
    Ability.CLEANING_TOOL: VirtualLinkKind.CLEANING_TOOL,
    Ability.HEAT_SOURCE_SINK: VirtualLinkKind.HEAT_SOURCE_SINK,
    Ability.DROPLET_SOURCE: VirtualLinkKind.DROPLET_SOURCE,
    Ability.DROPLET_SINK: VirtualLinkKind.DROPLET_SINK,
}

# Abilities whose predicates need a numeric threshold with no universal default.
ABILITY_THRESHOLD_REQUIREMENTS: dict[Ability, str] = {
    Ability.COOKABLE: "T_cooked",
    Ability.BURNABLE: "T_burnt",
}

HEAT_MODE_PROXIMITY = "Proximity"
HEAT_MODE_INSIDE = "Inside"


@dataclass(frozen=True)
class HeatProfile:
    mode: str  # Proximity | Inside
    source_temp: float
    rate: float  # 1/s approach rate toward source_temp
    radius: float = 0.0  # Proximity mode reach, meters
    requires_toggled: bool = False


@dataclass(frozen=True)
class DropletProfile:
    emit_rate: float  # droplets per second while active
    requires_toggled: bool = True


@dataclass(frozen=True)
class Joint:
    kind: str  # Revolute | Prismatic
    axis: Vec3
    lower: float
    upper: float

    def __post_init__(self):
        if self.kind not in ("Revolute", "Prismatic"):
            raise ValueError(f"unknown joint kind {self.kind!r}")
        if not self.lower < self.upper:
            raise ValueError(f"joint limits must satisfy lower < upper, got [{self.lower}, {self.upper}]")


@dataclass(frozen=True)
class Link:
    id: str
    shape: object  # Box | ConvexHull
    local_pose: Pose = field(default_factory=lambda: Pose((0.0, 0.0, 0.0)))
    colliding: bool = True
    parent: Optional[str] = None  # None = attached to the object root frame
    joint: Optional[Joint] = None


@dataclass(frozen=True)
class CategorySpec:
    name: str
    parent: Optional[str]
    abilities: frozenset[Ability] = frozenset()
    thresholds: dict = field(default_factory=dict)
    heat: Optional[HeatProfile] = None
    droplets: Optional[DropletProfile] = None


@dataclass(frozen=True)
class ResolvedCategory:
    """A category with all ancestor contributions merged in."""

    name: str
    abilities: frozenset[Ability]
    thresholds: dict
    heat: Optional[HeatProfile]
    droplets: Optional[DropletProfile]

    def has(self, ability: Ability) -> bool:
        return ability in self.abilities

    def threshold(self, key: str, default: float | int) -> float | int:
        return self.thresholds.get(key, default)


@dataclass(frozen=True)
class ObjectModel:
    id: str
    category: str
    links: tuple[Link, ...]
    mass: float = 1.0
    stable_orientations: tuple[Quat, ...] = (IDENTITY_QUAT,)
    virtual_links: dict = field(default_factory=dict)  # VirtualLinkKind -> link id
    relevant_joints: tuple[str, ...] = ()  # joints that count for open/closed

    def link(self, link_id: str) -> Link:
        for l in self.links:
            if l.id == link_id:
                return l
        raise KeyError(link_id)

    def root_link(self) -> Link:
        roots = [l for l in self.links if l.parent is None]
        assert len(roots) == 1
        return roots[0]

    def joint_links(self) -> list[Link]:
        return [l for l in self.links if l.joint is not None]


class Taxonomy:
    """Validated category tree plus model library."""

    def __init__(self, categories: dict[str, CategorySpec], models: dict[str, ObjectModel],
                 digest: str):
        self.categories = categories
        self.models = models
        self.digest = digest
        self._resolved: dict[str, ResolvedCategory] = {}
        for name in categories:
            self._resolved[name] = self._resolve(name)
        for model in models.values():
            self._validate_model(model)

    # -- lookups ---------------------------------------------------------

    def resolved(self, category: str) -> ResolvedCategory:
        try:
            return self._resolved[category]
        except KeyError:
            raise UnknownCategory(category) from None

    def model(self, model_id: str) -> ObjectModel:
        try:
            return self.models[model_id]
        except KeyError:
            raise UnknownModel(model_id) from None

    def models_of_category(self, category: str) -> list[ObjectModel]:
        if category not in self.categories:
            raise UnknownCategory(category)
        return [m for mid, m in sorted(self.models.items()) if m.category == category]

    def is_a(self, category: str, ancestor: str) -> bool:
        """True when ``category`` equals or descends from ``ancestor``."""
        if category not in self.categories:
            raise UnknownCategory(category)
        return any(spec.name == ancestor for spec in self._chain(category))

    # -- resolution ------------------------------------------------------

    def _chain(self, name: str) -> list[CategorySpec]:
        """Root-first ancestor chain for ``name``, checking for cycles."""
        chain: list[CategorySpec] = []
        seen: set[str] = set()
        cur: Optional[str] = name
        while cur is not None:
            if cur in seen:
                raise CycleInHierarchy(cur)
            seen.add(cur)
            spec = self.categories.get(cur)
            if spec is None:
                raise MissingParent(chain[-1].name if chain else name, cur)
            chain.append(spec)
            cur = spec.parent
        chain.reverse()
        return chain

    def _resolve(self, name: str) -> ResolvedCategory:
        abilities: set[Ability] = set()
        thresholds: dict = {}
        heat: Optional[HeatProfile] = None
        droplets: Optional[DropletProfile] = None
        for spec in self._chain(name):
            abilities |= set(spec.abilities)
            thresholds.update(spec.thresholds)  # nearest ancestor wins per key
            if spec.heat is not None:
                heat = spec.heat
            if spec.droplets is not None:
                droplets = spec.droplets
        resolved = ResolvedCategory(name, frozenset(abilities), thresholds, heat, droplets)
        for ability, key in ABILITY_THRESHOLD_REQUIREMENTS.items():
            if ability in abilities and key not in thresholds:
                raise MissingRequiredThreshold(name, key)
        if "T_cooked" in thresholds and "T_burnt" in thresholds:
            if not thresholds["T_cooked"] < thresholds["T_burnt"]:
                raise MissingRequiredThreshold(name, "T_cooked < T_burnt")
        return resolved

    def _validate_model(self, model: ObjectModel) -> None:
        resolved = self.resolved(model.category)
        link_ids = {l.id for l in model.links}
        roots = [l for l in model.links if l.parent is None]
        if len(roots) != 1:
            raise ValueError(f"model {model.id!r} must have exactly one root link")
        for l in model.links:
            if l.parent is not None and l.parent not in link_ids:
                raise ValueError(f"model {model.id!r} link {l.id!r} has unknown parent {l.parent!r}")
        for ability, kind in ABILITY_LINK_REQUIREMENTS.items():
            if resolved.has(ability):
                target = model.virtual_links.get(kind.value)
                if target is None or target not in link_ids:
                    raise MissingVirtualLink(model.id, kind.value)
        for joint_name in model.relevant_joints:
            if joint_name not in link_ids or model.link(joint_name).joint is None:
                raise ValueError(
                    f"model {model.id!r} relevant joint {joint_name!r} is not a jointed link"
                )


# --- file loading -------------------------------------------------------------


def _parse_shape(data: dict):
    if "box" in data:
        return Box(tuple(float(c) for c in data["box"]))
    if "hull" in data:
        return ConvexHull([tuple(float(c) for c in v) for v in data["hull"]])
    raise ValueError(f"shape must define 'box' or 'hull', got {sorted(data)}")


def _parse_pose(data: Optional[dict]) -> Pose:
    if data is None:
        return Pose((0.0, 0.0, 0.0))
    pos = tuple(float(c) for c in data.get("pos", (0.0, 0.0, 0.0)))
    orn = tuple(float(c) for c in data.get("orn", IDENTITY_QUAT))
    return Pose(pos, orn)


def _parse_link(data: dict) -> Link:
    joint = None
    if "joint" in data:
        j = data["joint"]
        joint = Joint(j["kind"], tuple(float(c) for c in j["axis"]),
                      float(j["lower"]), float(j["upper"]))
    return Link(
        id=data["id"],
        shape=_parse_shape(data["shape"]),
        local_pose=_parse_pose(data.get("pose")),
        colliding=bool(data.get("colliding", True)),
        parent=data.get("parent"),
        joint=joint,
    )


def _parse_category(data: dict) -> CategorySpec:
    heat = None
    if "heat" in data:
        h = data["heat"]
        if h["mode"] not in (HEAT_MODE_PROXIMITY, HEAT_MODE_INSIDE):
            raise ValueError(f"unknown heat mode {h['mode']!r}")
        heat = HeatProfile(h["mode"], float(h["source_temp"]), float(h["rate"]),
                           float(h.get("radius", 0.0)), bool(h.get("requires_toggled", False)))
    droplets = None
    if "droplets" in data:
        d = data["droplets"]
        droplets = DropletProfile(float(d["emit_rate"]), bool(d.get("requires_toggled", True)))
    return CategorySpec(
        name=data["name"],
        parent=data.get("parent"),
        abilities=frozenset(Ability(a) for a in data.get("abilities", ())),
        thresholds=dict(data.get("thresholds", {})),
        heat=heat,
        droplets=droplets,
    )


def _parse_model(data: dict) -> ObjectModel:
    return ObjectModel(
        id=data["id"],
        category=data["category"],
        links=tuple(_parse_link(l) for l in data["links"]),
        mass=float(data.get("mass", 1.0)),
        stable_orientations=tuple(
            tuple(float(c) for c in q) for q in data.get("stable_orientations", (IDENTITY_QUAT,))
        ),
        virtual_links=dict(data.get("virtual_links", {})),
        relevant_joints=tuple(data.get("relevant_joints", ())),
    )


def load_taxonomy(source) -> Taxonomy:
    """Load and validate a taxonomy from a path, JSON string or dict."""
    if isinstance(source, (str, Path)) and Path(source).exists():
        raw = Path(source).read_bytes()
        data = json.loads(raw)
    elif isinstance(source, (str, bytes)):
        raw = source.encode() if isinstance(source, str) else source
        data = json.loads(raw)
    elif isinstance(source, dict):
        raw = json.dumps(source, sort_keys=True, separators=(",", ":")).encode()
        data = source
    else:
        raise TypeError(f"cannot load taxonomy from {type(source).__name__}")

    digest = hashlib.sha256(raw).hexdigest()

    categories: dict[str, CategorySpec] = {}
    for cat_data in data.get("categories", ()):
        spec = _parse_category(cat_data)
        if spec.name in categories:
            raise DuplicateCategory(spec.name)
        categories[spec.name] = spec

    models: dict[str, ObjectModel] = {}
    for model_data in data.get("models", ()):
        model = _parse_model(model_data)
        if model.category not in categories:
            raise UnknownCategory(model.category)
        models[model.id] = model

    return Taxonomy(categories, models, digest)
