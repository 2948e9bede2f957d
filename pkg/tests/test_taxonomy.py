import pytest

from oikos.errors import (
    CycleInHierarchy,
    DuplicateCategory,
    MissingParent,
    MissingRequiredThreshold,
    MissingVirtualLink,
    UnknownCategory,
    UnknownModel,
)
from oikos.taxonomy import Ability, Taxonomy, load_taxonomy


def base_doc():
    return {
        "categories": [
            {"name": "object", "parent": None},
            {
                "name": "food",
                "parent": "object",
                "abilities": ["Cookable", "Burnable"],
                "thresholds": {"T_cooked": 70.0, "T_burnt": 200.0},
            },
            {"name": "fish", "parent": "food", "thresholds": {"T_cooked": 63.0}},
            {
                "name": "stove",
                "parent": "object",
                "abilities": ["HeatSourceSink", "Toggleable"],
                "heat": {
                    "mode": "Proximity",
                    "source_temp": 200.0,
                    "rate": 0.1,
                    "radius": 0.3,
                    "requires_toggled": True,
                },
            },
        ],
        "models": [
            {
                "id": "salmon",
                "category": "fish",
                "mass": 0.5,
                "links": [{"id": "body", "shape": {"box": [0.05, 0.03, 0.015]}}],
            },
            {
                "id": "hotplate",
                "category": "stove",
                "mass": 8.0,
                "links": [
                    {"id": "body", "shape": {"box": [0.15, 0.15, 0.05]}},
                    {
                        "id": "coil",
                        "shape": {"box": [0.1, 0.1, 0.005]},
                        "pose": {"pos": [0, 0, 0.055]},
                        "colliding": False,
                        "parent": "body",
                    },
                    {
                        "id": "knob",
                        "shape": {"box": [0.015, 0.015, 0.015]},
                        "pose": {"pos": [0.14, 0, -0.03]},
                        "colliding": False,
                        "parent": "body",
                    },
                ],
                "virtual_links": {"HeatSourceSinkLink": "coil", "TogglingLink": "knob"},
            },
        ],
    }


def oracle_resolve(doc, name):
    """Independent nearest-ancestor merge: walk to the root, then fold back."""
    by_name = {c["name"]: c for c in doc["categories"]}
    chain = []
    cur = name
    while cur is not None:
        chain.append(by_name[cur])
        cur = chain[-1].get("parent")
    abilities = set()
    thresholds = {}
    for spec in reversed(chain):  # root first, leaf last
        abilities |= set(spec.get("abilities", ()))
        thresholds.update(spec.get("thresholds", {}))
    return abilities, thresholds


def test_inheritance_override_matches_oracle():
    doc = base_doc()
    tx = load_taxonomy(doc)
    fish = tx.resolved("fish")
    oracle_abilities, oracle_thresholds = oracle_resolve(doc, "fish")
    assert {a.value for a in fish.abilities} == oracle_abilities
    assert fish.thresholds == oracle_thresholds
    assert fish.thresholds["T_cooked"] == 63.0
    assert fish.thresholds["T_burnt"] == 200.0


def test_resolution_order_independent():
    doc = base_doc()
    shuffled = dict(doc)
    shuffled["categories"] = list(reversed(doc["categories"]))
    a = load_taxonomy(doc).resolved("fish")
    b = load_taxonomy(shuffled).resolved("fish")
    assert a.abilities == b.abilities and a.thresholds == b.thresholds


def test_resolution_idempotent():
    tx = load_taxonomy(base_doc())
    assert tx.resolved("fish") is tx.resolved("fish")
    assert tx.resolved("fish") == tx.resolved("fish")


def test_heat_profile_inherited():
    tx = load_taxonomy(base_doc())
    heat = tx.resolved("stove").heat
    assert heat is not None and heat.mode == "Proximity"
    assert heat.source_temp == 200.0 and heat.requires_toggled


def test_cycle_detected_and_named():
    doc = base_doc()
    doc["categories"].append({"name": "a", "parent": "b"})
    doc["categories"].append({"name": "b", "parent": "a"})
    with pytest.raises(CycleInHierarchy) as exc:
        load_taxonomy(doc)
    assert exc.value.category in ("a", "b")


def test_missing_parent_named():
    doc = base_doc()
    doc["categories"].append({"name": "ghost", "parent": "nonexistent"})
    with pytest.raises(MissingParent) as exc:
        load_taxonomy(doc)
    assert exc.value.parent == "nonexistent"


def test_duplicate_category_named():
    doc = base_doc()
    doc["categories"].append({"name": "food", "parent": "object"})
    with pytest.raises(DuplicateCategory) as exc:
        load_taxonomy(doc)
    assert exc.value.category == "food"


def test_missing_threshold_named():
    doc = base_doc()
    doc["categories"].append(
        {"name": "mystery_meat", "parent": "object", "abilities": ["Cookable"]}
    )
    with pytest.raises(MissingRequiredThreshold) as exc:
        load_taxonomy(doc)
    assert exc.value.category == "mystery_meat"
    assert exc.value.threshold == "T_cooked"


def test_cooked_below_burnt_enforced():
    doc = base_doc()
    doc["categories"].append(
        {
            "name": "weird_food",
            "parent": "food",
            "thresholds": {"T_cooked": 300.0},  # above inherited T_burnt=200
        }
    )
    with pytest.raises(MissingRequiredThreshold):
        load_taxonomy(doc)


def test_missing_virtual_link_named():
    doc = base_doc()
    doc["models"].append(
        {
            "id": "broken_stove",
            "category": "stove",
            "links": [{"id": "body", "shape": {"box": [0.1, 0.1, 0.1]}}],
        }
    )
    with pytest.raises(MissingVirtualLink) as exc:
        load_taxonomy(doc)
    assert exc.value.model == "broken_stove"
    assert exc.value.kind in ("HeatSourceSinkLink", "TogglingLink")


def test_unknown_lookups():
    tx = load_taxonomy(base_doc())
    with pytest.raises(UnknownCategory):
        tx.resolved("not_a_category")
    with pytest.raises(UnknownModel):
        tx.model("not_a_model")


def test_digest_stable_and_input_sensitive():
    a = load_taxonomy(base_doc())
    b = load_taxonomy(base_doc())
    assert a.digest == b.digest
    doc = base_doc()
    doc["categories"][1]["thresholds"]["T_cooked"] = 71.0
    assert load_taxonomy(doc).digest != a.digest


def test_models_of_category_sorted():
    doc = base_doc()
    doc["models"].append(
        {
            "id": "anchovy",
            "category": "fish",
            "links": [{"id": "body", "shape": {"box": [0.02, 0.01, 0.005]}}],
        }
    )
    tx = load_taxonomy(doc)
    assert [m.id for m in tx.models_of_category("fish")] == ["anchovy", "salmon"]


def test_ability_enum_round_trip():
    assert Ability("Cookable") is Ability.COOKABLE
    assert Ability.RECEPTACLE.value == "Receptacle"
