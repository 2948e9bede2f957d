"""Access to the data files shipped with the package."""

from __future__ import annotations

from importlib.resources import files
from pathlib import Path


def data_path(*parts: str) -> Path:
    return Path(str(files("oikos").joinpath("data", *parts)))


def default_taxonomy_path() -> Path:
    return data_path("taxonomy.json")


def scene_path(name: str) -> Path:
    return data_path("scenes", f"{name}.json")


def task_path(name: str) -> Path:
    return data_path("tasks", f"{name}.json")


def rules_path(name: str) -> Path:
    return data_path("rules", f"{name}.json")
