"""Shipped JSON schemas for the exchange formats."""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import jsonschema

NAMES = ("polygon", "nest", "report")


@lru_cache(maxsize=None)
def load(name: str) -> dict:
    if name not in NAMES:
        raise ValueError(f"unknown schema {name!r}")
    text = resources.files(__package__).joinpath(f"{name}.json").read_text()
    return json.loads(text)


def _registry():
    from referencing import Registry, Resource

    return Registry().with_resources(
        (f"{n}.json", Resource.from_contents(load(n))) for n in NAMES)


def validate(doc, name: str):
    """Raise jsonschema.ValidationError if doc does not match the schema."""
    schema = load(name)
    jsonschema.Draft202012Validator(schema, registry=_registry()).validate(doc)
