"""JSON Schema validation for suite configs and bench reports."""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import jsonschema

from ..errors import ConfigError, ContractError

SCHEMAS = ("suite_config", "bench_report")


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    if name not in SCHEMAS:
        raise ConfigError(f"unknown schema {name!r}")
    return json.loads(resources.files("arena.schemas").joinpath(f"{name}.json").read_text(encoding="utf-8"))


def validate(doc: dict, name: str) -> None:
    """Raises ConfigError for configs and ContractError for reports."""
    try:
        jsonschema.validate(doc, load_schema(name))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        err = ConfigError if name == "suite_config" else ContractError
        raise err(f"{name} invalid at {where}: {exc.message}") from None
