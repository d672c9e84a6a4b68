"""Environment registry and fixture loading.

Fixtures are plain JSON files; the packaged defaults live next to this
module.  `make_env(name)` builds an environment from its default fixture,
`make_env(name, fixture_path)` from a user-provided one.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from ..errors import UnknownEnv
from .base import OPEN_ACTION_SPACE, EnvResult, EnvState, Environment, summarize_state_text
from .gridhouse import GridHouse
from .hopqa import HopQA
from .tokenshop import TokenShop

ENV_CLASSES = {
    GridHouse.name: GridHouse,
    TokenShop.name: TokenShop,
    HopQA.name: HopQA,
}

ENV_NAMES = tuple(sorted(ENV_CLASSES))


def load_fixture(env_name: str, path: str | Path | None = None) -> dict:
    if path is not None:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    ref = resources.files(__package__) / "fixtures" / f"{env_name}.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def make_env(name: str, fixture_path: str | Path | None = None) -> Environment:
    if name not in ENV_CLASSES:
        raise UnknownEnv(f"unknown environment {name!r}; known: {', '.join(ENV_NAMES)}")
    fixture = load_fixture(name, fixture_path)
    return ENV_CLASSES[name](fixture)


__all__ = [
    "ENV_CLASSES",
    "ENV_NAMES",
    "EnvResult",
    "EnvState",
    "Environment",
    "GridHouse",
    "HopQA",
    "OPEN_ACTION_SPACE",
    "TokenShop",
    "load_fixture",
    "make_env",
    "summarize_state_text",
]
