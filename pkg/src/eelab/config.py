"""Strict JSON configuration with per-environment defaults.

Unknown keys are rejected by name; every stage reads only its own block plus
the global seed.  The discount `gamma` is carried for completeness of the
decision-process description but no training objective consumes it (all
three environments are terminal-reward).
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

CONFIG_VERSION = 1

DEFAULTS: dict = {
    "version": CONFIG_VERSION,
    "seed": 0,
    "gamma": 1.0,  # documented-unused: terminal-reward tasks never discount
    "env": {
        "name": "gridhouse",
        "fixture": None,
        "n_tasks": None,
        "split": [0.7, 0.15, 0.15],
        "length_cap": None,
        "max_steps": None,
    },
    "rollout": {
        "k": 4,
        "temperature": 1.0,
        "mix": None,
        "include_expert": True,
    },
    "forge": {
        "target_mode": "summary",
        "m_alternatives": 2,
        "generator": "oracle_explainer",
        "sr_mix_ratio": 1.0,
        "external_endpoint": None,
    },
    "model": {
        "dim": 64,
        "context": 64,
        "hidden": True,
        "max_vocab": 2000,
        "max_target_tokens": 72,
        "input_budget": None,
    },
    "train": {
        "il_updates": None,
        "batch": 16,
        "lr": 0.01,
        "lr_floor": 0.1,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
    },
    "rl": {
        "group_size": 8,
        "clip_eps": 0.2,
        "lr": 0.02,
        "updates": 80,
        "max_steps": None,
        "adv_eps": 1e-8,
        "temperature": 1.0,
    },
    "eval": {
        "n_id": None,
        "n_ood": None,
        "max_steps": None,
        "sampled": False,
        "temperature": 0.0,
        "seeds": [0],
    },
}

# Pinned per-environment values filled in wherever the user leaves None.
ENV_DEFAULTS: dict[str, dict] = {
    "gridhouse": {
        "env.n_tasks": 240,
        "env.split": [0.5, 0.25, 0.25],
        "env.max_steps": 8,
        "train.il_updates": 1200,
        "model.input_budget": 40,
        "eval.n_id": 999999,
        "eval.n_ood": 999999,
    },
    "tokenshop": {
        "env.n_tasks": 300,
        "env.split": [0.5, 0.25, 0.25],
        "env.length_cap": 15,
        "env.max_steps": 6,
        "train.il_updates": 1000,
        "model.input_budget": 48,
        "eval.n_id": 999999,
        "eval.n_ood": 999999,
    },
    "hopqa": {
        "env.n_tasks": 300,
        "env.split": [0.55, 0.12, 0.33],
        "env.max_steps": 6,
        "train.il_updates": 420,
        "model.input_budget": 56,
        "eval.n_id": 500,
        "eval.n_ood": 500,
    },
}


@dataclass
class Config:
    seed: int
    gamma: float
    env: dict
    rollout: dict
    forge: dict
    model: dict
    train: dict
    rl: dict
    eval: dict
    version: int = CONFIG_VERSION
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "seed": self.seed,
            "gamma": self.gamma,
            "env": copy.deepcopy(self.env),
            "rollout": copy.deepcopy(self.rollout),
            "forge": copy.deepcopy(self.forge),
            "model": copy.deepcopy(self.model),
            "train": copy.deepcopy(self.train),
            "rl": copy.deepcopy(self.rl),
            "eval": copy.deepcopy(self.eval),
        }


def _merge_strict(defaults: dict, user: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in user.items():
        here = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f'unknown config key "{here}"')
        if isinstance(defaults[key], dict) and defaults[key]:
            if not isinstance(value, dict):
                raise ConfigError(f'config key "{here}" must be an object')
            out[key] = _merge_strict(defaults[key], value, here)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _set_path(tree: dict, dotted: str, value) -> None:
    node = tree
    parts = dotted.split(".")
    for part in parts[:-1]:
        node = node[part]
    if node[parts[-1]] is None:
        node[parts[-1]] = copy.deepcopy(value)


def _validate(tree: dict) -> None:
    env = tree["env"]["name"]
    if env not in ENV_DEFAULTS:
        raise ConfigError(f'unknown env.name "{env}"')
    split = tree["env"]["split"]
    if len(split) != 3 or abs(sum(split) - 1.0) > 1e-9:
        raise ConfigError(f"env.split must be three fractions summing to 1, got {split}")
    if tree["rollout"]["k"] < 0:
        raise ConfigError("rollout.k must be >= 0")
    if tree["rollout"]["temperature"] <= 0:
        raise ConfigError("rollout.temperature must be > 0")
    if tree["forge"]["m_alternatives"] < 1:
        raise ConfigError("forge.m_alternatives must be >= 1")
    if tree["forge"]["target_mode"] not in ("full_state", "summary"):
        raise ConfigError(f'forge.target_mode {tree["forge"]["target_mode"]!r} is invalid')
    if tree["rollout"]["mix"] is not None and tree["rollout"]["mix"] not in (
        "policy_only", "uniform_only", "policy_then_uniform",
    ):
        raise ConfigError(f'rollout.mix {tree["rollout"]["mix"]!r} is invalid')
    if tree["train"]["batch"] < 1:
        raise ConfigError("train.batch must be >= 1")
    if tree["rl"]["group_size"] < 2:
        raise ConfigError("rl.group_size must be >= 2")
    if not 0.0 < tree["rl"]["clip_eps"] < 1.0:
        raise ConfigError("rl.clip_eps must be in (0, 1)")


def resolve_config(user: dict) -> Config:
    """Merge user settings over defaults, fill env-specific values, validate."""
    tree = _merge_strict(DEFAULTS, user)
    if tree["version"] != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {tree['version']}")
    env = tree["env"]["name"]
    if env not in ENV_DEFAULTS:
        raise ConfigError(f'unknown env.name "{env}"')
    for dotted, value in ENV_DEFAULTS[env].items():
        _set_path(tree, dotted, value)
    if tree["rollout"]["mix"] is None:
        tree["rollout"]["mix"] = "policy_only" if env == "hopqa" else "policy_then_uniform"
    _validate(tree)
    return Config(
        version=tree["version"],
        seed=tree["seed"],
        gamma=tree["gamma"],
        env=tree["env"],
        rollout=tree["rollout"],
        forge=tree["forge"],
        model=tree["model"],
        train=tree["train"],
        rl=tree["rl"],
        eval=tree["eval"],
    )


def load_config(path: str | Path) -> Config:
    raw = Path(path).read_text(encoding="utf-8")
    try:
        user = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(user, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return resolve_config(user)


def default_config(env_name: str, **overrides) -> Config:
    user: dict = {"env": {"name": env_name}}
    for dotted, value in overrides.items():
        node = user
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return resolve_config(user)
