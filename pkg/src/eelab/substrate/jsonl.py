"""JSONL persistence with schema checks.

One record per line, UTF-8, round-trip identity.  Readers validate required
fields per record type and raise SchemaError carrying the 1-based line number.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable, Iterable, Sequence

from ..errors import SchemaError
from .records import (
    ACTION_SOURCES,
    EXAMPLE_KINDS,
    RolloutTriple,
    TaskSpec,
    TrainingExample,
    Trajectory,
)

_STEP_FIELDS = ("i", "state_text", "action", "reward", "done")
_TRAJECTORY_FIELDS = ("task_id", "env", "source", "success", "score", "steps")
_TRIPLE_FIELDS = (
    "task_id",
    "step_index",
    "state_text",
    "action",
    "next_state_text",
    "is_expert",
    "action_source",
)
_EXAMPLE_FIELDS = ("kind", "input_text", "target_text", "meta")
_TASK_FIELDS = ("task_id", "env", "goal_text", "gold", "novelty_key")


def write_jsonl(records: Iterable, path: str | Path) -> int:
    """Serialize records (objects with to_json, or plain dicts). Returns count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            obj = rec.to_json() if hasattr(rec, "to_json") else rec
            fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=True))
            fh.write("\n")
            n += 1
    return n


def _iter_lines(path: str | Path):
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line=lineno) from exc


def _require(rec: dict, fields: Sequence[str], lineno: int) -> None:
    for f in fields:
        if f not in rec:
            raise SchemaError(f'missing "{f}"', line=lineno)


def read_trajectories(path: str | Path) -> list[Trajectory]:
    out = []
    for lineno, rec in _iter_lines(path):
        _require(rec, _TRAJECTORY_FIELDS, lineno)
        if rec["source"] not in ("oracle", "policy"):
            raise SchemaError(f'bad "source" {rec["source"]!r}', line=lineno)
        for step in rec["steps"]:
            _require(step, _STEP_FIELDS, lineno)
        out.append(Trajectory.from_json(rec))
    return out


def read_triples(path: str | Path) -> list[RolloutTriple]:
    out = []
    for lineno, rec in _iter_lines(path):
        _require(rec, _TRIPLE_FIELDS, lineno)
        if rec["action_source"] not in ACTION_SOURCES:
            raise SchemaError(f'bad "action_source" {rec["action_source"]!r}', line=lineno)
        out.append(RolloutTriple.from_json(rec))
    return out


def read_examples(path: str | Path) -> list[TrainingExample]:
    out = []
    for lineno, rec in _iter_lines(path):
        _require(rec, _EXAMPLE_FIELDS, lineno)
        if rec["kind"] not in EXAMPLE_KINDS:
            raise SchemaError(f'bad "kind" {rec["kind"]!r}', line=lineno)
        out.append(TrainingExample.from_json(rec))
    return out


def read_tasks(path: str | Path) -> list[TaskSpec]:
    out = []
    for lineno, rec in _iter_lines(path):
        _require(rec, _TASK_FIELDS, lineno)
        out.append(TaskSpec.from_json(rec))
    return out


READERS: dict[str, Callable] = {
    "trajectory": read_trajectories,
    "triple": read_triples,
    "example": read_examples,
    "task": read_tasks,
}
