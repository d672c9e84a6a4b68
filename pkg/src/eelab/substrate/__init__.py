from .actions import ActionText, canonicalize
from .jsonl import (
    read_examples,
    read_tasks,
    read_triples,
    read_trajectories,
    write_jsonl,
)
from .records import (
    ACTION_SOURCES,
    EXAMPLE_KINDS,
    RolloutTriple,
    Step,
    TaskSpec,
    TaskSplit,
    TrainingExample,
    Trajectory,
    same_action,
)
from .rng import RngStream
from .splitting import split_tasks

__all__ = [
    "ACTION_SOURCES",
    "EXAMPLE_KINDS",
    "ActionText",
    "RngStream",
    "RolloutTriple",
    "Step",
    "TaskSpec",
    "TaskSplit",
    "TrainingExample",
    "Trajectory",
    "canonicalize",
    "read_examples",
    "read_tasks",
    "read_triples",
    "read_trajectories",
    "same_action",
    "split_tasks",
    "write_jsonl",
]
