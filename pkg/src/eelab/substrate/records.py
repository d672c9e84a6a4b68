"""Core record types shared by every stage, with their JSONL field schemas.

All types are immutable value objects; they are safe to share between
concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .actions import ActionText, canonicalize

ACTION_SOURCES = ("expert", "policy", "uniform")
EXAMPLE_KINDS = ("il", "iwm", "sr", "star")
TRAJECTORY_SOURCES = ("oracle", "policy")


@dataclass(frozen=True)
class TaskSpec:
    """One task instance; `gold` is sufficient to score terminal states."""

    task_id: str
    env_name: str
    goal_text: str
    gold: dict
    novelty_key: str

    def to_json(self) -> dict:
        return {
            "task_id": self.task_id,
            "env": self.env_name,
            "goal_text": self.goal_text,
            "gold": self.gold,
            "novelty_key": self.novelty_key,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "TaskSpec":
        return cls(
            task_id=rec["task_id"],
            env_name=rec["env"],
            goal_text=rec["goal_text"],
            gold=rec["gold"],
            novelty_key=rec["novelty_key"],
        )


@dataclass(frozen=True)
class Step:
    """One (state, action, reward, done) record inside a trajectory."""

    step_index: int
    state_text: str
    action: ActionText
    reward: float
    done: bool

    def to_json(self) -> dict:
        return {
            "i": self.step_index,
            "state_text": self.state_text,
            "action": self.action.raw,
            "reward": self.reward,
            "done": self.done,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "Step":
        return cls(
            step_index=rec["i"],
            state_text=rec["state_text"],
            action=ActionText.of(rec["action"]),
            reward=float(rec["reward"]),
            done=bool(rec["done"]),
        )


@dataclass(frozen=True)
class Trajectory:
    task_id: str
    env_name: str
    source: str  # "oracle" | "policy"
    success: bool
    score: float
    steps: tuple[Step, ...]

    def __post_init__(self):
        if self.success and self.score != 1.0:
            raise ValueError("success implies score == 1")

    def __len__(self) -> int:
        return len(self.steps)

    def to_json(self) -> dict:
        return {
            "task_id": self.task_id,
            "env": self.env_name,
            "source": self.source,
            "success": self.success,
            "score": self.score,
            "steps": [s.to_json() for s in self.steps],
        }

    @classmethod
    def from_json(cls, rec: dict) -> "Trajectory":
        return cls(
            task_id=rec["task_id"],
            env_name=rec["env"],
            source=rec["source"],
            success=bool(rec["success"]),
            score=float(rec["score"]),
            steps=tuple(Step.from_json(s) for s in rec["steps"]),
        )


@dataclass(frozen=True)
class RolloutTriple:
    """(state, action, next state) as observed by forking at an expert state."""

    task_id: str
    step_index: int
    state_text: str
    action: ActionText
    next_state_text: str
    is_expert: bool
    action_source: str  # "expert" | "policy" | "uniform"

    def to_json(self) -> dict:
        return {
            "task_id": self.task_id,
            "step_index": self.step_index,
            "state_text": self.state_text,
            "action": self.action.raw,
            "next_state_text": self.next_state_text,
            "is_expert": self.is_expert,
            "action_source": self.action_source,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "RolloutTriple":
        return cls(
            task_id=rec["task_id"],
            step_index=rec["step_index"],
            state_text=rec["state_text"],
            action=ActionText.of(rec["action"]),
            next_state_text=rec["next_state_text"],
            is_expert=bool(rec["is_expert"]),
            action_source=rec["action_source"],
        )


@dataclass(frozen=True)
class TrainingExample:
    kind: str  # "il" | "iwm" | "sr" | "star"
    input_text: str
    target_text: str
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "input_text": self.input_text,
            "target_text": self.target_text,
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "TrainingExample":
        return cls(
            kind=rec["kind"],
            input_text=rec["input_text"],
            target_text=rec["target_text"],
            meta=rec.get("meta", {}),
        )


@dataclass(frozen=True)
class TaskSplit:
    train: tuple[TaskSpec, ...]
    id_test: tuple[TaskSpec, ...]
    ood_test: tuple[TaskSpec, ...]

    def bucket(self, name: str) -> tuple[TaskSpec, ...]:
        return {"train": self.train, "id": self.id_test, "ood": self.ood_test}[name]

    def to_json(self) -> dict:
        return {
            "train": [t.task_id for t in self.train],
            "id_test": [t.task_id for t in self.id_test],
            "ood_test": [t.task_id for t in self.ood_test],
        }


def expert_action_at(traj: Trajectory, step_index: int) -> ActionText:
    return traj.steps[step_index].action


def same_action(a: ActionText | str, b: ActionText | str) -> bool:
    ca = a.canonical if isinstance(a, ActionText) else canonicalize(a)
    cb = b.canonical if isinstance(b, ActionText) else canonicalize(b)
    return ca == cb
