"""Training plans: how corpora are scheduled inside the update budget.

The imitation budget is the anchor: the world-model recipe spends one epoch
on its dynamics corpus and the remainder on expert fine-tuning so the total
equals the imitation budget; reflection-style recipes instead run the
imitation epoch count over the shuffled union of their corpus and the expert
data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import BudgetInfeasible
from ..substrate import RngStream, TrainingExample

RECIPES = ("il", "iwm", "sr", "star")


@dataclass(frozen=True)
class Budgets:
    il_updates: int
    batch: int


@dataclass
class PlanStage:
    name: str
    corpus: list[TrainingExample]
    updates: int
    weight: float = 1.0


@dataclass
class TrainingPlan:
    recipe: str
    stages: list[PlanStage]
    total_updates: int
    meta: dict = field(default_factory=dict)

    def manifest(self, corpus_paths: dict[str, str], seed: int,
                 budgets: "Budgets | None" = None, sr_mix_ratio: float = 1.0) -> dict:
        out = {
            "recipe": self.recipe,
            "stages": [
                {"corpus": st.name, "examples": len(st.corpus), "updates": st.updates}
                for st in self.stages
            ],
            "updates": self.total_updates,
            "corpus_paths": corpus_paths,
            "seed": seed,
            "sr_mix_ratio": sr_mix_ratio,
            "meta": self.meta,
        }
        if budgets is not None:
            out["budgets"] = {"il_updates": budgets.il_updates, "batch": budgets.batch}
        return out


def updates_per_epoch(n_examples: int, batch: int) -> int:
    return math.ceil(n_examples / batch)


def _mix_for_reflection(primary: list[TrainingExample], expert: list[TrainingExample],
                        ratio: float, rng: RngStream) -> list[TrainingExample]:
    """Union of the reflection corpus with ~ratio x its size of expert data.

    Ratios above |expert| / |primary| oversample the expert set by whole
    tiles plus a seeded remainder draw.
    """
    take = int(round(ratio * len(primary)))
    tiles, rem = divmod(take, len(expert))
    mixed = list(primary) + tiles * list(expert)
    if rem:
        mixed += rng.child("expert-mix").sample(list(expert), rem)
    return mixed


def make_training_plan(recipe: str, budgets: Budgets,
                       corpora: dict[str, list[TrainingExample]],
                       sr_mix_ratio: float = 1.0,
                       rng: RngStream | None = None) -> TrainingPlan:
    if recipe not in RECIPES:
        raise ValueError(f"recipe must be one of {RECIPES}")
    expert = corpora["expert"]
    il_epoch_updates = updates_per_epoch(len(expert), budgets.batch)
    il_epochs = max(1, round(budgets.il_updates / il_epoch_updates))

    if recipe == "il":
        return TrainingPlan(
            recipe="il",
            stages=[PlanStage("il", list(expert), budgets.il_updates)],
            total_updates=budgets.il_updates,
            meta={"il_epochs_equivalent": il_epochs},
        )

    if recipe == "iwm":
        dynamics = corpora["iwm"]
        stage1 = updates_per_epoch(len(dynamics), budgets.batch)
        if stage1 > budgets.il_updates:
            raise BudgetInfeasible(
                f"one dynamics epoch needs {stage1} updates, budget is {budgets.il_updates}"
            )
        stage2 = budgets.il_updates - stage1
        return TrainingPlan(
            recipe="iwm",
            stages=[
                PlanStage("iwm", list(dynamics), stage1),
                PlanStage("il", list(expert), stage2),
            ],
            total_updates=budgets.il_updates,
            meta={"stage1_updates": stage1, "stage2_updates": stage2},
        )

    key = "refl" if recipe == "sr" else "star"
    primary = corpora[key]
    if rng is None:
        rng = RngStream(0, "plan")
    mixed = _mix_for_reflection(primary, expert, sr_mix_ratio, rng)
    stage_updates = il_epochs * updates_per_epoch(len(mixed), budgets.batch)
    return TrainingPlan(
        recipe=recipe,
        stages=[PlanStage(recipe, mixed, stage_updates)],
        total_updates=stage_updates,
        meta={"epochs": il_epochs, "mixed_examples": len(mixed),
              "mix_ratio": sr_mix_ratio},
    )
