"""Deterministic train / in-domain / out-of-domain task splitting.

The out-of-domain bucket is built from whole novelty-key groups so that the
attribute combinations it covers never appear in training.  Groups are taken
in seeded order while the bucket is below its target size; the remaining
tasks are shuffled once and cut exactly into train and in-domain test.
"""

from __future__ import annotations

from collections import defaultdict

from ..errors import InsufficientTasks
from .records import TaskSpec, TaskSplit
from .rng import RngStream


def split_tasks(
    all_tasks: list[TaskSpec],
    ratios: tuple[float, float, float],
    rng: RngStream,
) -> TaskSplit:
    train_frac, id_frac, ood_frac = ratios
    if abs(train_frac + id_frac + ood_frac - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    n = len(all_tasks)
    ood_target = int(round(n * ood_frac))

    groups: dict[str, list[TaskSpec]] = defaultdict(list)
    for task in all_tasks:
        groups[task.novelty_key].append(task)
    keys = sorted(groups)
    if ood_frac > 0 and len(keys) < 2:
        raise InsufficientTasks("need at least two novelty keys to hold one out")

    ood: list[TaskSpec] = []
    key_order = rng.child("ood-keys").shuffle(keys)
    held_keys = []
    for key in key_order:
        if len(ood) >= ood_target:
            break
        # Never consume every group: train must keep at least one.
        if len(held_keys) >= len(keys) - 1:
            break
        held_keys.append(key)
        ood.extend(sorted(groups[key], key=lambda t: t.task_id))

    rest = [t for t in all_tasks if t.novelty_key not in set(held_keys)]
    rest = rng.child("rest").shuffle(sorted(rest, key=lambda t: t.task_id))
    id_count = int(round(n * id_frac))
    id_test = rest[:id_count]
    train = rest[id_count:]

    if not train or (id_frac > 0 and not id_test) or (ood_frac > 0 and not ood):
        raise InsufficientTasks(
            f"empty bucket for n={n}, ratios={ratios}: "
            f"train={len(train)} id={len(id_test)} ood={len(ood)}"
        )
    return TaskSplit(train=tuple(train), id_test=tuple(id_test), ood_test=tuple(ood))
