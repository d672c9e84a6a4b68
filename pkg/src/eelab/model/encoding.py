"""Example-to-token encoding shared by training and decoding.

Sequences look like [BOS] input [SEP] target [EOS].  The input segment is
always exactly `context` tokens: the goal line stays pinned at the front,
the most recent text is flushed against the separator, and padding absorbs
the length difference in between.  Over-long inputs are truncated from the
left (oldest history dropped) with the goal kept.  Fixed offsets let the
per-position gains specialize on the goal region and on recent observations.
The loss mask covers exactly the target tokens plus EOS.
"""

from __future__ import annotations

import numpy as np

from ..substrate import TrainingExample
from .network import Batch, ModelConfig
from .tokenizer import Tokenizer


def truncate_input_ids(tokenizer: Tokenizer, text: str, budget: int) -> list[int]:
    ids = tokenizer.encode(text)
    if len(ids) == budget:
        return ids
    newline = text.find("\n")
    goal_ids = tokenizer.encode(text[:newline]) if newline > 0 else []
    if len(ids) < budget:
        n_goal = min(len(goal_ids), len(ids))
        return ids[:n_goal] + [tokenizer.pad_id] * (budget - len(ids)) + ids[n_goal:]
    goal_ids = goal_ids[: budget // 2]
    tail = ids[len(goal_ids):]
    keep = budget - len(goal_ids)
    return goal_ids + tail[-keep:]


TARGET_TAIL_KEEP = 16


def truncate_target_ids(ids: list[int], max_tokens: int) -> list[int]:
    """Drop the middle of an over-long target: the head carries the goal
    analysis and the tail carries the terminal action line."""
    if len(ids) <= max_tokens:
        return ids
    tail = min(TARGET_TAIL_KEEP, max_tokens // 2)
    return ids[: max_tokens - tail] + ids[-tail:]


def encode_example(tokenizer: Tokenizer, cfg: ModelConfig, ex: TrainingExample):
    """Token ids plus the per-position loss mask for one training example."""
    input_ids = truncate_input_ids(tokenizer, ex.input_text, cfg.input_budget)
    target_ids = truncate_target_ids(tokenizer.encode(ex.target_text), cfg.max_target_tokens)
    ids = [tokenizer.bos_id] + input_ids + [tokenizer.sep_id] + target_ids + [tokenizer.eos_id]
    first_target = 1 + len(input_ids) + 1
    mask = [first_target - 1 <= t < len(ids) - 1 for t in range(len(ids) - 1)]
    return ids, mask


def make_batch(encoded: list[tuple[list[int], list[bool]]], pad_id: int,
               kinds: list[str] | None = None) -> Batch:
    width = max(len(ids) for ids, _ in encoded)
    n = len(encoded)
    ids = np.full((n, width), pad_id, dtype=np.int64)
    mask = np.zeros((n, width - 1), dtype=bool)
    for row, (seq, m) in enumerate(encoded):
        ids[row, : len(seq)] = seq
        mask[row, : len(m)] = m
    return Batch(ids=ids, mask=mask, kinds=kinds or [])
