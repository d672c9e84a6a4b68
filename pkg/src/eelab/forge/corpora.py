"""Training-corpus construction from expert trajectories and rollout triples."""

from __future__ import annotations

from collections import defaultdict
from typing import Callable

from ..envs import Environment, OPEN_ACTION_SPACE, summarize_state_text
from ..rollout import replay_prefix
from ..substrate import (
    ActionText,
    RngStream,
    RolloutTriple,
    TaskSpec,
    TrainingExample,
    Trajectory,
)
from .reflection import generate_reflection, make_context, split_reflection_target, star_rationale

IWM_SEPARATOR = "\nAction: "
TARGET_MODES = ("full_state", "summary")


def build_il_corpus(expert: list[Trajectory]) -> list[TrainingExample]:
    """One example per expert step: state -> canonical expert action."""
    out = []
    for traj in expert:
        for step in traj.steps:
            out.append(TrainingExample(
                kind="il",
                input_text=step.state_text,
                target_text=step.action.canonical,
                meta={"task_id": traj.task_id, "step_index": step.step_index,
                      "action_source": "expert", "generator": "none"},
            ))
    return out


def build_iwm_corpus(triples: list[RolloutTriple], target_mode: str,
                     env_name: str) -> list[TrainingExample]:
    """One example per triple: state + action -> next state (or its summary)."""
    if target_mode not in TARGET_MODES:
        raise ValueError(f"target_mode must be one of {TARGET_MODES}")
    out = []
    for tr in triples:
        if target_mode == "summary":
            target = summarize_state_text(env_name, tr.next_state_text)
        else:
            target = tr.next_state_text
        out.append(TrainingExample(
            kind="iwm",
            input_text=f"{tr.state_text}{IWM_SEPARATOR}{tr.action.canonical}",
            target_text=target,
            meta={"task_id": tr.task_id, "step_index": tr.step_index,
                  "action_source": tr.action_source, "generator": "none"},
        ))
    return out


def build_sr_corpus(env: Environment, tasks: dict[str, TaskSpec],
                    expert: list[Trajectory], triples: list[RolloutTriple],
                    m_alternatives: int, generator: str, rng: RngStream,
                    length_cap: int | None = None, endpoint: str | None = None):
    """Reflection corpus: one (state -> monologue + expert action) per kept state.

    States from trajectories longer than the length cap are dropped, as are
    examples whose reflection does not end with the expert action (the oracle
    explainer emits it by construction, so its retention rate is 1.0).
    Returns (corpus, stats).
    """
    if m_alternatives < 1:
        raise ValueError("m_alternatives must be >= 1")
    by_state: dict[tuple[str, int], list[RolloutTriple]] = defaultdict(list)
    expert_next: dict[tuple[str, int], str] = {}
    for tr in triples:
        key = (tr.task_id, tr.step_index)
        if tr.is_expert:
            expert_next[key] = tr.next_state_text
        else:
            by_state[key].append(tr)

    out = []
    considered = 0
    skipped_long = 0
    skipped_bare = 0
    dropped_mismatch = 0
    for traj in expert:
        if length_cap is not None and len(traj) > length_cap:
            skipped_long += len(traj)
            continue
        for step in traj.steps:
            key = (traj.task_id, step.step_index)
            pool = sorted(by_state.get(key, ()), key=lambda tr: tr.action.canonical)
            if not pool:
                skipped_bare += 1
                continue
            considered += 1
            picked = rng.child(f"{key[0]}-{key[1]}").sample(pool, min(m_alternatives, len(pool)))
            if key in expert_next:
                next_state = expert_next[key]
            else:
                fork = replay_prefix(env, tasks[traj.task_id], traj, step.step_index)
                next_state = env.step(fork, step.action).next_state.state_text
            ctx = make_context(
                env.name, step.state_text, step.action, next_state,
                [(tr.action, tr.next_state_text) for tr in picked],
            )
            reflection = generate_reflection(ctx, generator, endpoint=endpoint)
            _, terminal = split_reflection_target(reflection)
            if ActionText.of(terminal).canonical != step.action.canonical:
                dropped_mismatch += 1
                continue
            out.append(TrainingExample(
                kind="sr",
                input_text=step.state_text,
                target_text=reflection,
                meta={"task_id": traj.task_id, "step_index": step.step_index,
                      "action_source": "expert", "generator": generator},
            ))
    stats = {
        "states_considered": considered,
        "kept": len(out),
        "retention_rate": len(out) / considered if considered else 0.0,
        "skipped_long_trajectory": skipped_long,
        "skipped_no_alternatives": skipped_bare,
        "dropped_terminal_mismatch": dropped_mismatch,
    }
    return out, stats


def build_star_corpus(env: Environment, tasks: dict[str, TaskSpec],
                      expert: list[Trajectory],
                      predict: Callable[[object, list[ActionText] | None], ActionText],
                      rng: RngStream):
    """Rationale corpus retaining only states where the policy matches the expert.

    `predict(state, admissible_or_None)` produces the policy's greedy action.
    Rationales see the state only; no alternatives and no next states exist
    here.  Returns (corpus, stats).
    """
    out = []
    total = 0
    matched = 0
    for traj in expert:
        task = tasks[traj.task_id]
        for step in traj.steps:
            state = replay_prefix(env, task, traj, step.step_index)
            admissible = env.admissible_actions(state)
            candidates = None if admissible == OPEN_ACTION_SPACE else admissible
            predicted = predict(state, candidates)
            total += 1
            if predicted.canonical != step.action.canonical:
                continue
            matched += 1
            out.append(TrainingExample(
                kind="star",
                input_text=step.state_text,
                target_text=star_rationale(step.state_text, step.action),
                meta={"task_id": traj.task_id, "step_index": step.step_index,
                      "action_source": "expert", "generator": "star_rationale"},
            ))
    stats = {"states": total, "matched": matched,
             "match_rate": matched / total if total else 0.0}
    return out, stats
