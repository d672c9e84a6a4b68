"""Branching rollout collection.

For every expert step the collector forks the environment by replaying the
action prefix, executes the expert action plus up to K canonically-distinct
alternatives in independent forks, and records the resulting next-state
texts.  On closed-list environments, proposals outside the admissible list
are replaced by uniform draws from the remaining admissible actions; on open
environments invalid proposals are executed as-is so their feedback text
becomes the observed next state.
"""

from __future__ import annotations

from dataclasses import dataclass

from .envs import OPEN_ACTION_SPACE, Environment, EnvState
from .errors import ReplayDivergence
from .model import ModelConfig, PolicyParams, Tokenizer
from .model.decode import sample_actions_free_batch
from .substrate import ActionText, RngStream, RolloutTriple, TaskSpec, Trajectory

SOURCE_MIXES = ("policy_only", "uniform_only", "policy_then_uniform")


@dataclass(frozen=True)
class BranchConfig:
    k: int = 4
    temperature: float = 1.0
    source_mix: str = "policy_then_uniform"
    include_expert: bool = True

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.source_mix not in SOURCE_MIXES:
            raise ValueError(f"source_mix must be one of {SOURCE_MIXES}")


def default_mix(env_name: str) -> str:
    return "policy_only" if env_name == "hopqa" else "policy_then_uniform"


def replay_prefix(env: Environment, task: TaskSpec, trajectory: Trajectory,
                  step_index: int) -> EnvState:
    """Re-run the first `step_index` actions; verify stored text en route."""
    if step_index > len(trajectory):
        raise ValueError(f"step_index {step_index} beyond trajectory length {len(trajectory)}")
    state = env.reset(task)
    for i in range(step_index):
        stored = trajectory.steps[i]
        if state.state_text != stored.state_text:
            raise ReplayDivergence(
                f"{task.task_id} step {i}: stored state text does not match replay"
            )
        state = env.step(state, stored.action).next_state
    if step_index < len(trajectory):
        stored = trajectory.steps[step_index]
        if state.state_text != stored.state_text:
            raise ReplayDivergence(
                f"{task.task_id} step {step_index}: stored state text does not match replay"
            )
    return state


PROPOSAL_MAX_TOKENS = 24


def propose_alternatives(policy: PolicyParams, tokenizer: Tokenizer, cfg: ModelConfig,
                         state: EnvState, expert: ActionText, k: int,
                         temperature: float, rng: RngStream) -> list[ActionText]:
    """Up to k canonically-distinct free-decoded proposals, none expert."""
    seen = {expert.canonical}
    out: list[ActionText] = []
    # Extra draws absorb duplicates without changing the k contract.
    draws = sample_actions_free_batch(
        policy, tokenizer, cfg, state.state_text, 2 * k, temperature,
        rng.child("draws"), max_new=PROPOSAL_MAX_TOKENS,
    )
    for action in draws:
        if len(out) >= k:
            break
        if action.is_empty or action.canonical in seen:
            continue
        seen.add(action.canonical)
        out.append(action)
    return out


def backfill_uniform(admissible: list[ActionText], exclude: set[str], k: int,
                     rng: RngStream) -> list[ActionText]:
    """k distinct actions drawn uniformly without replacement from the pool."""
    pool = [a for a in admissible if a.canonical not in exclude]
    pool.sort(key=lambda a: a.canonical)
    take = min(k, len(pool))
    if take <= 0:
        return []
    return rng.sample(pool, take)


def _alternatives_for_state(env: Environment, state: EnvState, expert: ActionText,
                            policy, tokenizer, model_cfg, cfg: BranchConfig,
                            rng: RngStream) -> list[tuple[ActionText, str]]:
    """(action, source) pairs for one expert state, deduplicated canonically."""
    admissible = env.admissible_actions(state)
    open_space = admissible == OPEN_ACTION_SPACE

    proposals: list[ActionText] = []
    if cfg.source_mix in ("policy_only", "policy_then_uniform") and cfg.k > 0:
        if policy is None:
            raise ValueError(f"source_mix {cfg.source_mix!r} requires a policy checkpoint")
        proposals = propose_alternatives(
            policy, tokenizer, model_cfg, state, expert, cfg.k, cfg.temperature,
            rng.child("proposals"),
        )

    picked: list[tuple[ActionText, str]] = []
    seen = {expert.canonical}
    if open_space:
        for action in proposals:
            if action.canonical not in seen:
                seen.add(action.canonical)
                picked.append((action, "policy"))
    else:
        legal = {a.canonical for a in admissible}
        for action in proposals:
            if action.canonical in legal and action.canonical not in seen:
                seen.add(action.canonical)
                picked.append((action, "policy"))
        # Off-list or duplicate proposals fall back to uniform admissible draws.
        if cfg.source_mix in ("uniform_only", "policy_then_uniform"):
            need = cfg.k - len(picked)
            for action in backfill_uniform(admissible, seen, need, rng.child("backfill")):
                seen.add(action.canonical)
                picked.append((action, "uniform"))
    return picked[: cfg.k]


def collect_rollouts(env: Environment, expert: list[Trajectory], cfg: BranchConfig,
                     rng: RngStream, policy: PolicyParams | None = None,
                     tokenizer: Tokenizer | None = None,
                     model_cfg: ModelConfig | None = None,
                     tasks: dict[str, TaskSpec] | None = None) -> list[RolloutTriple]:
    """One single-transition triple per (state, action) branch, canonically ordered."""
    if tasks is None:
        raise ValueError("tasks mapping (task_id -> TaskSpec) is required")
    triples: list[RolloutTriple] = []
    for traj in expert:
        task = tasks[traj.task_id]
        state_rng = rng.child(f"task-{traj.task_id}")
        for i, step in enumerate(traj.steps):
            state = replay_prefix(env, task, traj, i)
            branch_rng = state_rng.child(f"step-{i}")
            if cfg.include_expert:
                result = env.step(state, step.action)
                triples.append(RolloutTriple(
                    task_id=traj.task_id,
                    step_index=i,
                    state_text=state.state_text,
                    action=step.action,
                    next_state_text=result.next_state.state_text,
                    is_expert=True,
                    action_source="expert",
                ))
            alts = _alternatives_for_state(
                env, state, step.action, policy, tokenizer, model_cfg, cfg, branch_rng,
            )
            for action, source in alts:
                fork = replay_prefix(env, task, traj, i)
                result = env.step(fork, action)
                triples.append(RolloutTriple(
                    task_id=traj.task_id,
                    step_index=i,
                    state_text=fork.state_text,
                    action=action,
                    next_state_text=result.next_state.state_text,
                    is_expert=False,
                    action_source=source,
                ))
    triples.sort(key=lambda tr: (tr.task_id, tr.step_index, tr.action.canonical))
    return triples


def reexecute_triple(env: Environment, task: TaskSpec, trajectory: Trajectory,
                     triple: RolloutTriple) -> bool:
    """Verify a stored triple reproduces its next_state_text under replay."""
    state = replay_prefix(env, task, trajectory, triple.step_index)
    if state.state_text != triple.state_text:
        return False
    result = env.step(state, triple.action)
    return result.next_state.state_text == triple.next_state_text
