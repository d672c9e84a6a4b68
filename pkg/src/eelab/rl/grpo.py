"""Group-relative policy optimization against environment rewards.

Per update: G episodes of one task are collected from the current policy,
rewards are standardized within the group, and one clipped-surrogate
optimizer step is taken.  Only action tokens enter the objective; state and
observation tokens are masked out of the ratio.  Groups with equal rewards
have zero advantage everywhere and leave the parameters bitwise unchanged.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ..envs import OPEN_ACTION_SPACE, Environment
from ..model import (
    ModelConfig,
    OptimHyper,
    OptState,
    PolicyParams,
    Tokenizer,
    make_batch,
    opt_step,
    sample_action,
    sequence_logprobs,
)
from ..model.encoding import truncate_input_ids
from ..substrate import ActionText, RngStream, TaskSpec


@dataclass(frozen=True)
class GrpoConfig:
    group_size: int = 8
    clip_eps: float = 0.2
    lr: float = 0.01
    updates: int = 80
    max_steps: int = 8
    adv_eps: float = 1e-8
    temperature: float = 1.0

    def __post_init__(self):
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2")
        if not 0.0 < self.clip_eps < 1.0:
            raise ValueError("clip_eps must be in (0, 1)")

    def to_json(self) -> dict:
        return {
            "group_size": self.group_size,
            "clip_eps": self.clip_eps,
            "lr": self.lr,
            "updates": self.updates,
            "max_steps": self.max_steps,
            "adv_eps": self.adv_eps,
            "temperature": self.temperature,
        }

    def config_hash(self) -> str:
        payload = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


@dataclass
class EpisodeStep:
    state_text: str
    action: ActionText
    ids: list[int]            # [bos] state [sep] action tokens [eos]
    mask: list[bool]
    old_logprobs: np.ndarray  # one per masked (action) token


@dataclass
class Episode:
    task_id: str
    steps: list[EpisodeStep] = field(default_factory=list)
    terminal_reward: float = 0.0


def _encode_step(tokenizer: Tokenizer, cfg: ModelConfig, state_text: str,
                 action: ActionText):
    prefix = [tokenizer.bos_id] + truncate_input_ids(tokenizer, state_text, cfg.input_budget) + [tokenizer.sep_id]
    action_ids = tokenizer.encode(action.canonical)[: cfg.max_target_tokens]
    ids = prefix + action_ids + [tokenizer.eos_id]
    mask = [len(prefix) - 1 <= t < len(ids) - 1 for t in range(len(ids) - 1)]
    return ids, mask


def run_policy_episode(env: Environment, task: TaskSpec, params: PolicyParams,
                       tokenizer: Tokenizer, cfg: ModelConfig, max_steps: int,
                       temperature: float, rng: RngStream) -> Episode:
    """One sampled episode; records token ids and behavior logprobs per step."""
    episode = Episode(task_id=task.task_id)
    state = env.reset(task)
    for step_idx in range(max_steps):
        if state.done:
            break
        admissible = env.admissible_actions(state)
        if admissible == OPEN_ACTION_SPACE:
            action = sample_action(params, tokenizer, cfg, state.state_text,
                                   temperature, "free", rng.child(f"free-{step_idx}"))
            if action.is_empty:
                action = ActionText.of("<answer>unknown</answer>")
        else:
            action = sample_action(params, tokenizer, cfg, state.state_text,
                                   temperature, "constrained", rng.child(f"pick-{step_idx}"),
                                   candidates=admissible)
        ids, mask = _encode_step(tokenizer, cfg, state.state_text, action)
        batch = make_batch([(ids, mask)], tokenizer.pad_id)
        old_lp = sequence_logprobs(params, batch, cfg)
        episode.steps.append(EpisodeStep(state.state_text, action, ids, mask, old_lp))
        result = env.step(state, action)
        state = result.next_state
    episode.terminal_reward = float(state.reward)
    return episode


def collect_group(env: Environment, task: TaskSpec, params: PolicyParams,
                  tokenizer: Tokenizer, cfg: ModelConfig, grpo: GrpoConfig,
                  rng: RngStream) -> list[Episode]:
    return [
        run_policy_episode(env, task, params, tokenizer, cfg, grpo.max_steps,
                           grpo.temperature, rng.child(f"episode-{g}"))
        for g in range(grpo.group_size)
    ]


def grpo_advantages(rewards: list[float], eps: float = 1e-8) -> list[float]:
    """Group-standardized advantages: (r - mean) / (std + eps)."""
    arr = np.asarray(rewards, dtype=np.float64)
    std = float(arr.std())
    return list((arr - arr.mean()) / (std + eps))


def grpo_surrogate_and_grad(params: PolicyParams, episodes: list[Episode],
                            advantages: list[float], clip_eps: float,
                            tokenizer: Tokenizer, cfg: ModelConfig):
    """Clipped surrogate J and its exact gradient (ascent direction).

    J = mean over action tokens of min(rho*A, clip(rho, 1-eps, 1+eps)*A)
    with rho the new/old probability ratio per token.  Where the clipped side
    is active the token contributes zero gradient.
    """
    from ..model.network import weighted_logprob_and_grad

    encoded = []
    token_adv = []
    token_old = []
    for episode, adv in zip(episodes, advantages):
        for step in episode.steps:
            encoded.append((step.ids, step.mask))
            token_adv.extend([adv] * len(step.old_logprobs))
            token_old.extend(step.old_logprobs.tolist())
    if not encoded:
        return 0.0, None, None
    batch = make_batch(encoded, tokenizer.pad_id)
    new_lp = sequence_logprobs(params, batch, cfg)
    adv_arr = np.asarray(token_adv)
    old_arr = np.asarray(token_old)
    rho = np.exp(new_lp - old_arr)
    unclipped = rho * adv_arr
    clipped = np.clip(rho, 1.0 - clip_eps, 1.0 + clip_eps) * adv_arr
    surrogate = float(np.minimum(unclipped, clipped).mean())

    # d min(u, c)/d rho is A on the unclipped branch and 0 on the flat branch.
    active = unclipped <= clipped
    weights = np.where(active, adv_arr * rho, 0.0)
    n = float(len(new_lp))
    _, grads = weighted_logprob_and_grad(params, batch, cfg, weights, normalizer=n)
    return surrogate, grads, batch


def grpo_update(params: PolicyParams, episodes: list[Episode], advantages: list[float],
                grpo: GrpoConfig, tokenizer: Tokenizer, cfg: ModelConfig,
                optstate: OptState, hyper: OptimHyper) -> tuple[PolicyParams, float]:
    """One maximization step of the clipped surrogate."""
    if all(abs(a) < 1e-300 for a in advantages):
        return params, 0.0  # zero-variance group: no-op by construction
    surrogate, grads, _ = grpo_surrogate_and_grad(
        params, episodes, advantages, grpo.clip_eps, tokenizer, cfg
    )
    if grads is None:
        return params, surrogate
    descent = {k: -v for k, v in grads.items()}
    return opt_step(params, descent, optstate, hyper), surrogate


@dataclass
class RewardPoint:
    update: int
    mean_reward: float
    std_reward: float

    def to_csv_row(self) -> str:
        return f"{self.update},{self.mean_reward:.6f},{self.std_reward:.6f}"


def rl_train(env: Environment, train_tasks: list[TaskSpec], params0: PolicyParams,
             tokenizer: Tokenizer, cfg: ModelConfig, grpo: GrpoConfig,
             rng: RngStream):
    """GRPO loop; returns (params, reward curve, run info with config hash)."""
    params = params0.copy()
    optstate = OptState.fresh(params)
    hyper = OptimHyper(lr=grpo.lr)
    curve: list[RewardPoint] = []
    task_rng = rng.child("task-order")
    for update in range(grpo.updates):
        task = train_tasks[task_rng.randint(0, len(train_tasks))]
        episodes = collect_group(env, task, params, tokenizer, cfg, grpo,
                                 rng.child(f"update-{update}"))
        rewards = [ep.terminal_reward for ep in episodes]
        advantages = grpo_advantages(rewards, grpo.adv_eps)
        params, _ = grpo_update(params, episodes, advantages, grpo, tokenizer, cfg,
                                optstate, hyper)
        curve.append(RewardPoint(update, float(np.mean(rewards)), float(np.std(rewards))))
    info = {"cfg_hash": grpo.config_hash(), "updates": grpo.updates}
    return params, curve, info
