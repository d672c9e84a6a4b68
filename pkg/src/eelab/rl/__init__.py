from .grpo import (
    Episode,
    EpisodeStep,
    GrpoConfig,
    RewardPoint,
    collect_group,
    grpo_advantages,
    grpo_surrogate_and_grad,
    grpo_update,
    rl_train,
    run_policy_episode,
)

__all__ = [
    "Episode",
    "EpisodeStep",
    "GrpoConfig",
    "RewardPoint",
    "collect_group",
    "grpo_advantages",
    "grpo_surrogate_and_grad",
    "grpo_update",
    "rl_train",
    "run_policy_episode",
]
