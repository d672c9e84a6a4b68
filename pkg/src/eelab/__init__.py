"""Desk-scale agent-training laboratory.

Three deterministic text worlds, an expert-demonstration generator, branched
rollout collection, four training-corpus builders, a compact autoregressive
policy trained with exact gradients, a group-relative policy-gradient stage,
and an evaluation/ablation harness, all reproducible from seeded configs.
"""

__version__ = "0.1.0"
