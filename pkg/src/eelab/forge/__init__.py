from .corpora import (
    IWM_SEPARATOR,
    build_il_corpus,
    build_iwm_corpus,
    build_sr_corpus,
    build_star_corpus,
)
from .plan import Budgets, PlanStage, TrainingPlan, make_training_plan, updates_per_epoch
from .reflection import (
    PROMPT_TEMPLATE,
    TERMINAL_MARKER,
    ReflectionContext,
    extract_constraint_facts,
    generate_reflection,
    make_context,
    oracle_reflection,
    render_sr_prompt,
    split_reflection_target,
    star_rationale,
)

__all__ = [
    "Budgets",
    "IWM_SEPARATOR",
    "PROMPT_TEMPLATE",
    "PlanStage",
    "ReflectionContext",
    "TERMINAL_MARKER",
    "TrainingPlan",
    "build_il_corpus",
    "build_iwm_corpus",
    "build_sr_corpus",
    "build_star_corpus",
    "extract_constraint_facts",
    "generate_reflection",
    "make_context",
    "make_training_plan",
    "oracle_reflection",
    "render_sr_prompt",
    "split_reflection_target",
    "star_rationale",
    "updates_per_epoch",
]
