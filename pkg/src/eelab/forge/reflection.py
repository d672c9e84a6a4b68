"""Reflection contexts, the prompt template, and the deterministic explainer.

The oracle explainer writes a contrastive monologue using only strings that
appear in the context (goal line, actions, observed next states), so a
containment scan can verify that no entity is invented.  An external
generator hook preserves the pathway where a language model writes the
reflection instead.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..envs.base import last_observation
from ..errors import GeneratorUnavailable
from ..substrate import ActionText

TERMINAL_MARKER = "\nThe action is: "

PROMPT_TEMPLATE = """You will be presented with a situation where you need to choose between multiple possible actions.
Your task is to analyze the situation and provide reasoning about why we decide to take the expert action.

- Situation Description: {situation}
- Expert Action: {expert_action}
- Expected Outcome: {expected_outcome}
- Alternative Actions:
{alternatives}

Provide a detailed self-reflection as an internal monologue that demonstrates your reasoning process for the current situation.
Your monologue should:
1. Analyze the situation and the goal.
2. Compare the possible actions, explaining why each may be less optimal.
3. Justify why the expert action is most suitable, grounded in the expected outcome.
4. Highlight any relevant clues, constraints, or consequences from the situation.

Guidelines:
- Stay strictly within the provided information.
- Avoid meta-commentary about being an AI.
- Use natural, step-by-step reasoning.
- Focus on logical decision-making.

Output: Directly write the self-reflection monologue, no extra headings, disclaimers, or external notes."""


@dataclass(frozen=True)
class ReflectionContext:
    env_name: str
    state_text: str
    expert_action: ActionText
    expert_next_state: str
    alternatives: tuple[tuple[ActionText, str], ...]  # (action, next state text)
    constraint_facts: dict

    def __post_init__(self):
        if not self.alternatives:
            raise ValueError("a reflection context needs at least one alternative")


def render_sr_prompt(ctx: ReflectionContext) -> str:
    """Fill the prompt template with the context fields in listed order."""
    lines = []
    for i, (action, next_state) in enumerate(ctx.alternatives, start=1):
        lines.append(f"  {i}. Action: {action.canonical}, resulting state: {last_observation(next_state)}")
    return PROMPT_TEMPLATE.format(
        situation=ctx.state_text,
        expert_action=ctx.expert_action.canonical,
        expected_outcome=last_observation(ctx.expert_next_state),
        alternatives="\n".join(lines),
    )


# ------------------------------------------------------------------ facts

_GOAL_GH = re.compile(r"put (.+) in (.+)\.")
_GOAL_TS = re.compile(r"find (?:(\w+) )?(\w+) with price lower than (\d+) dollars\.")
_PRICE = re.compile(r"\$(\d+)")


def extract_constraint_facts(env_name: str, state_text: str, expert_action: ActionText,
                             expert_next_state: str,
                             alternatives: tuple[tuple[ActionText, str], ...]) -> dict:
    """Structured facts derived from the context texts alone."""
    goal_line = state_text.split("\n", 1)[0].removeprefix("Task: ")
    facts: dict = {"goal": goal_line, "alternatives": []}

    if env_name == "gridhouse":
        m = _GOAL_GH.search(goal_line)
        if m:
            facts["goal_object"], facts["goal_receptacle"] = m.group(1), m.group(2)
    elif env_name == "tokenshop":
        m = _GOAL_TS.search(goal_line)
        if m:
            facts["color"], facts["category"], facts["budget"] = m.group(1), m.group(2), int(m.group(3))

    for action, next_state in alternatives:
        obs = last_observation(next_state)
        alt = {"action": action, "obs": obs, "drawback": None}
        low = obs.lower()
        if low.startswith("nothing happens"):
            alt["drawback"] = "noop"
        elif low.startswith("format error"):
            alt["drawback"] = "format"
        elif env_name == "tokenshop" and "budget" in facts:
            prices = [int(p) for p in _PRICE.findall(obs)]
            if prices and min(prices) >= facts["budget"]:
                alt["drawback"] = "budget"
                alt["price"] = min(prices)
        if alt["drawback"] is None and env_name == "gridhouse" and "goal_object" in facts:
            picked = re.search(r"you pick up the ([\w ]+) from", low)
            if picked and picked.group(1) != facts["goal_object"]:
                alt["drawback"] = "wrong_object"
                alt["picked"] = picked.group(1)
        facts["alternatives"].append(alt)

    facts["expert_obs"] = last_observation(expert_next_state)
    return facts


def make_context(env_name: str, state_text: str, expert_action: ActionText,
                 expert_next_state: str,
                 alternatives: list[tuple[ActionText, str]]) -> ReflectionContext:
    alts = tuple(alternatives)
    return ReflectionContext(
        env_name=env_name,
        state_text=state_text,
        expert_action=expert_action,
        expert_next_state=expert_next_state,
        alternatives=alts,
        constraint_facts=extract_constraint_facts(
            env_name, state_text, expert_action, expert_next_state, alts
        ),
    )


# ------------------------------------------------------------------ explainer

def _clip_obs(obs: str, cap: int = 48) -> str:
    """Clip at a word boundary so no split-word junk tokens enter targets."""
    if len(obs) <= cap:
        return obs
    cut = obs[:cap]
    if " " in cut:
        cut = cut.rsplit(" ", 1)[0]
    return cut


# Clauses deliberately avoid quoting random-alternative content: which
# alternative got sampled is unpredictable, and supervising unpredictable
# tokens only injects noise.  Short constant feedback strings are quoted.
def _drawback_clause(alt: dict, facts: dict) -> str:
    if alt["drawback"] == "noop":
        return f"leads to '{alt['obs']}', which makes no progress toward the goal"
    if alt["drawback"] == "format":
        return "was not enclosed in the required tags and only produces a format error"
    if alt["drawback"] == "budget":
        return f"costs more than the {facts['budget']} dollar budget allows"
    if alt["drawback"] == "wrong_object":
        return "picks up the wrong object"
    return "does not get closer to the goal"


def oracle_reflection(ctx: ReflectionContext) -> str:
    """Deterministic monologue grounded in the context; ends with the expert action.

    Kept deliberately terse: the model window must still see the goal echo
    when the terminal action is supervised.
    """
    facts = ctx.constraint_facts
    parts = [f"The goal is to {facts['goal']}"]
    alts = facts["alternatives"]
    flagged = [a for a in alts if a["drawback"]]
    if flagged:
        parts.append(f"One alternative {_drawback_clause(flagged[0], facts)}.")
        if len(alts) > 1:
            parts.append("The other alternatives do not help either.")
    elif all(a["obs"] == facts["expert_obs"] for a in alts):
        parts.append("The alternatives end the same way, but the expert action "
                     "reaches the goal in the fewest remaining steps.")
    else:
        parts.append("The alternatives do not get closer to the goal.")
    parts.append(
        f"The expert action '{ctx.expert_action.canonical}' leads to "
        f"'{_clip_obs(facts['expert_obs'])}', which moves directly toward the goal."
    )
    if "budget" in facts:
        parts.append(f"The price must stay lower than {facts['budget']} dollars.")
    body = " ".join(parts)
    return f"{body}{TERMINAL_MARKER}{ctx.expert_action.canonical}"


def star_rationale(state_text: str, action: ActionText) -> str:
    """Outcome-free rationale for the expert action (no next states provided)."""
    goal_line = state_text.split("\n", 1)[0].removeprefix("Task: ")
    body = (
        f"The goal is to {goal_line} Given the current observation, "
        f"'{action.canonical}' directly addresses the goal."
    )
    return f"{body}{TERMINAL_MARKER}{action.canonical}"


def generate_reflection(ctx: ReflectionContext, generator: str = "oracle_explainer",
                        endpoint: str | None = None) -> str:
    if generator == "oracle_explainer":
        return oracle_reflection(ctx)
    if generator == "external":
        if not endpoint:
            raise GeneratorUnavailable("external generator requested without an endpoint")
        raise GeneratorUnavailable(f"no client configured for endpoint {endpoint!r}")
    raise ValueError(f"unknown reflection generator {generator!r}")


def split_reflection_target(target_text: str) -> tuple[str, str]:
    """Split a reflection target into (monologue, terminal action string)."""
    if TERMINAL_MARKER not in target_text:
        raise ValueError("target text lacks the terminal action marker")
    body, action = target_text.rsplit(TERMINAL_MARKER, 1)
    return body, action.strip()


# Connective vocabulary the explainer may use beyond context strings; the
# groundedness scan treats everything else as a context-sourced entity.
TEMPLATE_WORDS = frozenset(
    """the goal is to one alternative leads which makes no progress toward was
    not enclosed in required tags and only produces a format error costs more
    than dollar budget allows picks up wrong object does get closer other
    alternatives do help either end same way but reaches fewest remaining
    steps expert action moves directly price must stay lower dollars given
    current observation addresses an this that s""".split()
)
