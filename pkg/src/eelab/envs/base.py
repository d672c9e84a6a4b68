"""Environment abstractions.

States are immutable values: step() returns a fresh EnvState and never
mutates its input, so any number of episodes (or forks of one episode) can
run concurrently.  Observations are pure functions of (task, history);
invalid actions append feedback text without touching the world.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any

from ..errors import SteppedTerminalState
from ..substrate import ActionText, TaskSpec

# Sentinel returned by admissible_actions for free-form action spaces.
OPEN_ACTION_SPACE = "open_action_space"

SUMMARY_CHAR_CAP = 400


@dataclass(frozen=True)
class EnvState:
    env_name: str
    task: TaskSpec
    world: Any
    history: tuple[ActionText, ...]
    observation: str
    state_text: str
    done: bool
    reward: float

    @property
    def step_count(self) -> int:
        return len(self.history)


@dataclass(frozen=True)
class EnvResult:
    next_state: EnvState
    reward: float
    done: bool
    info: dict


class Environment:
    """Interface implemented by each text world."""

    name: str = ""

    def reset(self, task: TaskSpec, rng=None) -> EnvState:
        raise NotImplementedError

    def step(self, state: EnvState, action: ActionText) -> EnvResult:
        raise NotImplementedError

    def admissible_actions(self, state: EnvState):
        """Full action list for closed-list envs, OPEN_ACTION_SPACE otherwise."""
        raise NotImplementedError

    def oracle_plan(self, task: TaskSpec):
        raise NotImplementedError

    def generate_tasks(self, n: int, rng) -> list[TaskSpec]:
        raise NotImplementedError

    def render_summary(self, state: EnvState) -> str:
        return summarize_state_text(self.name, state.state_text)

    def max_steps_default(self) -> int:
        return 8

    def sr_length_cap(self) -> int | None:
        """Trajectory length cap for the reflection-corpus quality filter."""
        return None

    def vocab_seed_texts(self) -> list[str]:
        """Fixture-derived template strings so the tokenizer covers feedback
        and terminal pages that never appear inside expert states."""
        return []

    def _check_not_done(self, state: EnvState) -> None:
        if state.done:
            raise SteppedTerminalState(f"{self.name}: episode already finished")


def render_state_text(task: TaskSpec, history: tuple[ActionText, ...], observation: str) -> str:
    """Shared prompt layout: goal line, action history, current observation."""
    header = f"Task: {task.goal_text}"
    if history:
        taken = " ".join(
            f"You have taken the action {i + 1}: '{a.canonical}'." for i, a in enumerate(history)
        )
        body = f"{taken} You are now at step {len(history)} and your current observation is: {observation}"
    else:
        body = f"You are now at step 0 and your current observation is: {observation}"
    return f"{header}\n{body}"


def advance(state: EnvState, action: ActionText, world, observation: str,
            reward: float, done: bool, render=render_state_text) -> EnvState:
    history = state.history + (action,)
    return replace(
        state,
        world=world,
        history=history,
        observation=observation,
        state_text=render(state.task, history, observation),
        done=done,
        reward=reward,
    )


_OBS_MARKER = "current observation is: "


def last_observation(state_text: str) -> str:
    """Recover the newest observation segment from a rendered state text."""
    idx = state_text.rfind(_OBS_MARKER)
    if idx < 0:
        return state_text
    return state_text[idx + len(_OBS_MARKER):]


def _clip(text: str, cap: int = SUMMARY_CHAR_CAP) -> str:
    return text if len(text) <= cap else text[: cap - 3] + "..."


def summarize_state_text(env_name: str, state_text: str) -> str:
    """Deterministic <=400 char sketch of a state: scene type plus salient delta.

    Works on the text alone so corpus builders can summarize stored next
    states without reconstructing environment objects.
    """
    obs = last_observation(state_text)
    low = obs.lower()
    if env_name == "tokenshop":
        if low.startswith("search results for"):
            n = low.count("[")
            q = low.split("'")[1] if "'" in low else ""
            head, _, listing = obs.partition(": ")
            return _clip(f"search-results page displaying {n} product listings for '{q}'. {listing}")
        if low.startswith("you are on the product page"):
            body = obs.removeprefix("You are on the product page for ")
            return _clip(f"product-details page for {body}")
        if low.startswith("thank you for your purchase"):
            return _clip("checkout confirmation page thanking you for the purchase. " + obs)
        if low.startswith("you are on the search page"):
            return _clip("search page with an empty search box.")
        return _clip(obs)
    if env_name == "hopqa":
        if low.startswith("format error"):
            return _clip(obs)
        if "<information>" in low:
            inner = obs.split("<information>", 1)[1].split("</information>", 1)[0]
            titles = [seg.split(")")[0] for seg in inner.split("(title: ")[1:]]
            head = "retrieved documents titled " + ", ".join(titles) + ". " if titles else ""
            return _clip(head + inner)
        return _clip(obs)
    # gridhouse and any future scene-style env: the observation is the delta.
    return _clip(obs)
