"""HopQA: multi-hop question answering over a synthetic fact base.

The action space is open: the agent writes either a tagged search query or a
tagged final answer.  Search returns the top-3 documents ranked by query
token overlap (ties broken by document id); the final answer is scored by
token-level F1 against the gold answer.  Malformed actions receive a fixed
format-error feedback and change nothing.
"""

from __future__ import annotations

import re

from ..errors import InsufficientTasks, MalformedTask, OracleFailure
from ..substrate import ActionText, RngStream, Step, TaskSpec, Trajectory
from .base import OPEN_ACTION_SPACE, EnvResult, EnvState, Environment

FORMAT_ERROR = (
    "Format error! You must enclose the search query within the <search></search> "
    "tags if external knowledge is required."
)
INITIAL_OBS = (
    "No documents retrieved yet. Use <search>query</search> to look up facts and "
    "<answer>final answer</answer> to finish."
)

_SEARCH_RE = re.compile(r"^<search>(.+)</search>$")
_ANSWER_RE = re.compile(r"^<answer>(.+)</answer>$")


def token_f1(prediction: str, gold: str) -> float:
    """Token-multiset F1 between two answer strings."""
    pred = prediction.lower().split()
    ref = gold.lower().split()
    if not pred or not ref:
        return 0.0
    common = 0
    remaining = list(ref)
    for tok in pred:
        if tok in remaining:
            remaining.remove(tok)
            common += 1
    if common == 0:
        return 0.0
    precision = common / len(pred)
    recall = common / len(ref)
    return 2 * precision * recall / (precision + recall)


class HopQA(Environment):
    name = "hopqa"

    def __init__(self, fixture: dict):
        self.fixture = fixture
        self.top_k = int(fixture["top_k"])
        self.docs = self._build_docs(fixture)
        self._doc_tokens = {doc_id: set(body.lower().split()) for doc_id, (_, body) in self.docs.items()}

    @staticmethod
    def _build_docs(fixture: dict) -> dict[str, tuple[str, str]]:
        docs: dict[str, tuple[str, str]] = {}
        films_by_star = {f["star"]: f for f in fixture["films"]}
        films_by_director: dict[str, list[str]] = {}
        for f in fixture["films"]:
            films_by_director.setdefault(f["director"], []).append(f["title"])
        for i, p in enumerate(fixture["persons"]):
            body = f"{p['name']} is a person born in {p['born_city']}."
            if p["name"] in films_by_star:
                body += f" {p['name']} starred in {films_by_star[p['name']]['title']}."
            for title in films_by_director.get(p["name"], []):
                body += f" {p['name']} directed {title}."
            docs[f"p{i:03d}"] = (p["name"], body)
        for i, f in enumerate(fixture["films"]):
            body = (
                f"{f['title']} is a film directed by {f['director']}. "
                f"it stars {f['star']}."
            )
            docs[f"f{i:03d}"] = (f["title"], body)
        for i, c in enumerate(fixture["cities"]):
            docs[f"c{i:03d}"] = (c["name"], f"{c['name']} is a city located in {c['country']}.")
        return docs

    # ------------------------------------------------------------ tasks
    def generate_tasks(self, n: int, rng: RngStream) -> list[TaskSpec]:
        persons = {p["name"]: p for p in self.fixture["persons"]}
        countries = {c["name"]: c["country"] for c in self.fixture["cities"]}
        pool = []
        for f in self.fixture["films"]:
            star, director, title = f["star"], f["director"], f["title"]
            born = persons[director]["born_city"]
            pool.append((
                f"who directed the film that {star} starred in?",
                {"answer": director, "hops": 2, "chain": [star, title]},
                "hops:2",
            ))
            pool.append((
                f"in which city was the director of {title} born?",
                {"answer": born, "hops": 2, "chain": [title, director]},
                "hops:2",
            ))
            pool.append((
                f"in which city was the director of the film that {star} starred in born?",
                {"answer": born, "hops": 3, "chain": [star, title, director]},
                "hops:3",
            ))
            pool.append((
                f"in which country was the director of {title} born?",
                {"answer": countries[born], "hops": 3, "chain": [title, director, born]},
                "hops:3",
            ))
        for p in self.fixture["persons"]:
            pool.append((
                f"in which country was {p['name']} born?",
                {"answer": countries[p["born_city"]], "hops": 2,
                 "chain": [p["name"], p["born_city"]]},
                "hops:2",
            ))
        if n > len(pool):
            raise InsufficientTasks(f"hopqa task pool holds {len(pool)} tasks, asked for {n}")
        picked = rng.child("hopqa-tasks").shuffle(pool)[:n]
        tasks = []
        for idx, (question, gold, novelty) in enumerate(picked):
            tasks.append(
                TaskSpec(
                    task_id=f"hq-{idx:04d}",
                    env_name=self.name,
                    goal_text=f"answer the question: {question}",
                    gold=gold,
                    novelty_key=novelty,
                )
            )
        return tasks

    # ------------------------------------------------------------ retrieval
    def search(self, query: str) -> str:
        terms = set(query.lower().split())
        scored = []
        for doc_id, tokens in self._doc_tokens.items():
            overlap = len(terms & tokens)
            if overlap > 0:
                scored.append((-overlap, doc_id))
        scored.sort()
        top = [doc_id for _, doc_id in scored[: self.top_k]]
        if not top:
            return "No documents matched your query."
        parts = []
        # Weakest match first: the best document lands adjacent to the
        # agent's next decision point.
        for doc_id in reversed(top):
            title, body = self.docs[doc_id]
            parts.append(f"Doc {doc_id} (Title: {title}) {body}")
        return " ".join(parts)

    # ------------------------------------------------------------ rendering
    def _classify(self, action: ActionText):
        m = _SEARCH_RE.match(action.canonical)
        if m:
            return "search", m.group(1)
        m = _ANSWER_RE.match(action.canonical)
        if m:
            return "answer", m.group(1)
        return "invalid", action.canonical

    def _render(self, task: TaskSpec, history: tuple[ActionText, ...]):
        """Rebuild the full tag stream plus the newest observation."""
        segments = []
        obs = INITIAL_OBS
        for action in history:
            kind, payload = self._classify(action)
            if kind == "search":
                obs = f"<information>{self.search(payload)}</information>"
                segments.append(f"<search>{payload}</search>{obs}")
            elif kind == "answer":
                obs = f"<answer>{payload}</answer>"
                segments.append(obs)
            else:
                obs = FORMAT_ERROR
                segments.append(f"{payload} {obs}")
        stream = "".join(segments) if segments else INITIAL_OBS
        return f"Task: {task.goal_text}\n{stream}", obs

    # ------------------------------------------------------------ protocol
    def reset(self, task: TaskSpec, rng=None) -> EnvState:
        if task.env_name != self.name:
            raise MalformedTask(f"task {task.task_id} belongs to {task.env_name}")
        state_text, obs = self._render(task, ())
        return EnvState(
            env_name=self.name,
            task=task,
            world=None,
            history=(),
            observation=obs,
            state_text=state_text,
            done=False,
            reward=0.0,
        )

    def admissible_actions(self, state: EnvState):
        self._check_not_done(state)
        return OPEN_ACTION_SPACE

    def step(self, state: EnvState, action: ActionText) -> EnvResult:
        self._check_not_done(state)
        kind, payload = self._classify(action)
        history = state.history + (action,)
        state_text, obs = self._render(state.task, history)
        done = kind == "answer"
        reward = token_f1(payload, state.task.gold["answer"]) if done else 0.0
        nxt = EnvState(
            env_name=self.name,
            task=state.task,
            world=None,
            history=history,
            observation=obs,
            state_text=state_text,
            done=done,
            reward=reward,
        )
        info = {"invalid_action": kind == "invalid"}
        if kind == "invalid":
            info["feedback"] = FORMAT_ERROR
        return EnvResult(nxt, reward, done, info)

    # ------------------------------------------------------------ oracle
    def oracle_plan(self, task: TaskSpec) -> Trajectory:
        gold = task.gold
        plan = [f"<search>{entity}</search>" for entity in gold["chain"]]
        plan.append(f"<answer>{gold['answer']}</answer>")
        state = self.reset(task)
        steps = []
        for i, raw in enumerate(plan):
            action = ActionText.of(raw)
            result = self.step(state, action)
            if result.info.get("invalid_action"):
                raise OracleFailure(f"{task.task_id}: oracle emitted invalid action {raw}")
            steps.append(Step(i, state.state_text, action, result.reward, result.done))
            state = result.next_state
        if not state.done or state.reward < 1.0:
            raise OracleFailure(f"{task.task_id}: oracle answer scored {state.reward}")
        return Trajectory(
            task_id=task.task_id,
            env_name=self.name,
            source="oracle",
            success=True,
            score=1.0,
            steps=tuple(steps),
        )

    def max_steps_default(self) -> int:
        return 6

    def vocab_seed_texts(self) -> list[str]:
        texts = [FORMAT_ERROR, INITIAL_OBS,
                 "<search>query</search><answer>final</answer><information></information>"]
        for doc_id in sorted(self.docs):
            title, body = self.docs[doc_id]
            texts.append(f"Doc {doc_id} (Title: {title}) {body}")
        return texts
